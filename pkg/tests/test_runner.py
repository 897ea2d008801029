from __future__ import annotations

import json
import statistics

import pytest

from conftest import FIXTURES
from typedmem.answering import ExtractiveAnswerer
from typedmem.errors import BenchmarkError, ProviderError, ValidationError
from typedmem.evaluation.datasets import QAItem, load_locomo
from typedmem.evaluation.judge import LexicalJudge
from typedmem.evaluation.runner import (
    EngineSpec,
    Prediction,
    QAResult,
    Report,
    RunConfig,
    run_benchmark,
    score_items,
    store_path_for,
)

SPEC = EngineSpec(test_mode=True)


@pytest.fixture(scope="module")
def samples():
    return load_locomo(FIXTURES / "conversation_3s.json")


@pytest.fixture(scope="module")
def report(samples, tmp_path_factory):
    return run_benchmark(samples, SPEC, LexicalJudge(), RunConfig(), tmp_path_factory.mktemp("work"))


def test_overall_excludes_adversarial(report):
    assert report.excluded == {"adversarial": 1}
    assert report.overall["n"] == 9
    assert "adversarial" in report.categories
    assert report.overall["judge"]["mean"] == 100.0


def test_latency_fields(report):
    for item in report.items:
        assert item.total_s >= item.search_s
        assert item.search_s == pytest.approx(0.001) and item.total_s == pytest.approx(0.002)
    assert report.overall["search_p95"] == pytest.approx(0.001)


def test_aggregation_oracle(report):
    counted = [r for r in report.items if r.category != "adversarial"]
    pass_means = [100 * sum(r.judge_runs[p] for r in counted) / len(counted) for p in range(3)]
    assert report.overall["judge"]["mean"] == pytest.approx(statistics.mean(pass_means))
    assert report.overall["judge"]["std"] == pytest.approx(statistics.pstdev(pass_means))
    assert report.overall["f1"] == pytest.approx(100 * statistics.mean(r.f1 for r in counted))
    assert report.overall["bleu1"] == pytest.approx(100 * statistics.mean(r.bleu1 for r in counted))
    assert report.overall["tokens_mean"] == pytest.approx(statistics.mean(r.evidence_tokens for r in counted))
    for name, agg in report.categories.items():
        assert agg["n"] == sum(r.category == name for r in report.items)


def test_report_serialization(report, tmp_path):
    json_path, table_path = report.write(tmp_path)
    data = json.loads(json_path.read_text())
    assert data["schema_version"] == "1"
    assert data["config"]["counter_name"] == "whitespace" and "parallelism" not in data["config"]
    assert all(len(item["judge_runs"]) == 3 for item in data["items"])
    assert "overall" in table_path.read_text()


def test_qaresult_enforces_latency_order():
    with pytest.raises(ValidationError):
        QAResult("x", "single_hop", "q", ("a",), "a", 1.0, 1.0, (True,) * 3, search_s=0.5, total_s=0.4, evidence_tokens=1)


def test_abstention_items_skip_lexical_metrics():
    items = [QAItem("q_abs", "Cat name?", ("You did not mention a cat.",), "single-session-user", abstention=True)]
    (res,) = score_items(items, [Prediction("No information available.", 0.1, 0.2, 0)], LexicalJudge())
    assert res.f1 is None and res.bleu1 is None and res.judge_runs == (True, True, True)


class FlakyAnswerer:
    """Raises for questions containing any of the given words."""

    model_id = "flaky"

    def __init__(self, *words):
        self.words = words
        self.inner = ExtractiveAnswerer()

    def complete(self, prompt: str) -> str:
        question = prompt.rpartition("Question: ")[2]
        if any(w in question for w in self.words):
            raise ProviderError("simulated outage")
        return self.inner.complete(prompt)


def test_item_failures_recorded_and_run_continues(samples, tmp_path):
    spec = EngineSpec(answerer=FlakyAnswerer("Calvin work"), test_mode=True)
    report = run_benchmark(samples, spec, LexicalJudge(), RunConfig(), tmp_path)
    assert report.errors == 1
    failed = [r for r in report.items if not r.ok]
    assert failed[0].error.startswith("ProviderError")
    assert report.overall["n"] == 8


def test_too_many_failures_raise(samples, tmp_path):
    spec = EngineSpec(answerer=FlakyAnswerer("Calvin", "Audrey"), test_mode=True)
    with pytest.raises(BenchmarkError) as info:
        run_benchmark(samples, spec, LexicalJudge(), RunConfig(), tmp_path)
    assert info.value.report.errors > 1


def test_store_reuse_marker(samples, tmp_path):
    run_benchmark(samples, SPEC, LexicalJudge(), RunConfig(), tmp_path)
    path = store_path_for(tmp_path, samples[0], RunConfig().mode)
    assert path.exists() and path.with_suffix(path.suffix + ".done").exists()
    again = run_benchmark(samples, SPEC, LexicalJudge(), RunConfig(), tmp_path)
    assert again.overall["n"] == 9


def test_empty_results_report():
    report = Report.build([], RunConfig())
    assert report.overall["n"] == 0 and report.judge_mean == 0.0
