"""Benchmark runner: ingest each sample, answer its questions, score, aggregate."""

from __future__ import annotations

import json
import logging
import re
import statistics
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from ..answering import bank_lines
from ..embedding import Embedder, EmbedderConfig
from ..engine import MemoryEngine, MemoryMode
from ..errors import BenchmarkError, TypedMemError, ValidationError
from ..extraction import ExtractorConfig
from ..providers import CompletionProvider
from ..retrieval import RetrievalConfig
from ..routing import RouterConfig
from ..store import open_store
from .datasets import QAItem, Sample
from .judge import JUDGE_PASSES, is_abstention, judge_prompt, parse_verdict, summarize_runs
from .metrics import DEFAULT_COUNTER_NAME, bleu, count_evidence_tokens, normalize, percentile, token_f1

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class RunConfig:
    mode: MemoryMode = MemoryMode.TYPED
    k_per_store: int = 20
    budget_K: int = 25
    parallelism: int = 1
    judge_passes: int = JUDGE_PASSES
    max_error_rate: float = 0.10
    counter_name: str = DEFAULT_COUNTER_NAME
    dataset: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", MemoryMode(self.mode))
        if self.parallelism < 1:
            raise ValidationError("parallelism must be >= 1", "parallelism")
        if self.judge_passes < 1:
            raise ValidationError("judge_passes must be >= 1", "judge_passes")

    @property
    def retrieval(self) -> RetrievalConfig:
        return RetrievalConfig(self.k_per_store, self.budget_K)

    def to_dict(self) -> dict[str, Any]:
        # Parallelism is an execution detail; leaving it out keeps reports
        # byte-identical across thread counts.
        out = asdict(self)
        out["mode"] = self.mode.value
        del out["parallelism"]
        return out


@dataclass
class EngineSpec:
    """Everything needed to build a MemoryEngine for one sample's store file."""

    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    router: RouterConfig = field(default_factory=RouterConfig)
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    provider: CompletionProvider | None = None
    answerer: CompletionProvider | None = None
    test_mode: bool = False

    def build(self, store_path: Path, mode: MemoryMode, retrieval: RetrievalConfig) -> MemoryEngine:
        store = open_store(store_path, self.embedder.dimension, test_mode=self.test_mode)
        return MemoryEngine(
            store,
            Embedder(self.embedder),
            self.router,
            self.extractor,
            retrieval,
            self.provider,
            self.answerer,
            mode,
            self.test_mode,
        )


@dataclass(frozen=True)
class Prediction:
    text: str
    search_s: float
    total_s: float
    evidence_tokens: int


@dataclass(frozen=True)
class QAResult:
    item_id: str
    category: str
    question: str
    gold_answers: tuple[str, ...]
    prediction: str | None
    f1: float | None
    bleu1: float | None
    judge_runs: tuple[bool, ...]
    search_s: float
    total_s: float
    evidence_tokens: int
    abstention: bool = False
    error: str | None = None

    def __post_init__(self) -> None:
        if self.error is None and self.total_s < self.search_s:
            raise ValidationError(f"{self.item_id}: total_s {self.total_s} < search_s {self.search_s}", "total_s")

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["gold_answers"] = list(self.gold_answers)
        out["judge_runs"] = list(self.judge_runs)
        return out


def _mean(values: Iterable[float]) -> float | None:
    values = list(values)
    return statistics.fmean(values) if values else None


def _pct(values: Iterable[float], p: float) -> float | None:
    values = list(values)
    return percentile(values, p) if values else None


def aggregate(results: Sequence[QAResult], passes: int = JUDGE_PASSES) -> dict[str, Any]:
    """Aggregates over successful items; lexical metrics skip abstention items."""
    ok = [r for r in results if r.ok]
    lexical = [r for r in ok if r.f1 is not None]
    f1 = _mean(r.f1 for r in lexical)
    b1 = _mean(r.bleu1 for r in lexical)
    summary = summarize_runs([r.judge_runs for r in ok], passes)
    return {
        "n": len(ok),
        "judge": summary.to_dict() if ok else None,
        "f1": None if f1 is None else 100.0 * f1,
        "bleu1": None if b1 is None else 100.0 * b1,
        "tokens_mean": _mean(r.evidence_tokens for r in ok),
        "search_p50": _pct((r.search_s for r in ok), 50),
        "search_p95": _pct((r.search_s for r in ok), 95),
        "total_p50": _pct((r.total_s for r in ok), 50),
        "total_p95": _pct((r.total_s for r in ok), 95),
    }


@dataclass
class Report:
    config: dict[str, Any]
    overall: dict[str, Any]
    categories: dict[str, dict[str, Any]]
    excluded: dict[str, int]
    errors: int
    items: list[QAResult]

    @classmethod
    def build(
        cls,
        results: Sequence[QAResult],
        cfg: RunConfig,
        excluded_categories: Iterable[str] = ("adversarial",),
    ) -> Report:
        excluded = set(excluded_categories)
        names = sorted({r.category for r in results})
        categories = {name: aggregate([r for r in results if r.category == name], cfg.judge_passes) for name in names}
        counted = [r for r in results if r.category not in excluded]
        return cls(
            config=cfg.to_dict(),
            overall=aggregate(counted, cfg.judge_passes),
            categories=categories,
            excluded={name: sum(r.category == name for r in results) for name in sorted(excluded)},
            errors=sum(not r.ok for r in results),
            items=list(results),
        )

    @property
    def judge_mean(self) -> float:
        return self.overall["judge"]["mean"] if self.overall["judge"] else 0.0

    @property
    def judge_std(self) -> float:
        return self.overall["judge"]["std"] if self.overall["judge"] else 0.0

    @property
    def tokens_mean(self) -> float:
        return self.overall["tokens_mean"] or 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "overall": self.overall,
            "categories": self.categories,
            "excluded": self.excluded,
            "errors": self.errors,
            "items": [r.to_dict() for r in self.items],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def table(self) -> str:
        """Human-readable summary in the shape of the results tables."""

        def fmt(v: float | None, spec: str = ".2f") -> str:
            return "-" if v is None else format(v, spec)

        header = f"{'category':<28}{'n':>6}  {'judge':>15}{'F1':>8}{'B1':>8}{'tokens':>9}{'p50 tot':>9}{'p95 tot':>9}"
        rows = [header, "-" * len(header)]
        blocks = [*self.categories.items(), ("overall", self.overall)]
        for name, agg in blocks:
            j = agg["judge"]
            judge = "-" if j is None else f"{j['mean']:.2f} ± {j['std']:.2f}"
            rows.append(
                f"{name:<28}{agg['n']:>6}  {judge:>15}{fmt(agg['f1']):>8}{fmt(agg['bleu1']):>8}"
                f"{fmt(agg['tokens_mean'], '.1f'):>9}{fmt(agg['total_p50'], '.3f'):>9}{fmt(agg['total_p95'], '.3f'):>9}"
            )
        rows.append(f"counter={self.config.get('counter_name')} errors={self.errors} excluded={self.excluded}")
        return "\n".join(rows) + "\n"

    def write(self, out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path, table_path = out / f"{stem}.json", out / f"{stem}.txt"
        json_path.write_text(self.to_json(), encoding="utf-8")
        table_path.write_text(self.table(), encoding="utf-8")
        return json_path, table_path


def _pool_map(fn: Callable[[Any], Any], items: Sequence[Any], parallelism: int) -> list[Any]:
    if parallelism == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def judge_items(
    items: Sequence[QAItem],
    predictions: Sequence[str],
    provider: CompletionProvider,
    passes: int = JUDGE_PASSES,
    parallelism: int = 1,
) -> list[tuple[bool, ...]]:
    """Run ``passes`` full judging passes.

    Within a pass identical prompts are sent once and share the verdict, which
    keeps replayed fixtures deterministic under any thread count. Abstention
    items are decided by the abstention phrase set without a model call.
    """
    prompts_ = [None if it.abstention else judge_prompt(it.question, it.gold_answers, p) for it, p in zip(items, predictions)]
    unique = list(dict.fromkeys(p for p in prompts_ if p is not None))
    runs: list[list[bool]] = [[] for _ in items]
    for _ in range(passes):

        def ask(prompt: str) -> bool:
            reply = provider.complete(prompt)
            verdict = parse_verdict(reply)
            if verdict is None:
                logger.warning("unparseable judge verdict counted as WRONG: %r", reply[:120])
                return False
            return verdict

        verdicts = dict(zip(unique, _pool_map(ask, unique, parallelism)))
        for i, (item, prompt) in enumerate(zip(items, prompts_)):
            runs[i].append(is_abstention(predictions[i]) if prompt is None else verdicts[prompt])
    return [tuple(r) for r in runs]


def score_items(
    items: Sequence[QAItem],
    predictions: Sequence[Prediction | None],
    judge_provider: CompletionProvider,
    passes: int = JUDGE_PASSES,
    parallelism: int = 1,
    errors: Sequence[str | None] | None = None,
) -> list[QAResult]:
    """Lexical metrics plus judge passes for answered items; failed items are carried through."""
    errors = list(errors) if errors is not None else [None] * len(items)
    answered = [i for i, p in enumerate(predictions) if p is not None and errors[i] is None]
    runs = judge_items([items[i] for i in answered], [predictions[i].text for i in answered], judge_provider, passes, parallelism)
    verdicts = dict(zip(answered, runs))
    results = []
    for i, item in enumerate(items):
        pred = predictions[i]
        if i not in verdicts:
            results.append(
                QAResult(item.id, item.category, item.question, item.gold_answers, None, None, None, (),
                         0.0, 0.0, 0, item.abstention, errors[i] or "no prediction")
            )
            continue
        f1 = b1 = None
        if not item.abstention:
            p = normalize(pred.text, item.question_date)
            golds = [normalize(g, item.question_date) for g in item.gold_answers]
            f1, b1 = token_f1(p, golds), bleu(p, golds, 1)
        results.append(
            QAResult(item.id, item.category, item.question, item.gold_answers, pred.text, f1, b1, verdicts[i],
                     pred.search_s, pred.total_s, pred.evidence_tokens, item.abstention)
        )
    return results


_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def store_path_for(workdir: Path, sample: Sample, mode: MemoryMode) -> Path:
    return workdir / f"{_UNSAFE.sub('_', sample.sample_id)}.{mode.value}.db"


def prepare_engine(spec: EngineSpec, sample: Sample, cfg: RunConfig, workdir: Path) -> MemoryEngine:
    """Open (and, on first use, ingest) the sample's store; a marker file allows reuse across runs."""
    path = store_path_for(workdir, sample, cfg.mode)
    done = path.with_suffix(path.suffix + ".done")
    if path.exists() and not done.exists():
        for stale in (path, Path(f"{path}-wal"), Path(f"{path}-shm")):
            stale.unlink(missing_ok=True)
    engine = spec.build(path, cfg.mode, cfg.retrieval)
    if not done.exists():
        failures = sum(len(o.errors) for o in engine.ingest(sample.turns))
        if failures:
            logger.warning("sample %s: %d extraction failures skipped", sample.sample_id, failures)
        done.write_text("ok\n", encoding="utf-8")
    return engine


def answer_item(engine: MemoryEngine, sample: Sample, item: QAItem) -> Prediction:
    outcome = engine.query(item.question, sample.speakers)
    lines = [line for s in outcome.speaker_ids if s in outcome.banks for line in bank_lines(outcome.banks[s])]
    return Prediction(outcome.answer.text, outcome.search_s, outcome.total_s, count_evidence_tokens(lines))


def run_benchmark(
    samples: Sequence[Sample],
    spec: EngineSpec,
    judge_provider: CompletionProvider,
    cfg: RunConfig = RunConfig(),
    workdir: str | Path | None = None,
) -> Report:
    """Ingest -> answer (parallel per item) -> score -> aggregate.

    Item failures are recorded and the run continues; more than
    ``cfg.max_error_rate`` failed items raises BenchmarkError (carrying the report).
    """
    tmp = None
    if workdir is None:
        tmp = tempfile.TemporaryDirectory(prefix="typedmem-bench-")
        workdir = tmp.name
    work = Path(workdir)
    work.mkdir(parents=True, exist_ok=True)
    items: list[QAItem] = []
    predictions: list[Prediction | None] = []
    errors: list[str | None] = []
    excluded: set[str] = set()
    try:
        for sample in samples:
            excluded |= sample.excluded_categories
            engine = prepare_engine(spec, sample, cfg, work)
            try:

                def attempt(item: QAItem) -> tuple[Prediction | None, str | None]:
                    try:
                        return answer_item(engine, sample, item), None
                    except TypedMemError as exc:
                        logger.error("item %s failed: %s", item.id, exc)
                        return None, f"{type(exc).__name__}: {exc}"

                for item, (pred, err) in zip(sample.qa, _pool_map(attempt, sample.qa, cfg.parallelism)):
                    items.append(item)
                    predictions.append(pred)
                    errors.append(err)
            finally:
                engine.store.close()
    finally:
        if tmp is not None:
            tmp.cleanup()
    results = score_items(items, predictions, judge_provider, cfg.judge_passes, cfg.parallelism, errors)
    report = Report.build(results, cfg, excluded or ("adversarial",))
    if items and report.errors > cfg.max_error_rate * len(items):
        err = BenchmarkError(f"{report.errors}/{len(items)} items failed (limit {cfg.max_error_rate:.0%})")
        err.report = report  # type: ignore[attr-defined]
        raise err
    return report
