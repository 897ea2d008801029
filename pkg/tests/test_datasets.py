from __future__ import annotations

import json

import pytest

from conftest import FIXTURES
from typedmem.errors import ParseError, UnknownCategory
from typedmem.evaluation.datasets import load_dataset, load_locomo, load_longmemeval


def test_locomo_small_fixture():
    (sample,) = load_locomo(FIXTURES / "locomo_small.json")
    assert sample.sample_id == "synthetic-2s"
    assert sample.speakers == ("Audrey", "Calvin")
    assert len(sample.turns) == 12 and len(sample.qa) == 3
    assert sorted(q.category for q in sample.qa) == ["adversarial", "single_hop", "temporal"]
    assert sample.turns[0].timestamp == "2023-05-08T13:56:00"
    assert "adversarial" in sample.excluded_categories


def test_locomo_missing_qa(tmp_path):
    data = json.loads((FIXTURES / "locomo_small.json").read_text())
    del data[0]["qa"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    with pytest.raises(ParseError) as info:
        load_locomo(bad)
    assert "qa" in str(info.value) and str(bad) in str(info.value)


def test_locomo_unknown_category(tmp_path):
    data = json.loads((FIXTURES / "locomo_small.json").read_text())
    data[0]["qa"][0]["category"] = 99
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    with pytest.raises(UnknownCategory):
        load_locomo(bad)


def test_invalid_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[{")
    with pytest.raises(ParseError):
        load_dataset(bad)


def test_longmemeval_fixture():
    samples = load_longmemeval(FIXTURES / "longmemeval_small.json")
    assert [s.sample_id for s in samples] == ["q1", "q2_abs"]
    first, second = samples
    assert first.speakers == ("user", "assistant")
    assert len(first.turns) == 4 and first.turns[0].timestamp.startswith("2023-05-01T10:00")
    assert first.qa[0].question_date.startswith("2023-05-20T02:21")
    assert not first.qa[0].abstention and second.qa[0].abstention


def test_load_dataset_sniffs_format():
    assert len(load_dataset(FIXTURES / "conversation_3s.json")[0].qa) == 10
    assert len(load_dataset(FIXTURES / "longmemeval_small.json")) == 2
