from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from typedmem.core import (
    Embedding,
    EpisodicRecord,
    EvidenceSet,
    MemoryState,
    Precision,
    ProceduralRecord,
    RouteMask,
    ScoredHit,
    SemanticRecord,
    StoreType,
    TemporalAnchor,
    Turn,
    mask_from_int,
    mask_to_int,
    record_from_dict,
    record_to_dict,
    render_anchor,
)
from typedmem.errors import ValidationError

DAY = TemporalAnchor(2024, 7, 21, precision="day")


def test_turn_rejects_blank_text_and_bad_timestamp():
    with pytest.raises(ValidationError):
        Turn("A", "   ", "2024-07-22T10:55")
    with pytest.raises(ValidationError):
        Turn("A", "hello", "not a date")
    t = Turn("A", "hello", "2024-07-22T10:55:00+00:00")
    assert Turn.from_dict(json.loads(json.dumps(t.to_dict()))) == t


@pytest.mark.parametrize(
    "mask,value",
    [(RouteMask(True, False, False), 1), (RouteMask(), 0), (RouteMask(True, True, True), 7), (RouteMask(sem=True), 2)],
)
def test_mask_examples(mask, value):
    assert mask_to_int(mask) == value


def test_mask_roundtrip_all_eight():
    for v in range(8):
        assert mask_to_int(mask_from_int(v)) == v
    for bad in (-1, 8, True, 2.0):
        with pytest.raises(ValidationError):
            mask_from_int(bad)


def test_render_anchor_examples():
    assert render_anchor(TemporalAnchor(2024, 7, 21, precision="day")) == "2024-07-21"
    assert render_anchor(TemporalAnchor(2024, 6, precision="month")) == "June 2024"
    assert render_anchor(TemporalAnchor(2023)) == "2023"
    assert render_anchor(TemporalAnchor(2023, 5, 8, 570, "minute")) == "2023-05-08T09:30"


def test_anchor_invariants():
    with pytest.raises(ValidationError):
        TemporalAnchor(2024, None, 3, precision="day")  # day without month
    with pytest.raises(ValidationError):
        TemporalAnchor(2024, 5, None, 60, "minute")  # time without day
    with pytest.raises(ValidationError):
        TemporalAnchor(2024, 5, precision="day")  # precision claims more than populated
    with pytest.raises(ValidationError):
        TemporalAnchor(2023, 2, 30, precision="day")  # not a calendar date
    with pytest.raises(ValidationError):
        TemporalAnchor(2024, 13, precision="month")


@given(st.dates(), st.dates())
def test_render_injective_at_day_precision(a, b):
    ra, rb = render_anchor(TemporalAnchor.of_date(a)), render_anchor(TemporalAnchor.of_date(b))
    assert (ra == rb) == (a == b)


def test_anchor_dict_roundtrip():
    for anchor in (DAY, TemporalAnchor.of_month(2024, 6), TemporalAnchor(1999), TemporalAnchor(2023, 5, 8, 570, "minute")):
        assert TemporalAnchor.from_dict(json.loads(json.dumps(anchor.to_dict()))) == anchor
    assert DAY.precision is Precision.DAY


def test_embedding_rejects_non_finite_and_roundtrips_bytes():
    with pytest.raises(ValidationError):
        Embedding((1.0, float("nan")))
    e = Embedding((0.25, -0.5, 1.0))
    assert Embedding.from_bytes(e.to_bytes()) == e
    assert e.d == 3


def test_records_validate_and_roundtrip():
    emb = Embedding((0.6, 0.8))
    epi = EpisodicRecord("A", "Park visit", "A visited the park on 2024-07-21.", DAY, emb, "2024-07-22T10:55:00+00:00", 3, "epi-1")
    sem = SemanticRecord("A", "A's favorite color is teal.", DAY, emb, "2024-07-22T10:55:00+00:00", 4, "sem-1")
    pro = ProceduralRecord("A", "Reset router", ["unplug it", "wait ten seconds"], DAY, emb, "2024-07-22T10:55:00+00:00", 5, "pro-1")
    assert pro.content == ("unplug it", "wait ten seconds")
    for rec in (epi, sem, pro):
        back = record_from_dict(rec.store_type, json.loads(json.dumps(record_to_dict(rec))))
        assert back == rec
    assert epi.text == "Park visit — A visited the park on 2024-07-21."
    assert pro.text == "Reset router: unplug it; wait ten seconds"
    with pytest.raises(ValidationError):
        EpisodicRecord("A", "", "x", DAY)
    with pytest.raises(ValidationError):
        SemanticRecord("A", "one\ntwo", DAY)
    with pytest.raises(ValidationError):
        ProceduralRecord("A", "t", ["ok", " "], DAY)
    with pytest.raises(ValidationError):
        ProceduralRecord("A", "t", [], DAY)


def test_memory_state_orders_and_rejects_duplicate_ids():
    a = SemanticRecord("A", "fact b", DAY, created_at="2024-01-02T00:00:00+00:00", id="b")
    b = SemanticRecord("A", "fact a", DAY, created_at="2024-01-01T00:00:00+00:00", id="z")
    c = SemanticRecord("A", "fact c", DAY, created_at="2024-01-02T00:00:00+00:00", id="a")
    state = MemoryState(sem=(a, b, c))
    assert [r.id for r in state.sem] == ["z", "a", "b"]
    with pytest.raises(ValidationError):
        MemoryState(sem=(a, a))
    assert len(state.for_owner("B")) == 0


def test_scored_hit_and_evidence_set_invariants():
    with pytest.raises(ValidationError):
        ScoredHit(StoreType.SEM, "x", "A", 1.5)
    hi, lo = ScoredHit("sem", "x", "A", 0.9), ScoredHit("epi", "y", "A", 0.1)
    assert len(EvidenceSet((hi, lo), 2)) == 2
    with pytest.raises(ValidationError):
        EvidenceSet((lo, hi), 2)
    with pytest.raises(ValidationError):
        EvidenceSet((hi, lo), 1)
