"""MemoryEngine: the single ingest/query code path shared by CLI, service, and evaluation."""

from __future__ import annotations

import enum
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .answering import Answer, ExtractiveAnswerer, answer, serialize_record
from .core import (
    EvidenceSet,
    MemoryRecord,
    RouteMask,
    SemanticRecord,
    StoreType,
    TemporalAnchor,
    Turn,
    parse_timestamp,
)
from .embedding import Embedder, EmbedderConfig
from .errors import ParseError, ProviderError, TemporalError, ValidationError
from .extraction import ExtractorConfig, extract_episodic, extract_procedural, extract_semantic
from .providers import CompletionProvider
from .retrieval import RetrievalConfig, RetrievalResult, retrieve
from .routing import RouterConfig, route
from .store import StoreHandle

logger = logging.getLogger(__name__)

SECOND_SPEAKER_PLACEHOLDER = "assistant"


class MemoryMode(str, enum.Enum):
    TYPED = "typed"
    EPISODIC_ONLY = "episodic_only"
    SEMANTIC_ONLY = "semantic_only"
    PROCEDURAL_ONLY = "procedural_only"
    UNIFIED = "unified"


_FORCED_MASK = {
    MemoryMode.EPISODIC_ONLY: RouteMask(epi=True),
    MemoryMode.SEMANTIC_ONLY: RouteMask(sem=True),
    MemoryMode.PROCEDURAL_ONLY: RouteMask(pro=True),
}


class SteppingClock:
    """Deterministic clock: each call advances by ``step`` seconds."""

    def __init__(self, step: float = 0.001, start: float = 0.0):
        self.step = step
        self._now = start
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            self._now += self.step
            return self._now


ClockFactory = Callable[[], Callable[[], float]]


def wall_clock() -> Callable[[], float]:
    return time.perf_counter


@dataclass
class IngestOutcome:
    mask: RouteMask
    record_ids: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class QueryOutcome:
    answer: Answer
    banks: dict[str, EvidenceSet]
    speaker_ids: tuple[str, str]
    search_s: float

    @property
    def gen_s(self) -> float:
        return self.answer.gen_latency_s

    @property
    def total_s(self) -> float:
        return self.search_s + self.answer.gen_latency_s

    def to_dict(self) -> dict[str, object]:
        evidence = []
        for owner in self.speaker_ids:
            bank = self.banks.get(owner)
            if bank is None:
                continue
            for hit in bank:
                evidence.append({**hit.to_dict(), "line": serialize_record(hit.record)})
        return {
            "answer": self.answer.text,
            "evidence": evidence,
            "latency": {"search_s": self.search_s, "generation_s": self.gen_s, "total_s": self.total_s},
        }


@dataclass
class MemoryEngine:
    """Route -> extract -> embed -> write on ingest; retrieve -> assemble -> answer on query.

    ``test_mode`` makes every output byte-stable: record ids are sequential,
    ``created_at`` is the turn timestamp, and latencies come from a stepping clock.
    """

    store: StoreHandle
    embedder: Embedder | None = None
    router: RouterConfig = field(default_factory=RouterConfig)
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    provider: CompletionProvider | None = None
    answerer: CompletionProvider | None = None
    mode: MemoryMode = MemoryMode.TYPED
    test_mode: bool = False
    clock_factory: ClockFactory | None = None

    def __post_init__(self) -> None:
        self.mode = MemoryMode(self.mode)
        if self.embedder is None:
            self.embedder = Embedder(EmbedderConfig(dimension=self.store.dimension))
        if self.embedder.dimension != self.store.dimension:
            raise ValidationError(
                f"embedder d={self.embedder.dimension} does not match store d={self.store.dimension}", "dimension"
            )
        if self.answerer is None:
            self.answerer = ExtractiveAnswerer()
        if self.clock_factory is None:
            self.clock_factory = SteppingClock if self.test_mode else wall_clock

    # -- ingestion ------------------------------------------------------

    def _finish(self, record: MemoryRecord, turn: Turn) -> MemoryRecord:
        created = parse_timestamp(turn.timestamp).isoformat() if self.test_mode else None
        return replace(record, embedding=self.embedder.embed(record.text), created_at=created)

    def route_turn(self, turn: Turn) -> RouteMask:
        if self.mode in _FORCED_MASK:
            return _FORCED_MASK[self.mode]
        return route(turn, self.router, self.provider)

    def extract(self, turn: Turn, mask: RouteMask, source_turn: int = 0) -> tuple[list[MemoryRecord], list[str]]:
        cfg = self.extractor.for_turn(turn)
        records: list[MemoryRecord] = []
        errors: list[str] = []
        steps = (
            (mask.epi, extract_episodic),
            (mask.sem, extract_semantic),
            (mask.pro, extract_procedural),
        )
        for wanted, fn in steps:
            if not wanted:
                continue
            try:
                records.append(fn(turn, cfg, self.provider, source_turn))
            except (ParseError, ProviderError, TemporalError, ValidationError) as exc:
                logger.warning("turn %d: %s failed: %s", source_turn, fn.__name__, exc)
                errors.append(f"{fn.__name__}: {exc}")
        return records, errors

    def ingest_turn(self, turn: Turn, source_turn: int = 0, route_override: RouteMask | None = None) -> IngestOutcome:
        if self.mode is MemoryMode.UNIFIED:
            anchor = TemporalAnchor.of_date(turn.instant.date())
            record = SemanticRecord(turn.speaker_id, " ".join(turn.text.split()), anchor, source_turn=source_turn)
            rid = self.store.write(self._finish(record, turn))
            return IngestOutcome(RouteMask(sem=True), [rid])
        mask = route_override if route_override is not None else self.route_turn(turn)
        records, errors = self.extract(turn, mask, source_turn)
        outcome = IngestOutcome(mask, errors=errors)
        for record in records:
            outcome.record_ids.append(self.store.write(self._finish(record, turn)))
        return outcome

    def ingest(self, turns: Sequence[Turn]) -> list[IngestOutcome]:
        return [self.ingest_turn(turn, i) for i, turn in enumerate(turns)]

    # -- query ----------------------------------------------------------

    def retrieval_config(self, k: int | None = None, budget: int | None = None) -> RetrievalConfig:
        cfg = self.retrieval
        k_per_store = k if k is not None else cfg.k_per_store
        stores = cfg.stores
        if self.mode is MemoryMode.UNIFIED:
            # One undifferentiated store: hold candidate volume at three stores' worth.
            k_per_store, stores = 3 * k_per_store, (StoreType.SEM,)
        return RetrievalConfig(k_per_store, budget if budget is not None else cfg.budget_K, stores)

    def retrieve(
        self,
        question: str,
        owner_ids: Sequence[str],
        k: int | None = None,
        budget: int | None = None,
        clock: Callable[[], float] | None = None,
    ) -> RetrievalResult:
        return retrieve(
            question,
            self.store,
            owner_ids,
            self.retrieval_config(k, budget),
            self.embedder.embed,
            clock or self.clock_factory(),
        )

    def query(
        self,
        question: str,
        owner_ids: Sequence[str],
        k: int | None = None,
        budget: int | None = None,
    ) -> QueryOutcome:
        """Answer ``question`` from the banks of one or two owners.

        With one owner the second bank is an empty placeholder so the fixed
        two-bank template keeps its shape.
        """
        if not question or not question.strip():
            raise ValidationError("question must be non-empty", "question")
        if not 1 <= len(owner_ids) <= 2:
            raise ValidationError("query takes one or two owner ids", "owner_ids")
        clock = self.clock_factory()
        result = self.retrieve(question, owner_ids, k, budget, clock)
        banks = dict(result.banks)
        speakers = tuple(owner_ids) if len(owner_ids) == 2 else (owner_ids[0], SECOND_SPEAKER_PLACEHOLDER)
        empty = EvidenceSet((), self.retrieval_config(k, budget).budget_K)
        ordered = [banks.get(s, empty) for s in speakers]
        reply = answer(question, ordered, self.answerer, speakers, clock)
        return QueryOutcome(reply, banks, speakers, result.search_s)

