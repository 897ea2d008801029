"""Query-time pipeline: per-store exact top-k, union, dedup, truncate to K."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import Embedding, EvidenceSet, MemoryRecord, MemoryState, ScoredHit, StoreType, order_key
from .errors import DimensionError, ValidationError

Clock = Callable[[], float]


@dataclass(frozen=True)
class RetrievalConfig:
    k_per_store: int = 20
    budget_K: int = 25
    stores: tuple[StoreType, ...] = (StoreType.EPI, StoreType.SEM, StoreType.PRO)

    def __post_init__(self) -> None:
        if self.k_per_store < 1:
            raise ValidationError("k_per_store must be >= 1", "k_per_store")
        if self.budget_K < 1:
            raise ValidationError("budget_K must be >= 1", "budget_K")
        object.__setattr__(self, "stores", tuple(StoreType(s) for s in self.stores))


# Scores are rounded to this many decimals so that cosines which are equal in
# exact arithmetic compare equal and fall through to the (created_at, id) tie-break.
SCORE_DECIMALS = 12


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    # float32 x float32 products are exact in float64; fsum rounds the sum once.
    return math.fsum((a * b).tolist())


def _cosine_arrays(a: np.ndarray, b: np.ndarray) -> float:
    na = math.sqrt(_dot(a, a))
    nb = math.sqrt(_dot(b, b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return round(min(1.0, max(-1.0, _dot(a, b) / (na * nb))), SCORE_DECIMALS)


def cosine(a: Embedding, b: Embedding) -> float:
    if a.d != b.d:
        raise DimensionError(f"cosine of d={a.d} and d={b.d}")
    return _cosine_arrays(a.array.astype(np.float64), b.array.astype(np.float64))


def cosine_many(query: Embedding, records: Sequence[MemoryRecord]) -> list[float]:
    """Scores in input order; each equals ``cosine(query, r.embedding)`` bitwise."""
    q = query.array.astype(np.float64)
    out = []
    for r in records:
        if r.embedding is None or r.embedding.d != query.d:
            raise DimensionError(f"record {r.id} dimension does not match query d={query.d}")
        out.append(_cosine_arrays(q, r.embedding.array.astype(np.float64)))
    return out


def _hit_key(hit: ScoredHit) -> tuple[float, float, str]:
    return (-hit.score, *order_key(hit.record))


def topk_store(query: Embedding, records: Sequence[MemoryRecord], k: int) -> list[ScoredHit]:
    """Exact top-k by cosine, ties broken by (created_at, id) ascending."""
    hits = [
        ScoredHit(r.store_type, r.id or "", r.owner_id, s, r)
        for r, s in zip(records, cosine_many(query, records))
    ]
    hits.sort(key=_hit_key)
    return hits[:k]


def dedup_key(hit: ScoredHit | None, record: MemoryRecord) -> str:
    return " ".join(record.text.lower().split())


def merge(candidates: Iterable[ScoredHit], budget: int) -> EvidenceSet:
    """Union -> sort -> keep first occurrence per dedup key -> truncate."""
    ordered = sorted(candidates, key=_hit_key)
    seen: set[str] = set()
    kept: list[ScoredHit] = []
    for hit in ordered:
        key = dedup_key(hit, hit.record)
        if key in seen:
            continue
        seen.add(key)
        kept.append(hit)
        if len(kept) == budget:
            break
    return EvidenceSet(tuple(kept), budget)


def retrieve_state(query: Embedding, state: MemoryState, cfg: RetrievalConfig) -> EvidenceSet:
    """Pipeline over an in-memory state holding one owner's records."""
    candidates: list[ScoredHit] = []
    for kind in cfg.stores:
        candidates.extend(topk_store(query, state.of(kind), cfg.k_per_store))
    return merge(candidates, cfg.budget_K)


@dataclass(frozen=True)
class RetrievalResult:
    banks: Mapping[str, EvidenceSet]
    search_s: float
    query_embedding: Embedding | None = field(default=None, repr=False)


def retrieve(
    query_text: str,
    store_handle,
    owner_ids: Sequence[str],
    cfg: RetrievalConfig = RetrievalConfig(),
    embedder: Callable[[str], Embedding] | None = None,
    clock: Clock = time.perf_counter,
) -> RetrievalResult:
    """Embed once, then build one EvidenceSet per owner; times the whole operation."""
    if embedder is None:
        from .embedding import hashed_embed

        embedder = lambda text: hashed_embed(text, store_handle.dimension)  # noqa: E731
    started = clock()
    query = embedder(query_text)
    if query.d != store_handle.dimension:
        raise DimensionError(f"query d={query.d}, store d={store_handle.dimension}")
    banks = {}
    for owner in owner_ids:
        candidates: list[ScoredHit] = []
        for kind in cfg.stores:
            candidates.extend(topk_store(query, store_handle.list(kind, owner), cfg.k_per_store))
        banks[owner] = merge(candidates, cfg.budget_K)
    return RetrievalResult(banks, clock() - started, query)
