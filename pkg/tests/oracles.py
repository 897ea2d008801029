"""Reference implementations written independently of the package, used as test oracles."""

from __future__ import annotations

import math
import random
from datetime import datetime
from fractions import Fraction

import numpy as np

from typedmem.core import (
    Embedding,
    EpisodicRecord,
    ProceduralRecord,
    SemanticRecord,
    StoreType,
    TemporalAnchor,
)

VOCAB = (
    "alpha beta gamma delta hiking paris dog bella max coffee filter router garden "
    "violin sister beach museum pottery soup recipe tennis"
).split()


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) % (1 << 64)
    return h


def embed_ref(text: str, d: int) -> Embedding:
    """Hashed bag of words: lowercase alnum runs, FNV-1a bucket, L2-normalized, float32."""
    counts = [0] * d
    word = []
    for ch in text.lower() + " ":
        if ch.isalnum():
            word.append(ch)
        elif word:
            counts[fnv1a64("".join(word).encode("utf-8")) % d] += 1
            word = []
    norm = math.sqrt(sum(c * c for c in counts))
    values = [c / norm if norm else 0.0 for c in counts]
    return Embedding(tuple(float(np.float32(v)) for v in values))


def cosine_ref(a: Embedding, b: Embedding) -> float:
    dot = math.fsum(x * y for x, y in zip(a.values, b.values))
    na = math.sqrt(math.fsum(x * x for x in a.values))
    nb = math.sqrt(math.fsum(y * y for y in b.values))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return round(max(-1.0, min(1.0, dot / (na * nb))), 12)


def text_key(record) -> str:
    if record.store_type is StoreType.EPI:
        text = f"{record.title} — {record.summary}"
    elif record.store_type is StoreType.SEM:
        text = record.fact
    else:
        content = record.content if isinstance(record.content, str) else "; ".join(record.content)
        text = f"{record.title}: {content}"
    return " ".join(text.lower().split())


def _rank(query: Embedding, records) -> list[tuple[float, object]]:
    scored = [(cosine_ref(query, r.embedding), r) for r in records]
    scored.sort(key=lambda sr: (-sr[0], datetime.fromisoformat(sr[1].created_at), sr[1].id))
    return scored


def brute_force_bank(query: Embedding, by_type: dict, k_per_store: int | None, budget: int) -> list[tuple[str, float]]:
    """Score everything, optionally cap each store at k, dedup by key (best first), cut to budget.

    With ``k_per_store=None`` the union is the whole store (score-everything oracle).
    """
    pool: list[tuple[float, object]] = []
    for records in by_type.values():
        ranked = _rank(query, records)
        pool.extend(ranked if k_per_store is None else ranked[:k_per_store])
    pool.sort(key=lambda sr: (-sr[0], datetime.fromisoformat(sr[1].created_at), sr[1].id))
    seen, out = set(), []
    for score, record in pool:
        key = text_key(record)
        if key in seen:
            continue
        seen.add(key)
        out.append((record.id, score))
        if len(out) == budget:
            break
    return out


def random_records(rng: random.Random, d: int, owners=("A", "B"), max_per_type: int = 50):
    """Records with small-vocabulary texts (so dedup keys and score ties collide) and repeated timestamps."""

    def text(n_lo=1, n_hi=4):
        return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(n_lo, n_hi)))

    anchor = TemporalAnchor.of_month(2024, 5)
    out = []
    serial = 0
    for kind in StoreType:
        for _ in range(rng.randint(0, max_per_type)):
            serial += 1
            owner = rng.choice(owners)
            created = f"2024-05-{rng.randint(1, 4):02d}T10:00:00+00:00"
            rid = f"r{rng.randint(0, 10**6):07d}-{serial:04d}"
            common = dict(created_at=created, id=rid)
            if kind is StoreType.EPI:
                title, summary = text(1, 2), text()
                rec = EpisodicRecord(owner, title, summary, anchor, embed_ref(f"{title} — {summary}", d), **common)
            elif kind is StoreType.SEM:
                fact = text()
                # Occasionally shadow an episodic text exactly to exercise cross-store dedup.
                epis = [r for r in out if r.store_type is StoreType.EPI]
                if epis and rng.random() < 0.1:
                    fact = epis[-1].text.upper()
                rec = SemanticRecord(owner, fact, anchor, embed_ref(fact, d), **common)
            else:
                title = text(1, 2)
                steps = tuple(text(1, 2) for _ in range(rng.randint(1, 3)))
                content = steps if rng.random() < 0.5 else " ".join(steps)
                flat = content if isinstance(content, str) else "; ".join(content)
                rec = ProceduralRecord(owner, title, content, anchor, embed_ref(f"{title}: {flat}", d), **common)
            out.append(rec)
    return out


def bleu_ref(pred: list[str], ref: list[str], max_n: int) -> Fraction | float:
    """Add-one smoothed BLEU with brevity penalty exp(1 - r/c), as an exact log-free product where possible."""
    if not pred:
        return 0.0
    logs = 0.0
    for n in range(1, max_n + 1):
        pn = [tuple(pred[i : i + n]) for i in range(len(pred) - n + 1)]
        rn = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
        matched = 0
        pool = list(rn)
        for g in pn:
            if g in pool:
                pool.remove(g)
                matched += 1
        logs += math.log(Fraction(matched + 1, len(pn) + 1))
    c, r = len(pred), len(ref)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(logs / max_n)
