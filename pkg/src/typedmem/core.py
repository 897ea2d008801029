"""Domain types: turns, route masks, temporal anchors, typed records, evidence."""

from __future__ import annotations

import calendar
import enum
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from functools import cached_property
from typing import Any, Iterable, Union

import numpy as np

from .errors import ValidationError

MONTH_NAMES = tuple(calendar.month_name)[1:]


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 string. Naive values are interpreted as UTC."""
    if not isinstance(value, str) or not value.strip():
        raise ValidationError(f"timestamp must be a non-empty ISO-8601 string, got {value!r}", "timestamp")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"unparseable timestamp {value!r}", "timestamp") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def to_epoch(value: str) -> float:
    return parse_timestamp(value).timestamp()


@dataclass(frozen=True)
class Turn:
    speaker_id: str
    text: str
    timestamp: str

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValidationError("turn text must be non-empty", "text")
        if not isinstance(self.speaker_id, str) or not self.speaker_id:
            raise ValidationError("speaker_id must be non-empty", "speaker_id")
        parse_timestamp(self.timestamp)

    @property
    def instant(self) -> datetime:
        return parse_timestamp(self.timestamp)

    @property
    def epoch(self) -> float:
        return self.instant.timestamp()

    def to_dict(self) -> dict[str, Any]:
        return {"speaker_id": self.speaker_id, "text": self.text, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Turn:
        return cls(data["speaker_id"], data["text"], data["timestamp"])


@dataclass(frozen=True)
class RouteMask:
    epi: bool = False
    sem: bool = False
    pro: bool = False

    def to_int(self) -> int:
        return int(self.epi) | int(self.sem) << 1 | int(self.pro) << 2

    @classmethod
    def from_int(cls, value: int) -> RouteMask:
        if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value <= 7:
            raise ValidationError(f"route mask must be an integer in 0..7, got {value!r}", "mask")
        return cls(bool(value & 1), bool(value & 2), bool(value & 4))

    @property
    def stores(self) -> tuple[StoreType, ...]:
        flags = ((StoreType.EPI, self.epi), (StoreType.SEM, self.sem), (StoreType.PRO, self.pro))
        return tuple(kind for kind, on in flags if on)

    def __bool__(self) -> bool:
        return self.to_int() != 0

    def to_dict(self) -> dict[str, bool]:
        return {"epi": self.epi, "sem": self.sem, "pro": self.pro}


def mask_to_int(mask: RouteMask) -> int:
    return mask.to_int()


def mask_from_int(value: int) -> RouteMask:
    return RouteMask.from_int(value)


class Precision(str, enum.Enum):
    YEAR = "year"
    MONTH = "month"
    DAY = "day"
    MINUTE = "minute"


@dataclass(frozen=True)
class TemporalAnchor:
    """A point in time known to a given precision.

    ``time`` is minutes since midnight and is only meaningful at minute
    precision.
    """

    year: int
    month: int | None = None
    day: int | None = None
    time: int | None = None
    precision: Precision = Precision.YEAR

    def __post_init__(self) -> None:
        object.__setattr__(self, "precision", Precision(self.precision))
        if not 1 <= self.year <= 9999:
            raise ValidationError(f"year out of range: {self.year}", "year")
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValidationError(f"month out of range: {self.month}", "month")
        if self.day is not None:
            if self.month is None:
                raise ValidationError("day requires month", "day")
            if not 1 <= self.day <= calendar.monthrange(self.year, self.month)[1]:
                raise ValidationError(f"day out of range: {self.day}", "day")
        if self.time is not None:
            if self.day is None:
                raise ValidationError("time requires day", "time")
            if not 0 <= self.time < 24 * 60:
                raise ValidationError(f"time out of range: {self.time}", "time")
        expected = (
            Precision.MINUTE if self.time is not None
            else Precision.DAY if self.day is not None
            else Precision.MONTH if self.month is not None
            else Precision.YEAR
        )
        if self.precision is not expected:
            raise ValidationError(
                f"precision {self.precision.value!r} does not match populated fields ({expected.value!r})",
                "precision",
            )

    @classmethod
    def of_year(cls, year: int) -> TemporalAnchor:
        return cls(year, precision=Precision.YEAR)

    @classmethod
    def of_month(cls, year: int, month: int) -> TemporalAnchor:
        return cls(year, month, precision=Precision.MONTH)

    @classmethod
    def of_date(cls, d: date) -> TemporalAnchor:
        return cls(d.year, d.month, d.day, precision=Precision.DAY)

    @classmethod
    def of_datetime(cls, dt: datetime) -> TemporalAnchor:
        return cls(dt.year, dt.month, dt.day, dt.hour * 60 + dt.minute, precision=Precision.MINUTE)

    def render(self) -> str:
        if self.precision is Precision.YEAR:
            return f"{self.year:04d}"
        if self.precision is Precision.MONTH:
            return f"{MONTH_NAMES[self.month - 1]} {self.year:04d}"
        iso = f"{self.year:04d}-{self.month:02d}-{self.day:02d}"
        if self.precision is Precision.DAY:
            return iso
        return f"{iso}T{self.time // 60:02d}:{self.time % 60:02d}"

    def render_iso(self) -> str:
        """ISO-8601 truncated to the anchor's precision ("2023", "2023-03", ...)."""
        if self.precision is Precision.MONTH:
            return f"{self.year:04d}-{self.month:02d}"
        return self.render()

    def to_dict(self) -> dict[str, Any]:
        return {
            "year": self.year,
            "month": self.month,
            "day": self.day,
            "time": self.time,
            "precision": self.precision.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TemporalAnchor:
        return cls(data["year"], data.get("month"), data.get("day"), data.get("time"), Precision(data["precision"]))


def render_anchor(anchor: TemporalAnchor) -> str:
    return anchor.render()


@dataclass(frozen=True)
class Embedding:
    """Dense float32 vector. Values are rounded to float32 on construction."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("embedding must be a non-empty vector", "embedding")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("embedding components must be finite", "embedding")
        object.__setattr__(self, "values", tuple(float(x) for x in arr))

    @classmethod
    def from_array(cls, arr: Any) -> Embedding:
        return cls(tuple(np.asarray(arr, dtype=np.float32).ravel().tolist()))

    @classmethod
    def from_bytes(cls, blob: bytes) -> Embedding:
        return cls(tuple(np.frombuffer(blob, dtype="<f4").tolist()))

    @property
    def d(self) -> int:
        return len(self.values)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.asarray(self.values, dtype=np.float32)
        arr.setflags(write=False)
        return arr

    def to_bytes(self) -> bytes:
        return self.array.astype("<f4").tobytes()

    def to_list(self) -> list[float]:
        # str(np.float32) is the shortest string that round-trips the float32 value.
        return [float(str(x)) for x in self.array]


class StoreType(str, enum.Enum):
    EPI = "epi"
    SEM = "sem"
    PRO = "pro"

    @property
    def table(self) -> str:
        return {"epi": "episodic", "sem": "semantic", "pro": "procedural"}[self.value]


def _check_text(value: Any, name: str) -> None:
    if not isinstance(value, str) or not value.strip():
        raise ValidationError(f"{name} must be a non-empty string", name)


def _check_common(record: Any) -> None:
    if record.id is not None and (not isinstance(record.id, str) or not record.id):
        raise ValidationError("id must be a non-empty string", "id")
    _check_text(record.owner_id, "owner_id")
    if not isinstance(record.anchor, TemporalAnchor):
        raise ValidationError("anchor must be a TemporalAnchor", "anchor")
    if record.embedding is not None and not isinstance(record.embedding, Embedding):
        raise ValidationError("embedding must be an Embedding", "embedding")
    if record.created_at is not None:
        parse_timestamp(record.created_at)
    if not isinstance(record.source_turn, int) or record.source_turn < 0:
        raise ValidationError("source_turn must be a non-negative integer", "source_turn")


@dataclass(frozen=True)
class EpisodicRecord:
    owner_id: str
    title: str
    summary: str
    anchor: TemporalAnchor
    embedding: Embedding | None = None
    created_at: str | None = None
    source_turn: int = 0
    id: str | None = None

    store_type = StoreType.EPI

    def __post_init__(self) -> None:
        _check_text(self.title, "title")
        _check_text(self.summary, "summary")
        _check_common(self)

    @property
    def text(self) -> str:
        return f"{self.title} — {self.summary}"

    def payload(self) -> dict[str, Any]:
        return {"title": self.title, "summary": self.summary}


@dataclass(frozen=True)
class SemanticRecord:
    owner_id: str
    fact: str
    anchor: TemporalAnchor
    embedding: Embedding | None = None
    created_at: str | None = None
    source_turn: int = 0
    id: str | None = None

    store_type = StoreType.SEM

    def __post_init__(self) -> None:
        _check_text(self.fact, "fact")
        if "\n" in self.fact:
            raise ValidationError("fact must be a single line", "fact")
        _check_common(self)

    @property
    def text(self) -> str:
        return self.fact

    def payload(self) -> dict[str, Any]:
        return {"fact": self.fact}


@dataclass(frozen=True)
class ProceduralRecord:
    owner_id: str
    title: str
    content: Union[str, tuple[str, ...]]
    anchor: TemporalAnchor
    embedding: Embedding | None = None
    created_at: str | None = None
    source_turn: int = 0
    id: str | None = None

    store_type = StoreType.PRO

    def __post_init__(self) -> None:
        _check_text(self.title, "title")
        if isinstance(self.content, list):
            object.__setattr__(self, "content", tuple(self.content))
        if isinstance(self.content, tuple):
            if not self.content:
                raise ValidationError("step list must not be empty", "content")
            for step in self.content:
                _check_text(step, "content")
        else:
            _check_text(self.content, "content")
        _check_common(self)

    @property
    def flat_content(self) -> str:
        if isinstance(self.content, tuple):
            return "; ".join(self.content)
        return self.content

    @property
    def text(self) -> str:
        return f"{self.title}: {self.flat_content}"

    def payload(self) -> dict[str, Any]:
        content = list(self.content) if isinstance(self.content, tuple) else self.content
        return {"title": self.title, "content": content}


MemoryRecord = Union[EpisodicRecord, SemanticRecord, ProceduralRecord]
RECORD_TYPES: dict[StoreType, type] = {
    StoreType.EPI: EpisodicRecord,
    StoreType.SEM: SemanticRecord,
    StoreType.PRO: ProceduralRecord,
}


def record_text(record: MemoryRecord) -> str:
    return record.text


def record_to_dict(record: MemoryRecord) -> dict[str, Any]:
    """Canonical field order: id, owner_id, type payload, anchor, embedding, created_at, source_turn."""
    out: dict[str, Any] = {"id": record.id, "owner_id": record.owner_id}
    out.update(record.payload())
    out["anchor"] = record.anchor.to_dict()
    out["embedding"] = record.embedding.to_list() if record.embedding is not None else None
    out["created_at"] = record.created_at
    out["source_turn"] = record.source_turn
    return out


def record_from_dict(store_type: StoreType | str, data: dict[str, Any]) -> MemoryRecord:
    kind = StoreType(store_type)
    emb = data.get("embedding")
    common = dict(
        owner_id=data["owner_id"],
        anchor=TemporalAnchor.from_dict(data["anchor"]),
        embedding=Embedding(tuple(emb)) if emb is not None else None,
        created_at=data.get("created_at"),
        source_turn=data.get("source_turn", 0),
        id=data.get("id"),
    )
    if kind is StoreType.EPI:
        return EpisodicRecord(title=data["title"], summary=data["summary"], **common)
    if kind is StoreType.SEM:
        return SemanticRecord(fact=data["fact"], **common)
    content = data["content"]
    return ProceduralRecord(title=data["title"], content=tuple(content) if isinstance(content, list) else content, **common)


def order_key(record: MemoryRecord) -> tuple[float, str]:
    """Total order over stored records: (created_at, id)."""
    return (to_epoch(record.created_at) if record.created_at else -math.inf, record.id or "")


@dataclass(frozen=True)
class MemoryState:
    epi: tuple[EpisodicRecord, ...] = ()
    sem: tuple[SemanticRecord, ...] = ()
    pro: tuple[ProceduralRecord, ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name in ("epi", "sem", "pro"):
            records = tuple(sorted(getattr(self, name), key=order_key))
            object.__setattr__(self, name, records)
            for rec in records:
                if rec.id is None:
                    continue
                if rec.id in seen:
                    raise ValidationError(f"duplicate record id {rec.id!r}", "id")
                seen.add(rec.id)

    def of(self, kind: StoreType) -> tuple[MemoryRecord, ...]:
        return getattr(self, StoreType(kind).value)

    def for_owner(self, owner_id: str) -> MemoryState:
        return MemoryState(
            tuple(r for r in self.epi if r.owner_id == owner_id),
            tuple(r for r in self.sem if r.owner_id == owner_id),
            tuple(r for r in self.pro if r.owner_id == owner_id),
        )

    def __len__(self) -> int:
        return len(self.epi) + len(self.sem) + len(self.pro)


@dataclass(frozen=True)
class ScoredHit:
    store: StoreType
    record_id: str
    owner_id: str
    score: float
    record: MemoryRecord | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "store", StoreType(self.store))
        if not -1.0 <= self.score <= 1.0:
            raise ValidationError(f"score out of [-1, 1]: {self.score}", "score")

    def to_dict(self) -> dict[str, Any]:
        return {"store": self.store.value, "record_id": self.record_id, "owner_id": self.owner_id, "score": self.score}


@dataclass(frozen=True)
class EvidenceSet:
    hits: tuple[ScoredHit, ...]
    budget: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "hits", tuple(self.hits))
        if self.budget < 1:
            raise ValidationError("budget must be >= 1", "budget")
        if len(self.hits) > self.budget:
            raise ValidationError(f"{len(self.hits)} hits exceed budget {self.budget}", "hits")
        for a, b in zip(self.hits, self.hits[1:]):
            if b.score > a.score:
                raise ValidationError("hit scores must be non-increasing", "hits")

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)

    @property
    def records(self) -> list[MemoryRecord]:
        return [h.record for h in self.hits if h.record is not None]

    def to_dict(self) -> dict[str, Any]:
        return {"hits": [h.to_dict() for h in self.hits], "budget": self.budget}


def sorted_records(records: Iterable[MemoryRecord]) -> list[MemoryRecord]:
    return sorted(records, key=order_key)

