"""Single-file SQLite persistence for typed records and their embeddings."""

from __future__ import annotations

import json
import os
import sqlite3
import threading
import uuid
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Iterator

from .core import (
    Embedding,
    EpisodicRecord,
    MemoryRecord,
    MemoryState,
    ProceduralRecord,
    SemanticRecord,
    StoreType,
    TemporalAnchor,
    record_from_dict,
    record_to_dict,
    to_epoch,
)
from .errors import DimensionError, DuplicateId, ParseError, SchemaMismatch, StoreError, ValidationError

SCHEMA_VERSION = "1"

_COMMON_HEAD = "id TEXT PRIMARY KEY, owner_id TEXT NOT NULL"
_COMMON_TAIL = (
    "anchor TEXT NOT NULL, embedding BLOB NOT NULL, created_at TEXT NOT NULL, "
    "created_epoch REAL NOT NULL, source_turn INTEGER NOT NULL"
)
_PAYLOAD = {
    StoreType.EPI: ("title", "summary"),
    StoreType.SEM: ("fact",),
    StoreType.PRO: ("title", "content"),
}
_SCHEMA = [
    "CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL)",
    *(
        f"CREATE TABLE IF NOT EXISTS {kind.table} ({_COMMON_HEAD}, "
        + ", ".join(f"{col} TEXT NOT NULL" for col in cols)
        + f", {_COMMON_TAIL})"
        for kind, cols in _PAYLOAD.items()
    ),
    *(
        f"CREATE INDEX IF NOT EXISTS {kind.table}_owner ON {kind.table} (owner_id, created_epoch, id)"
        for kind in StoreType
    ),
]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


class StoreHandle:
    """An open store file.

    Writes go through one lock-guarded connection; each reading thread gets its
    own connection so retrievals can run concurrently.
    """

    def __init__(self, path: str | os.PathLike[str], dimension: int, *, test_mode: bool = False):
        self.path = Path(path)
        self.dimension = dimension
        self.test_mode = test_mode
        self.opened_at = _now()
        self._write_lock = threading.RLock()
        self._local = threading.local()
        self._all: list[sqlite3.Connection] = []
        self._all_lock = threading.Lock()
        self._closed = False
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._writer = self._connect()
        except (OSError, sqlite3.Error) as exc:
            raise StoreError(f"cannot open store {self.path}: {exc}") from exc
        self._init_schema()

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, check_same_thread=False, timeout=30.0, isolation_level=None)
        conn.execute("PRAGMA journal_mode=WAL")
        conn.execute("PRAGMA synchronous=FULL")
        with self._all_lock:
            self._all.append(conn)
        return conn

    def _reader(self) -> sqlite3.Connection:
        if self._closed:
            raise StoreError("store is closed")
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = self._connect()
            self._local.conn = conn
        return conn

    def _init_schema(self) -> None:
        with self._write_lock:
            try:
                self._writer.execute("BEGIN IMMEDIATE")
                for stmt in _SCHEMA:
                    self._writer.execute(stmt)
                row = self._writer.execute("SELECT value FROM meta WHERE key='dimension'").fetchone()
                if row is None:
                    self._writer.executemany(
                        "INSERT INTO meta (key, value) VALUES (?, ?)",
                        [("dimension", str(self.dimension)), ("schema_version", SCHEMA_VERSION)],
                    )
                self._writer.execute("COMMIT")
            except sqlite3.Error as exc:
                self._writer.execute("ROLLBACK") if self._writer.in_transaction else None
                raise StoreError(f"cannot initialise schema in {self.path}: {exc}") from exc
        if row is not None and int(row[0]) != self.dimension:
            self.close()
            raise SchemaMismatch(f"{self.path} has dimension {row[0]}, requested {self.dimension}")

    # -- writes ---------------------------------------------------------

    def _next_id(self, kind: StoreType) -> str:
        if not self.test_mode:
            return str(uuid.uuid4())
        (n,) = self._writer.execute(f"SELECT COUNT(*) FROM {kind.table}").fetchone()
        while True:
            n += 1
            candidate = f"{kind.value}-{n:06d}"
            if not self._id_exists(candidate):
                return candidate

    def _id_exists(self, record_id: str) -> bool:
        for kind in StoreType:
            if self._writer.execute(f"SELECT 1 FROM {kind.table} WHERE id=?", (record_id,)).fetchone():
                return True
        return False

    def write(self, record: MemoryRecord) -> str:
        """Persist ``record``; assigns id/created_at when absent. Durable on return."""
        if record.embedding is None:
            raise ValidationError("record has no embedding", "embedding")
        if record.embedding.d != self.dimension:
            raise DimensionError(f"embedding d={record.embedding.d}, store d={self.dimension}")
        kind = record.store_type
        with self._write_lock:
            if self._closed:
                raise StoreError("store is closed")
            try:
                self._writer.execute("BEGIN IMMEDIATE")
                if record.id is None:
                    record = replace(record, id=self._next_id(kind))
                elif self._id_exists(record.id):
                    raise DuplicateId(f"record id {record.id!r} already stored")
                if record.created_at is None:
                    record = replace(record, created_at=_now())
                payload = record.payload()
                if kind is StoreType.PRO:
                    payload["content"] = json.dumps(payload["content"], ensure_ascii=False)
                cols = ["id", "owner_id", *payload, "anchor", "embedding", "created_at", "created_epoch", "source_turn"]
                values = [
                    record.id,
                    record.owner_id,
                    *payload.values(),
                    json.dumps(record.anchor.to_dict(), separators=(",", ":")),
                    record.embedding.to_bytes(),
                    record.created_at,
                    to_epoch(record.created_at),
                    record.source_turn,
                ]
                self._writer.execute(
                    f"INSERT INTO {kind.table} ({', '.join(cols)}) VALUES ({', '.join('?' * len(cols))})", values
                )
                self._writer.execute("COMMIT")
            except DuplicateId:
                self._writer.execute("ROLLBACK")
                raise
            except sqlite3.Error as exc:
                if self._writer.in_transaction:
                    self._writer.execute("ROLLBACK")
                raise StoreError(f"write failed: {exc}") from exc
        return record.id

    # -- reads ----------------------------------------------------------

    def _row_to_record(self, kind: StoreType, row: sqlite3.Row | tuple) -> MemoryRecord:
        cols = _PAYLOAD[kind]
        rid, owner = row[0], row[1]
        payload = dict(zip(cols, row[2 : 2 + len(cols)]))
        anchor_json, blob, created_at, _epoch, source_turn = row[2 + len(cols) :]
        anchor = TemporalAnchor.from_dict(json.loads(anchor_json))
        embedding = Embedding.from_bytes(blob)
        common = dict(anchor=anchor, embedding=embedding, created_at=created_at, source_turn=source_turn, id=rid)
        if kind is StoreType.EPI:
            return EpisodicRecord(owner, payload["title"], payload["summary"], **common)
        if kind is StoreType.SEM:
            return SemanticRecord(owner, payload["fact"], **common)
        content = json.loads(payload["content"])
        return ProceduralRecord(owner, payload["title"], tuple(content) if isinstance(content, list) else content, **common)

    def list(self, store_type: StoreType | str, owner_id: str | None = None) -> list[MemoryRecord]:
        """All records of one type (optionally one owner) in (created_at, id) order."""
        kind = StoreType(store_type)
        sql = f"SELECT * FROM {kind.table}"
        args: tuple[Any, ...] = ()
        if owner_id is not None:
            sql += " WHERE owner_id=?"
            args = (owner_id,)
        sql += " ORDER BY created_epoch, id"
        try:
            rows = self._reader().execute(sql, args).fetchall()
        except sqlite3.Error as exc:
            raise StoreError(f"read failed: {exc}") from exc
        return [self._row_to_record(kind, row) for row in rows]

    def state(self, owner_id: str | None = None) -> MemoryState:
        return MemoryState(
            tuple(self.list(StoreType.EPI, owner_id)),
            tuple(self.list(StoreType.SEM, owner_id)),
            tuple(self.list(StoreType.PRO, owner_id)),
        )

    def counts(self, owner_id: str | None = None) -> dict[str, int]:
        out = {}
        for kind in StoreType:
            sql = f"SELECT COUNT(*) FROM {kind.table}" + (" WHERE owner_id=?" if owner_id else "")
            (n,) = self._reader().execute(sql, (owner_id,) if owner_id else ()).fetchone()
            out[kind.value] = n
        return out

    def owners(self) -> list[str]:
        sql = " UNION ".join(f"SELECT owner_id FROM {kind.table}" for kind in StoreType)
        return sorted(row[0] for row in self._reader().execute(sql).fetchall())

    # -- interchange ----------------------------------------------------

    def iter_jsonl(self) -> Iterator[str]:
        for kind in StoreType:
            for record in self.list(kind):
                obj = {"store_type": kind.value, **record_to_dict(record)}
                yield json.dumps(obj, ensure_ascii=False, separators=(",", ":"))

    def export_jsonl(self, path: str | os.PathLike[str]) -> int:
        lines = list(self.iter_jsonl())
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                for line in lines:
                    fh.write(line + "\n")
        except OSError as exc:
            raise StoreError(f"cannot write {path}: {exc}") from exc
        return len(lines)

    def close(self) -> None:
        with self._all_lock:
            conns, self._all = self._all, []
        self._closed = True
        for conn in conns:
            try:
                conn.close()
            except sqlite3.Error:
                pass

    def __enter__(self) -> StoreHandle:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def open_store(path: str | os.PathLike[str], dimension: int, *, test_mode: bool = False) -> StoreHandle:
    return StoreHandle(path, dimension, test_mode=test_mode)


def write_record(h: StoreHandle, record: MemoryRecord) -> str:
    return h.write(record)


def list_records(h: StoreHandle, store_type: StoreType | str, owner_id: str | None = None) -> list[MemoryRecord]:
    return h.list(store_type, owner_id)


def export_jsonl(h: StoreHandle, path: str | os.PathLike[str]) -> int:
    return h.export_jsonl(path)


def read_jsonl(path: str | os.PathLike[str]) -> Iterable[MemoryRecord]:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise StoreError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                kind = obj.pop("store_type")
                yield record_from_dict(kind, obj)
            except (ValueError, KeyError, TypeError, ValidationError) as exc:
                raise ParseError(str(exc), line=lineno, path=str(path)) from exc


def import_jsonl(
    path: str | os.PathLike[str],
    store_path: str | os.PathLike[str],
    dimension: int | None = None,
    *,
    test_mode: bool = False,
) -> StoreHandle:
    """Load a JSONL export into a (new or existing) store file."""
    records = list(read_jsonl(path))
    if dimension is None:
        if not records:
            raise ParseError("cannot infer dimension from an empty export; pass dimension", path=str(path))
        dimension = records[0].embedding.d
    handle = open_store(store_path, dimension, test_mode=test_mode)
    for record in records:
        handle.write(record)
    return handle
