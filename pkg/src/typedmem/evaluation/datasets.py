"""Loaders for LoCoMo- and LongMemEval-format JSON files.

Field names follow the public releases:

* LoCoMo: a list of samples, each with ``sample_id``, ``conversation`` (holding
  ``speaker_a``, ``speaker_b``, ``session_<n>`` turn lists of ``{speaker, dia_id,
  text}`` and ``session_<n>_date_time`` strings such as "1:56 pm on 8 May, 2023")
  and ``qa`` (``question``, ``answer`` or ``adversarial_answer``, ``evidence``,
  numeric ``category``).
* LongMemEval: a list of questions with ``question_id`` (suffix ``_abs`` marks
  abstention), ``question_type``, ``question``, ``answer``, ``question_date``,
  ``haystack_dates`` and ``haystack_sessions`` (lists of ``{role, content}``).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

from ..core import Turn
from ..errors import ParseError, TemporalError, UnknownCategory, ValidationError
from ..temporal import parse_datetime_loose

logger = logging.getLogger(__name__)


@lru_cache(maxsize=1)
def category_table() -> dict[str, Any]:
    text = resources.files("typedmem").joinpath("data/categories.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class QAItem:
    id: str
    question: str
    gold_answers: tuple[str, ...]
    category: str
    question_date: str | None = None
    abstention: bool = False
    evidence: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold_answers", tuple(self.gold_answers))
        object.__setattr__(self, "evidence", tuple(self.evidence))
        if not self.question.strip():
            raise ValidationError(f"{self.id}: empty question", "question")
        if not self.gold_answers and not self.abstention and self.category != "adversarial":
            raise ValidationError(f"{self.id}: at least one gold answer required", "gold_answers")


@dataclass(frozen=True)
class Sample:
    """One isolated conversation: its own store, speakers, turns, and questions."""

    sample_id: str
    speakers: tuple[str, ...]
    turns: tuple[Turn, ...]
    qa: tuple[QAItem, ...]
    excluded_categories: frozenset[str] = field(default_factory=frozenset)


def _read_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read dataset: {exc}", path=str(path)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at char {exc.pos}: {exc.msg}", line=exc.lineno, path=str(path)) from exc


def _iso(value: str, where: str, path: str | Path) -> str:
    try:
        return parse_datetime_loose(value).replace(tzinfo=None).isoformat()
    except (TemporalError, ValidationError) as exc:
        raise ParseError(f"{where}: bad date-time {value!r}", path=str(path)) from exc


def _require(obj: Any, key: str, where: str, path: str | Path) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field {key!r}", path=str(path))
    return obj[key]


def _as_text(value: Any) -> str:
    return value if isinstance(value, str) else str(value)


_SESSION_KEY = re.compile(r"^session_(\d+)$")


def load_locomo(path: str | Path) -> list[Sample]:
    data = _read_json(path)
    if not isinstance(data, list):
        raise ParseError("top level must be a list of samples", path=str(path))
    codes = category_table()["locomo"]
    excluded = frozenset(category_table()["locomo_excluded"])
    samples = []
    for index, raw in enumerate(data):
        where = f"sample[{index}]"
        sid = str(raw.get("sample_id", index)) if isinstance(raw, dict) else str(index)
        conv = _require(raw, "conversation", where, path)
        qa_raw = _require(raw, "qa", where, path)
        speakers = (str(_require(conv, "speaker_a", where, path)), str(_require(conv, "speaker_b", where, path)))
        sessions = sorted(
            (int(m.group(1)), key) for key in conv if (m := _SESSION_KEY.match(key)) and isinstance(conv[key], list)
        )
        turns: list[Turn] = []
        for number, key in sessions:
            stamp = _iso(_require(conv, f"{key}_date_time", where, path), f"{where}.{key}", path)
            for t_index, t in enumerate(conv[key]):
                twhere = f"{where}.{key}[{t_index}]"
                try:
                    turns.append(Turn(str(_require(t, "speaker", twhere, path)), str(_require(t, "text", twhere, path)), stamp))
                except ValidationError as exc:
                    raise ParseError(f"{twhere}: {exc}", path=str(path)) from exc
        if not isinstance(qa_raw, list):
            raise ParseError(f"{where}.qa must be a list", path=str(path))
        items = []
        for q_index, q in enumerate(qa_raw):
            qwhere = f"{where}.qa[{q_index}]"
            code = str(_require(q, "category", qwhere, path))
            if code not in codes:
                raise UnknownCategory(f"{path}: {qwhere}: category code {code!r} has no mapping")
            category = codes[code]
            gold = q.get("answer", q.get("adversarial_answer"))
            golds = () if gold is None else (_as_text(gold),)
            items.append(
                QAItem(
                    id=f"{sid}:{q_index}",
                    question=str(_require(q, "question", qwhere, path)),
                    gold_answers=golds,
                    category=category,
                    evidence=tuple(str(e) for e in q.get("evidence", [])),
                )
            )
        samples.append(Sample(sid, speakers, tuple(turns), tuple(items), excluded))
    logger.info(
        "loaded %d LoCoMo samples, %d turns, %d questions",
        len(samples), sum(len(s.turns) for s in samples), sum(len(s.qa) for s in samples),
    )
    return samples


LONGMEMEVAL_SPEAKERS = ("user", "assistant")


def load_longmemeval(path: str | Path) -> list[Sample]:
    """Each question becomes its own sample: its haystack is its isolated history."""
    data = _read_json(path)
    if not isinstance(data, list):
        raise ParseError("top level must be a list of questions", path=str(path))
    known = set(category_table()["longmemeval"])
    excluded = frozenset(category_table()["longmemeval_excluded"])
    samples = []
    for index, raw in enumerate(data):
        where = f"item[{index}]"
        qid = str(_require(raw, "question_id", where, path))
        qtype = str(_require(raw, "question_type", where, path))
        if qtype not in known:
            raise UnknownCategory(f"{path}: {where}: question_type {qtype!r} has no mapping")
        dates = _require(raw, "haystack_dates", where, path)
        sessions = _require(raw, "haystack_sessions", where, path)
        if not isinstance(sessions, list) or not isinstance(dates, list) or len(dates) != len(sessions):
            raise ParseError(f"{where}: haystack_dates and haystack_sessions must be equal-length lists", path=str(path))
        turns = []
        for s_index, (date, session) in enumerate(zip(dates, sessions)):
            stamp = _iso(date, f"{where}.haystack_dates[{s_index}]", path)
            for t_index, t in enumerate(session):
                twhere = f"{where}.haystack_sessions[{s_index}][{t_index}]"
                role = str(_require(t, "role", twhere, path))
                content = str(_require(t, "content", twhere, path))
                if not content.strip():
                    continue
                turns.append(Turn(role, content, stamp))
        abstention = qid.endswith("_abs")
        answer = raw.get("answer")
        item = QAItem(
            id=qid,
            question=str(_require(raw, "question", where, path)),
            gold_answers=() if answer is None else (_as_text(answer),),
            category=qtype,
            question_date=_iso(_require(raw, "question_date", where, path), f"{where}.question_date", path),
            abstention=abstention,
        )
        samples.append(Sample(qid, LONGMEMEVAL_SPEAKERS, tuple(turns), (item,), excluded))
    logger.info("loaded %d LongMemEval questions, %d turns", len(samples), sum(len(s.turns) for s in samples))
    return samples


def load_dataset(path: str | Path, kind: str | None = None) -> list[Sample]:
    """Dispatch on ``kind`` ("locomo"/"longmemeval") or sniff the first record."""
    if kind is None:
        data = _read_json(path)
        first = data[0] if isinstance(data, list) and data else {}
        kind = "longmemeval" if isinstance(first, dict) and "haystack_sessions" in first else "locomo"
    if kind == "locomo":
        return load_locomo(path)
    if kind == "longmemeval":
        return load_longmemeval(path)
    raise ValidationError(f"unknown dataset kind {kind!r}", "kind")
