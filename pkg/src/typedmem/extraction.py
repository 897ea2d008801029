"""Turn -> typed record extraction (LLM prompts or deterministic templates)."""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass
from typing import Any

from . import prompts
from .core import (
    EpisodicRecord,
    ProceduralRecord,
    SemanticRecord,
    TemporalAnchor,
    Turn,
    parse_timestamp,
)
from .errors import ParseError, ProviderError, TemporalError, ValidationError
from .providers import CompletionProvider, extract_json_object
from .temporal import PhraseMatch, find_temporal_phrases, resolve_relative_time

logger = logging.getLogger(__name__)


class ExtractorMode(str, enum.Enum):
    LLM = "llm"
    TEMPLATE = "template"


@dataclass(frozen=True)
class ExtractorConfig:
    mode: ExtractorMode = ExtractorMode.TEMPLATE
    conversation_timestamp: str = "1970-01-01T00:00:00"
    # When False, an unresolvable model timestamp raises TemporalError instead
    # of falling back to the conversation date.
    fallback_to_reference: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", ExtractorMode(self.mode))
        parse_timestamp(self.conversation_timestamp)

    def for_turn(self, turn: Turn) -> ExtractorConfig:
        return ExtractorConfig(self.mode, turn.timestamp, self.fallback_to_reference)


STOPWORDS = frozenset(
    "a an the i i'm i've i'd i'll me my mine myself we our us you your it its this that these those "
    "to of and or but so in on at with for from by as is are was were be been am do did does "
    "just really very have has had".split()
)
_WORD = re.compile(r"[\w][\w'’-]*")
_SENTENCE_BREAK = re.compile(r"(?<=[a-z0-9]{2})[.!?]+\s+(?=[A-Z])")


def _one_line(text: str) -> str:
    return " ".join(text.split())


def _one_sentence(text: str) -> str:
    return _SENTENCE_BREAK.sub("; ", _one_line(text))


def content_title(text: str, limit: int = 8) -> str:
    """First ``limit`` non-stopword words of ``text`` (all words if none qualify)."""
    words = [w.strip("'’-") for w in _WORD.findall(text)]
    words = [w for w in words if w]
    content = [w for w in words if w.lower() not in STOPWORDS]
    return " ".join((content or words)[:limit])


def _phrase_replacement(match: PhraseMatch) -> str:
    rendered = match.anchor.render()
    if not match.relative:
        return rendered
    return ("on " if match.anchor.day is not None else "in ") + rendered


def absolutize(text: str, reference: str) -> tuple[str, TemporalAnchor | None]:
    """Replace temporal phrases with absolute forms; return (text, first anchor)."""
    matches = find_temporal_phrases(text, reference)
    if not matches:
        return text, None
    out, cursor = [], 0
    for m in matches:
        out.append(text[cursor : m.start])
        out.append(_phrase_replacement(m))
        cursor = m.end
    out.append(text[cursor:])
    return "".join(out), matches[0].anchor


def _reference_anchor(cfg: ExtractorConfig) -> TemporalAnchor:
    return TemporalAnchor.of_date(parse_timestamp(cfg.conversation_timestamp).date())


def _require_str(data: dict[str, Any], key: str) -> str:
    value = data.get(key)
    if not isinstance(value, str) or not value.strip():
        raise ParseError(f"model output missing non-empty string {key!r}")
    return value.strip()


def _ask(provider: CompletionProvider | None, prompt: str) -> dict[str, Any]:
    if provider is None:
        raise ProviderError("llm extraction requires a completion provider")
    return extract_json_object(provider.complete(prompt))


def episodic_prompt(turn: Turn, cfg: ExtractorConfig) -> str:
    return prompts.render(prompts.load_template("episodic"), message=turn.text, timestamp=cfg.conversation_timestamp)


def extract_episodic(
    turn: Turn,
    cfg: ExtractorConfig,
    provider: CompletionProvider | None = None,
    source_turn: int = 0,
) -> EpisodicRecord:
    if cfg.mode is ExtractorMode.LLM:
        data = _ask(provider, episodic_prompt(turn, cfg))
        title = _one_line(_require_str(data, "title"))
        summary = _one_line(_require_str(data, "summary"))
        stamp = _require_str(data, "timestamp")
        try:
            anchor = resolve_relative_time(stamp, cfg.conversation_timestamp)
        except TemporalError:
            if not cfg.fallback_to_reference:
                raise
            logger.warning("unresolvable event timestamp %r; using conversation date", stamp)
            anchor = _reference_anchor(cfg)
    else:
        body, anchor = absolutize(_one_line(turn.text), cfg.conversation_timestamp)
        anchor = anchor or _reference_anchor(cfg)
        title = content_title(body)
        summary = f"Speaker {turn.speaker_id} reported: {body}"
    return EpisodicRecord(turn.speaker_id, title, summary, anchor, source_turn=source_turn)


# Third-person rewrite of first-person statements for template facts.
_AGREE = {
    "have": "has", "do": "does", "go": "goes", "watch": "watches", "teach": "teaches",
    "study": "studies", "love": "loves", "like": "likes", "hate": "hates", "prefer": "prefers",
    "enjoy": "enjoys", "want": "wants", "need": "needs", "work": "works", "live": "lives",
    "own": "owns", "play": "plays", "think": "thinks", "believe": "believes", "know": "knows",
    "collect": "collects", "dislike": "dislikes", "use": "uses", "volunteer": "volunteers",
}
_FIRST_PERSON = re.compile(r"\b(?:I|I'm|I've|I'd|I'll|[Mm]y|[Mm]e|[Mm]ine|[Mm]yself)\b")
FIRST_PERSON_TOKENS = frozenset({"I", "I'm", "I've", "I'd", "I'll", "My", "Me", "Mine", "Myself"})


_FIRST_PERSON_REWRITE = re.compile(
    r"\b(?P<is>I'm|I am)\b|\b(?P<has>I've)\b|\b(?P<would>I'd)\b|\b(?P<will>I'll)\b"
    r"|\b(?P<poss>[Mm]y|[Mm]ine)\b|\b(?P<obj>[Mm]yself|[Mm]e)\b|\b(?P<subj>I myself)\b|\bI (?P<verb>\w+)\b|\bI\b"
)


def third_person(text: str, speaker: str) -> str:
    """Rewrite first-person forms in one pass, so inserted names are never rewritten again."""
    s = f"Speaker {speaker}"

    def swap(m: re.Match[str]) -> str:
        for aux in ("is", "has", "would", "will"):
            if m.group(aux):
                return f"{s} {aux}"
        if m.group("poss"):
            return f"{s}'s"
        if m.group("verb"):
            verb = m.group("verb")
            return f"{s} {_AGREE.get(verb, verb)}"
        return s

    return _FIRST_PERSON_REWRITE.sub(swap, text)


def semantic_prompt(turn: Turn) -> str:
    return prompts.render(prompts.load_template("semantic"), message=turn.text)


def extract_semantic(
    turn: Turn,
    cfg: ExtractorConfig,
    provider: CompletionProvider | None = None,
    source_turn: int = 0,
) -> SemanticRecord:
    if cfg.mode is ExtractorMode.LLM:
        fact = _one_sentence(_require_str(_ask(provider, semantic_prompt(turn)), "fact"))
    else:
        text = _one_sentence(turn.text)
        if _FIRST_PERSON.search(text):
            fact = third_person(text, turn.speaker_id)
        else:
            fact = f"Speaker {turn.speaker_id}: {text}"
    return SemanticRecord(turn.speaker_id, fact, _reference_anchor(cfg), source_turn=source_turn)


_MARKER = re.compile(
    r"(?:(?<=\s)|^)(?:\d+[.)]\s+)"
    r"|\b(?:first(?:ly)?|then|next|finally|lastly|afterwards|after that|second(?:ly)?|third(?:ly)?)\b",
    re.IGNORECASE,
)
_STEP_TRIM = " \t,;.:!-"


def _clean_step(step: str) -> str:
    step = step.strip(_STEP_TRIM)
    step = re.sub(r"^(?:and|&)\s+", "", step, flags=re.IGNORECASE)
    step = re.sub(r"\s+(?:and|&)$", "", step, flags=re.IGNORECASE)
    return step.strip(_STEP_TRIM)


def split_steps(text: str) -> tuple[str, list[str]] | None:
    """Split ``text`` at sequence markers; None when fewer than two markers occur."""
    marks = list(_MARKER.finditer(text))
    if len(marks) < 2:
        return None
    preamble = text[: marks[0].start()]
    bounds = [m.end() for m in marks] + [len(text)]
    starts = [m.start() for m in marks[1:]] + [len(text)]
    steps = [_clean_step(text[b:e]) for b, e in zip(bounds, starts)]
    steps = [s for s in steps if s]
    if len(steps) < 2:
        return None
    return _clean_step(preamble), steps


def procedural_prompt(turn: Turn) -> str:
    return prompts.render(prompts.load_template("procedural"), message=turn.text) + prompts.PROCEDURAL_FORMAT


def extract_procedural(
    turn: Turn,
    cfg: ExtractorConfig,
    provider: CompletionProvider | None = None,
    source_turn: int = 0,
) -> ProceduralRecord:
    if cfg.mode is ExtractorMode.LLM:
        data = _ask(provider, procedural_prompt(turn))
        title = _one_line(_require_str(data, "title"))
        raw = data.get("content")
        if isinstance(raw, list):
            if not raw or not all(isinstance(s, str) and s.strip() for s in raw):
                raise ParseError("procedural content list must hold non-empty strings")
            content: str | tuple[str, ...] = tuple(_one_line(s) for s in raw)
        else:
            content = _one_line(_require_str(data, "content"))
        return ProceduralRecord(turn.speaker_id, title, content, _reference_anchor(cfg), source_turn=source_turn)

    text = _one_line(turn.text)
    head, sep, tail = text.partition(":")
    title = ""
    body = text
    if sep and head.strip() and tail.strip() and len(head.split()) <= 12:
        title, body = head.strip(), tail.strip()
    split = split_steps(body)
    if split is not None:
        preamble, steps = split
        if not title:
            title = preamble or content_title(text)
        content = tuple(steps)
    else:
        content = body
    try:
        return ProceduralRecord(turn.speaker_id, title or content_title(text), content, _reference_anchor(cfg), source_turn=source_turn)
    except ValidationError as exc:
        raise ParseError(f"could not form procedural record: {exc}") from exc
