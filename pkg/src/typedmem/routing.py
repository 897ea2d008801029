"""Turn routing: decide which typed stores a turn should update."""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any

from . import prompts
from .core import RouteMask, Turn
from .errors import ParseError, ProviderError, ValidationError
from .providers import CompletionProvider, extract_json_object
from .temporal import ABSOLUTE_IN_TEXT, BARE_MONTH_IN_TEXT, relative_regex

logger = logging.getLogger(__name__)

EPISODIC_DEFAULT = RouteMask(epi=True)


class RouterMode(str, enum.Enum):
    LLM = "llm"
    RULES = "rules"


@dataclass(frozen=True)
class RouterConfig:
    mode: RouterMode = RouterMode.RULES
    fallback_to_rules: bool = True
    default_mask_on_empty: RouteMask = field(default=EPISODIC_DEFAULT)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", RouterMode(self.mode))
        if not self.default_mask_on_empty:
            raise ValidationError("default_mask_on_empty must set at least one bit", "default_mask_on_empty")


@lru_cache(maxsize=1)
def load_lexicon() -> dict[str, Any]:
    text = resources.files("typedmem").joinpath("data/router_lexicon.json").read_text(encoding="utf-8")
    return json.loads(text)


def _phrase_re(phrases: list[str]) -> re.Pattern[str]:
    alts = "|".join(re.escape(p) for p in sorted(phrases, key=len, reverse=True))
    return re.compile(rf"(?<![\w'])(?:{alts})(?![\w'])")


@dataclass(frozen=True)
class _Rules:
    strong: re.Pattern[str]
    sequence: re.Pattern[str]
    min_sequence: int
    numbered_items: int
    semantic: re.Pattern[str]
    temporal: re.Pattern[str]
    future: re.Pattern[str]
    past_verbs: frozenset[str]
    suffix: str
    not_past: frozenset[str]
    copulas: frozenset[str]


@lru_cache(maxsize=1)
def _rules() -> _Rules:
    lex = load_lexicon()
    pro, sem, epi = lex["procedural"], lex["semantic"], lex["episodic"]
    return _Rules(
        strong=_phrase_re(pro["strong"]),
        sequence=_phrase_re(pro["sequence"]),
        min_sequence=pro["min_sequence"],
        numbered_items=pro["numbered_items"],
        semantic=_phrase_re(sem["cues"]),
        temporal=_phrase_re(epi["temporal"]),
        future=_phrase_re(epi["future"]),
        past_verbs=frozenset(epi["past_verbs"]),
        suffix=epi["regular_past_suffix"],
        not_past=frozenset(epi["not_past"]),
        copulas=frozenset(epi["copulas"]),
    )


_WORD_RE = re.compile(r"[a-z]+(?:'[a-z]+)?|'[a-z]+")
_NUMBERED_RE = re.compile(r"(?:^|\s)\d+[.)]\s")
_YEAR_RE = re.compile(r"\b(?:19|20)\d{2}\b")
_QUESTION_RE = re.compile(r"[^.!?]*\?")


def _has_past_event_verb(words: list[str], rules: _Rules) -> bool:
    for i, w in enumerate(words):
        if w in rules.past_verbs:
            return True
        if len(w) > 3 and w.endswith(rules.suffix) and w not in rules.not_past:
            prev = words[i - 1] if i else ""
            # "are named", "is married": adjectival participle, not an event.
            if prev not in rules.copulas and not prev.endswith(("'s", "'re", "'m")):
                return True
    return False


def rule_route(turn: Turn, default: RouteMask = EPISODIC_DEFAULT) -> RouteMask:
    """Deterministic keyword classifier over the bundled lexicon."""
    rules = _rules()
    text = turn.text
    low = text.lower().replace("’", "'")
    words = _WORD_RE.findall(low)

    sequence_hits = {m.group(0) for m in rules.sequence.finditer(low)}
    pro = (
        bool(rules.strong.search(low))
        or len(sequence_hits) >= rules.min_sequence
        or len(_NUMBERED_RE.findall(text)) >= rules.numbered_items
    )
    past = _has_past_event_verb(words, rules)
    # Questions ask about facts rather than state them.
    sem = bool(rules.semantic.search(_QUESTION_RE.sub(" ", low))) and not past
    epi = (
        past
        or bool(rules.temporal.search(low))
        or bool(rules.future.search(low))
        or bool(relative_regex().search(text))
        or bool(ABSOLUTE_IN_TEXT.search(text))
        or bool(BARE_MONTH_IN_TEXT.search(text))
        or bool(_YEAR_RE.search(text))
    )
    mask = RouteMask(epi=epi, sem=sem, pro=pro)
    return mask if mask else default


def router_prompt(turn: Turn) -> str:
    return prompts.render(prompts.load_template("router"), message=turn.text) + prompts.ROUTER_FORMAT


def parse_verdict(response: str) -> RouteMask:
    data = extract_json_object(response)
    values = []
    for key in ("episodic", "semantic", "procedural"):
        if key not in data or not isinstance(data[key], bool):
            raise ParseError(f"router verdict missing boolean {key!r}")
        values.append(data[key])
    return RouteMask(*values)


def route(turn: Turn, config: RouterConfig = RouterConfig(), provider: CompletionProvider | None = None) -> RouteMask:
    """Return the store mask for ``turn``; never the all-zero mask."""
    if config.mode is RouterMode.RULES:
        return rule_route(turn, config.default_mask_on_empty)
    if provider is None:
        raise ProviderError("llm routing requires a completion provider")
    try:
        mask = parse_verdict(provider.complete(router_prompt(turn)))
    except (ParseError, ProviderError) as exc:
        if not config.fallback_to_rules:
            raise
        logger.warning("router fell back to rules: %s", exc)
        return rule_route(turn, config.default_mask_on_empty)
    if not mask:
        return rule_route(turn, config.default_mask_on_empty)
    return mask
