"""Evidence serialization, answer-prompt assembly, and the answer call."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from . import prompts
from .core import EvidenceSet, MemoryRecord, render_anchor
from .providers import CompletionProvider

EMPTY_BANK = "(no memories)"
BULLET = "- "
NO_ANSWER = "No information available."


def serialize_record(record: MemoryRecord) -> str:
    return f"{render_anchor(record.anchor)}: {record.text}"


def bank_lines(bank: EvidenceSet) -> list[str]:
    return [serialize_record(r) for r in bank.records]


def render_bank(bank: EvidenceSet) -> str:
    lines = bank_lines(bank)
    if not lines:
        return "\n" + EMPTY_BANK
    return "".join(f"\n{BULLET}{line}" for line in lines)


def assemble_prompt(
    question: str,
    bank_a: EvidenceSet,
    bank_b: EvidenceSet,
    speaker_ids: Sequence[str],
    template: str | None = None,
) -> str:
    """Fill the fixed answer template; banks appear in EvidenceSet order."""
    if len(speaker_ids) != 2:
        raise ValueError("assemble_prompt needs exactly two speaker ids")
    return prompts.render(
        template if template is not None else prompts.load_template("answer"),
        speaker_1_user_id=speaker_ids[0],
        speaker_1_memories=render_bank(bank_a),
        speaker_2_user_id=speaker_ids[1],
        speaker_2_memories=render_bank(bank_b),
        question=question,
    )


@dataclass(frozen=True)
class Answer:
    text: str
    gen_latency_s: float
    prompt: str

    def to_dict(self) -> dict[str, object]:
        return {"text": self.text, "gen_latency_s": self.gen_latency_s}


def answer(
    question: str,
    banks: Sequence[EvidenceSet],
    provider: CompletionProvider,
    speaker_ids: Sequence[str],
    clock: Callable[[], float] = time.perf_counter,
) -> Answer:
    """Assemble the prompt and time one completion. ProviderError propagates."""
    prompt = assemble_prompt(question, banks[0], banks[1], speaker_ids)
    started = clock()
    text = provider.complete(prompt)
    return Answer(text.strip(), clock() - started, prompt)


# -- offline answerer ------------------------------------------------------

_QWORDS = frozenset(
    "what when where who whom whose which why how is are was were do does did the a an of to in on "
    "for and or with at by from did has have had user speaker".split()
)
_TOKEN = re.compile(r"[^\W_]+")
_MEMORY_LINE = re.compile(r"^- (?P<anchor>[^:]+(?::\d{2})?): (?P<text>.+)$")


def _content_tokens(text: str) -> set[str]:
    return {t for t in _TOKEN.findall(text.lower()) if t not in _QWORDS}


@dataclass
class ExtractiveAnswerer:
    """Offline stand-in for the answer model.

    Picks the evidence line sharing the most content words with the question
    (earliest line wins ties, i.e. the higher-scored hit) and returns it with
    its anchor, so dates survive into the answer.
    """

    model_id: str = "extractive"

    def complete(self, prompt: str) -> str:
        _, _, question = prompt.rpartition("Question: ")
        q = _content_tokens(question)
        best, best_overlap = None, 0
        for line in prompt.splitlines():
            m = _MEMORY_LINE.match(line)
            if not m:
                continue
            overlap = len(q & _content_tokens(m.group("text")))
            if overlap > best_overlap:
                best, best_overlap = m, overlap
        if best is None:
            return NO_ANSWER
        return f"{best.group('text')} ({best.group('anchor')})"
