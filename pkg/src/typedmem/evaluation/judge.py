"""LLM-as-judge protocol: prompt, verdict parsing, repeated passes, summary statistics."""

from __future__ import annotations

import json
import logging
import re
import statistics
from dataclasses import dataclass
from typing import Sequence

from .. import prompts
from ..errors import ParseError
from ..providers import CompletionProvider, extract_json_object
from ..temporal import ABSOLUTE_IN_TEXT, parse_absolute
from .metrics import normalize

logger = logging.getLogger(__name__)

JUDGE_PASSES = 3
GOLD_SEPARATOR = " | "

ABSTENTION_PHRASES = (
    "no information available",
    "not mentioned",
    "no mention",
    "not enough information",
    "insufficient information",
    "cannot be determined",
    "can not be determined",
    "cannot determine",
    "not specified",
    "not stated",
    "unknown",
    "i dont know",
    "does not say",
    "did not mention",
    "no record",
    "not available",
)


def judge_prompt(question: str, gold_answers: Sequence[str], prediction: str) -> str:
    return prompts.render(
        prompts.load_template("judge"),
        question=question,
        gold_answer=GOLD_SEPARATOR.join(gold_answers),
        generated_answer=prediction,
    )


_LABEL = re.compile(r"\b(CORRECT|WRONG)\b")


def parse_verdict(text: str) -> bool | None:
    """True/False for a recognizable label, None when the reply is unusable."""
    try:
        label = extract_json_object(text).get("label")
        if isinstance(label, str) and label.strip().upper() in ("CORRECT", "WRONG"):
            return label.strip().upper() == "CORRECT"
    except ParseError:
        pass
    labels = set(_LABEL.findall(text))
    if len(labels) == 1:
        return labels.pop() == "CORRECT"
    return None


def judge(question: str, gold_answers: Sequence[str], prediction: str, provider: CompletionProvider) -> bool:
    """One verdict. Unparseable replies count as incorrect and are logged."""
    reply = provider.complete(judge_prompt(question, gold_answers, prediction))
    verdict = parse_verdict(reply)
    if verdict is None:
        logger.warning("unparseable judge verdict counted as WRONG: %r", reply[:120])
        return False
    return verdict


def is_abstention(prediction: str) -> bool:
    text = normalize(prediction)
    return any(phrase in text for phrase in ABSTENTION_PHRASES)


@dataclass(frozen=True)
class JudgeSummary:
    """Pass-level means (percent) with their mean and population stdev."""

    pass_means: tuple[float, ...]

    @property
    def mean(self) -> float:
        return statistics.fmean(self.pass_means) if self.pass_means else 0.0

    @property
    def std(self) -> float:
        return statistics.pstdev(self.pass_means) if len(self.pass_means) > 1 else 0.0

    def to_dict(self) -> dict[str, object]:
        return {"mean": self.mean, "std": self.std, "pass_means": list(self.pass_means)}

    def __str__(self) -> str:
        return f"{self.mean:.2f} ± {self.std:.2f}"


def summarize_runs(runs: Sequence[Sequence[bool]], passes: int = JUDGE_PASSES) -> JudgeSummary:
    """``runs[i]`` holds item i's verdicts, one per pass."""
    if not runs:
        return JudgeSummary(())
    means = []
    for p in range(passes):
        verdicts = [bool(item[p]) for item in runs]
        means.append(100.0 * sum(verdicts) / len(verdicts))
    return JudgeSummary(tuple(means))


def canonical_dates(text: str) -> str:
    """Rewrite absolute dates ("3 May 2023", "May 3, 2023") in ISO form."""

    def iso(m: re.Match[str]) -> str:
        anchor = parse_absolute(m.group(0))
        return anchor.render_iso() if anchor is not None else m.group(0)

    return ABSOLUTE_IN_TEXT.sub(iso, text)


class LexicalJudge:
    """Offline judge: CORRECT when the generated answer covers at least half of some
    gold answer's normalized tokens. Reads its inputs back out of the judge prompt."""

    model_id = "lexical-judge"

    def __init__(self, threshold: float = 0.5):
        self.threshold = threshold

    @staticmethod
    def _field(prompt: str, name: str) -> str:
        m = re.search(rf"^{name}: (.*)$", prompt, flags=re.MULTILINE)
        return m.group(1) if m else ""

    def complete(self, prompt: str) -> str:
        golds = self._field(prompt, "Gold answer").split(GOLD_SEPARATOR)
        pred = set(normalize(canonical_dates(self._field(prompt, "Generated answer"))).split())
        ok = False
        for gold in golds:
            tokens = normalize(canonical_dates(gold)).split()
            if tokens and sum(t in pred for t in tokens) / len(tokens) >= self.threshold:
                ok = True
        return json.dumps({"label": "CORRECT" if ok else "WRONG"})
