"""Answer normalization, lexical metrics, percentiles, and evidence-token counting."""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from ..errors import EmptyInput, TemporalError
from ..temporal import SPELLED_NUMBERS, relative_regex, resolve_relative_time

# Kept when flanked by digits on both sides: dates, clock times, decimals.
_DIGIT_JOINERS = frozenset("-:.")
# Deleted (not spaced) when flanked by digits: thousands separators.
_THOUSANDS = frozenset(",")
_APOSTROPHES = "'’‘`´"

_UNITS = r"(?:days?|weeks?|months?|years?)\s+ago"
_ARTICLE = re.compile(rf"\b(?:the|an?(?!\s+{_UNITS}))\b")
_SPELLED = re.compile(r"\b(?:" + "|".join(SPELLED_NUMBERS) + r")\b")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def strip_punctuation(text: str) -> str:
    """Drop apostrophes; turn other punctuation into spaces, keeping numeric joiners."""
    text = re.sub(f"[{_APOSTROPHES}]", "", text)
    out = []
    for i, ch in enumerate(text):
        if not _is_punct(ch):
            out.append(ch)
            continue
        between_digits = 0 < i < len(text) - 1 and text[i - 1].isdigit() and text[i + 1].isdigit()
        if between_digits and ch in _DIGIT_JOINERS:
            out.append(ch)
        elif between_digits and ch in _THOUSANDS:
            continue
        else:
            out.append(" ")
    return "".join(out)


def resolve_relative_phrases(text: str, question_date: str | None) -> str:
    if not question_date:
        return text

    def swap(m: re.Match[str]) -> str:
        try:
            return resolve_relative_time(m.group(0), question_date).render_iso()
        except TemporalError:
            return m.group(0)

    return relative_regex().sub(swap, text)


def normalize(text: str, question_date: str | None = None) -> str:
    """Canonical answer form used by F1, BLEU, and the lexical judge.

    NFKC -> lowercase -> punctuation -> articles -> spelled numbers ->
    relative dates (only with ``question_date``) -> whitespace.
    """
    text = unicodedata.normalize("NFKC", text)
    text = unicodedata.normalize("NFKC", text.lower())
    text = strip_punctuation(text)
    text = _ARTICLE.sub(" ", text)
    text = _SPELLED.sub(lambda m: str(SPELLED_NUMBERS[m.group(0)]), text)
    text = " ".join(text.split())
    text = resolve_relative_phrases(text, question_date)
    return " ".join(text.split())


def token_f1(prediction: str, gold_answers: Sequence[str]) -> float:
    """Bag-of-tokens F1 over whitespace tokens, best over golds."""
    pred = prediction.split()
    best = 0.0
    for gold in gold_answers:
        ref = gold.split()
        if not pred and not ref:
            score = 1.0
        elif not pred or not ref:
            score = 0.0
        else:
            common = sum((Counter(pred) & Counter(ref)).values())
            if common == 0:
                score = 0.0
            else:
                p, r = common / len(pred), common / len(ref)
                score = 2 * p * r / (p + r)
        best = max(best, score)
    return best


def _ngrams(tokens: list[str], n: int) -> Counter[tuple[str, ...]]:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _bleu_single(pred: list[str], ref: list[str], max_n: int) -> float:
    if not pred:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand = _ngrams(pred, n)
        matched = sum((cand & _ngrams(ref, n)).values())
        log_sum += math.log((matched + 1) / (sum(cand.values()) + 1))
    c, r = len(pred), len(ref)
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * math.exp(log_sum / max_n)


def bleu(prediction: str, gold_answers: Sequence[str], max_n: int = 1) -> float:
    """Sentence BLEU with add-one smoothing per order and brevity penalty; best over golds."""
    if max_n not in (1, 2):
        raise ValueError("max_n must be 1 or 2")
    pred = prediction.split()
    return max((_bleu_single(pred, g.split(), max_n) for g in gold_answers), default=0.0)


def percentile(samples: Iterable[float], p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample (1-based)."""
    ordered = sorted(samples)
    if not ordered:
        raise EmptyInput("percentile of an empty sample")
    if not 0 < p <= 100:
        raise ValueError("p must lie in (0, 100]")
    rank = math.ceil(Fraction(str(p)) * len(ordered) / 100)
    return ordered[max(rank, 1) - 1]


TokenCounter = Callable[[str], int]


def whitespace_tokens(text: str) -> int:
    return len(text.split())


DEFAULT_COUNTER_NAME = "whitespace"


def count_evidence_tokens(lines: str | Sequence[str], counter: TokenCounter = whitespace_tokens) -> int:
    """Tokens in serialized memory lines only; template text is never counted."""
    if isinstance(lines, str):
        lines = [lines]
    return sum(counter(line) for line in lines)
