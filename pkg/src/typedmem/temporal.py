"""Resolution of relative and absolute temporal expressions.

The grammar is a fixed rule table so results are reproducible:

* ``yesterday`` / ``today`` / ``tonight`` / ``tomorrow`` / ``last night`` -> day
* ``last|this|next week`` -> -7/0/+7 days, day precision
* ``last|this|next weekend`` -> Saturday of the previous/current/next week
* ``last|this|next month`` -> month precision
* ``last|this|next year`` -> year precision
* ``last <weekday>`` -> most recent strictly earlier weekday, day precision
* ``N days|weeks|months|years ago`` (N a digit string, a spelled number up to
  twenty, or ``a``/``an``)
* bare month names -> most recent occurrence not after the reference month
* absolute dates: ISO forms, ``July 21 2024``, ``21 July, 2024``,
  ``June 2024``, ``2023``, ``10:55 am on 22 July, 2024``,
  ``2023/05/20 (Sat) 02:21``
"""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta

from .core import MONTH_NAMES, Precision, TemporalAnchor, parse_timestamp
from .errors import TemporalError, ValidationError

SPELLED_NUMBERS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
    "thirteen": 13, "fourteen": 14, "fifteen": 15, "sixteen": 16,
    "seventeen": 17, "eighteen": 18, "nineteen": 19, "twenty": 20,
}
_MONTHS = {name.lower(): i for i, name in enumerate(MONTH_NAMES, start=1)}
_MONTHS.update({name[:3].lower(): i for i, name in enumerate(MONTH_NAMES, start=1)})
_MONTHS["sept"] = 9
_WEEKDAYS = {name.lower(): i for i, name in enumerate(calendar.day_name)}

_MONTH_ALT = "|".join(sorted(_MONTHS, key=len, reverse=True))
_WEEKDAY_ALT = "|".join(_WEEKDAYS)
_NUM_ALT = r"\d+|a|an|" + "|".join(SPELLED_NUMBERS)

RELATIVE_PATTERN = (
    r"yesterday|today|tonight|tomorrow|last night"
    r"|(?:last|this|next) (?:weekend|week|month|year)"
    rf"|last (?:{_WEEKDAY_ALT})"
    rf"|(?:{_NUM_ALT}) (?:days?|weeks?|months?|years?) ago"
)
_RELATIVE_RE = re.compile(rf"\b(?:{RELATIVE_PATTERN})\b", re.IGNORECASE)


def shift_months(d: date, months: int) -> date:
    """Calendar month arithmetic, clamping the day to the target month's length."""
    index = d.year * 12 + (d.month - 1) + months
    year, month = divmod(index, 12)
    month += 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return date(year, month, day)


def _reference_date(reference: str | date | datetime) -> date:
    if isinstance(reference, datetime):
        return reference.date()
    if isinstance(reference, date):
        return reference
    try:
        return parse_timestamp(reference).date()
    except ValidationError as exc:
        raise TemporalError(str(exc)) from exc


def _quantity(token: str) -> int:
    token = token.lower()
    if token in ("a", "an"):
        return 1
    if token in SPELLED_NUMBERS:
        return SPELLED_NUMBERS[token]
    return int(token)


def _resolve_relative(phrase: str, ref: date) -> TemporalAnchor | None:
    p = " ".join(phrase.lower().split())
    day_offsets = {"yesterday": -1, "last night": -1, "today": 0, "tonight": 0, "tomorrow": 1}
    if p in day_offsets:
        return TemporalAnchor.of_date(ref + timedelta(days=day_offsets[p]))
    m = re.fullmatch(r"(last|this|next) (weekend|week|month|year)", p)
    if m:
        step = {"last": -1, "this": 0, "next": 1}[m.group(1)]
        unit = m.group(2)
        if unit == "week":
            return TemporalAnchor.of_date(ref + timedelta(days=7 * step))
        if unit == "weekend":
            saturday = ref - timedelta(days=ref.weekday()) + timedelta(days=5)
            return TemporalAnchor.of_date(saturday + timedelta(days=7 * step))
        if unit == "month":
            shifted = shift_months(ref, step)
            return TemporalAnchor.of_month(shifted.year, shifted.month)
        return TemporalAnchor.of_year(ref.year + step)
    m = re.fullmatch(rf"last ({_WEEKDAY_ALT})", p)
    if m:
        back = (ref.weekday() - _WEEKDAYS[m.group(1)]) % 7 or 7
        return TemporalAnchor.of_date(ref - timedelta(days=back))
    m = re.fullmatch(rf"({_NUM_ALT}) (day|week|month|year)s? ago", p)
    if m:
        n = _quantity(m.group(1))
        unit = m.group(2)
        if unit == "day":
            return TemporalAnchor.of_date(ref - timedelta(days=n))
        if unit == "week":
            return TemporalAnchor.of_date(ref - timedelta(days=7 * n))
        if unit == "month":
            shifted = shift_months(ref, -n)
            return TemporalAnchor.of_month(shifted.year, shifted.month)
        return TemporalAnchor.of_year(ref.year - n)
    return None


_TIME_PART = r"(\d{1,2}):(\d{2})\s*(am|pm)?"


def _hm(hour: str, minute: str, meridiem: str | None) -> int:
    h, mi = int(hour), int(minute)
    if meridiem:
        if not 1 <= h <= 12:
            raise TemporalError(f"bad 12-hour clock value {hour}")
        h = h % 12 + (12 if meridiem.lower() == "pm" else 0)
    if not (0 <= h < 24 and 0 <= mi < 60):
        raise TemporalError(f"bad clock value {hour}:{minute}")
    return h * 60 + mi


def _anchor(year: int, month: int | None = None, day: int | None = None, minutes: int | None = None) -> TemporalAnchor:
    try:
        if minutes is not None:
            return TemporalAnchor(year, month, day, minutes, Precision.MINUTE)
        if day is not None:
            return TemporalAnchor(year, month, day, precision=Precision.DAY)
        if month is not None:
            return TemporalAnchor.of_month(year, month)
        return TemporalAnchor.of_year(year)
    except ValidationError as exc:
        raise TemporalError(str(exc)) from exc


def parse_absolute(phrase: str) -> TemporalAnchor | None:
    """Parse a free-standing absolute date expression, or return None."""
    p = " ".join(phrase.strip().split())
    low = p.lower().rstrip(".")
    m = re.fullmatch(r"(\d{4})-(\d{2})-(\d{2})[t ](\d{2}):(\d{2})(?::\d{2}(?:\.\d+)?)?(?:z|[+-]\d{2}:?\d{2})?", low)
    if m:
        y, mo, d, hh, mi = map(int, m.groups())
        return _anchor(y, mo, d, _hm(str(hh), str(mi), None))
    m = re.fullmatch(r"(\d{4})-(\d{2})-(\d{2})", low)
    if m:
        return _anchor(*map(int, m.groups()))
    m = re.fullmatch(r"(\d{4})-(\d{2})", low)
    if m:
        return _anchor(*map(int, m.groups()))
    m = re.fullmatch(r"(\d{4})", low)
    if m:
        return _anchor(int(m.group(1)))
    # 2023/05/20 (Sat) 02:21
    m = re.fullmatch(r"(\d{4})/(\d{1,2})/(\d{1,2})(?:\s*\(\w+\))?(?:\s+" + _TIME_PART + r")?", low)
    if m:
        y, mo, d = int(m.group(1)), int(m.group(2)), int(m.group(3))
        minutes = _hm(m.group(4), m.group(5), m.group(6)) if m.group(4) else None
        return _anchor(y, mo, d, minutes)
    # 10:55 am on 22 July, 2024
    m = re.fullmatch(_TIME_PART + rf"\s+on\s+(\d{{1,2}})\s+({_MONTH_ALT}),?\s+(\d{{4}})", low)
    if m:
        minutes = _hm(m.group(1), m.group(2), m.group(3))
        return _anchor(int(m.group(6)), _MONTHS[m.group(5)], int(m.group(4)), minutes)
    # July 21 2024 / July 21, 2024 / July 21st, 2024
    m = re.fullmatch(rf"({_MONTH_ALT})\.?\s+(\d{{1,2}})(?:st|nd|rd|th)?,?\s+(\d{{4}})", low)
    if m:
        return _anchor(int(m.group(3)), _MONTHS[m.group(1)], int(m.group(2)))
    # 21 July 2024 / 21 July, 2024
    m = re.fullmatch(rf"(\d{{1,2}})(?:st|nd|rd|th)?\s+(?:of\s+)?({_MONTH_ALT})\.?,?\s+(\d{{4}})", low)
    if m:
        return _anchor(int(m.group(3)), _MONTHS[m.group(2)], int(m.group(1)))
    # June 2024 / June, 2024
    m = re.fullmatch(rf"({_MONTH_ALT})\.?,?\s+(\d{{4}})", low)
    if m:
        return _anchor(int(m.group(2)), _MONTHS[m.group(1)])
    return None


def _resolve_bare_month(phrase: str, ref: date) -> TemporalAnchor | None:
    low = phrase.strip().lower()
    if low not in _MONTHS:
        return None
    month = _MONTHS[low]
    year = ref.year if month <= ref.month else ref.year - 1
    return TemporalAnchor.of_month(year, month)


def resolve_relative_time(phrase: str, reference: str | date | datetime) -> TemporalAnchor:
    """Resolve ``phrase`` against ``reference``.

    Raises:
        TemporalError: the phrase is outside the grammar or the reference is invalid.
    """
    ref = _reference_date(reference)
    if not isinstance(phrase, str) or not phrase.strip():
        raise TemporalError("empty temporal phrase")
    for attempt in (_resolve_relative(phrase, ref), parse_absolute(phrase), _resolve_bare_month(phrase, ref)):
        if attempt is not None:
            return attempt
    raise TemporalError(f"unresolvable temporal phrase {phrase!r}")


def parse_datetime_loose(value: str) -> datetime:
    """Parse dataset timestamps ("1:56 pm on 8 May, 2023", "2023/05/20 (Sat) 02:21", ISO)."""
    try:
        return parse_timestamp(value)
    except ValidationError:
        pass
    anchor = parse_absolute(value)
    if anchor is None:
        raise TemporalError(f"unparseable date-time {value!r}")
    minutes = anchor.time or 0
    return datetime(anchor.year, anchor.month or 1, anchor.day or 1, minutes // 60, minutes % 60)


@dataclass(frozen=True)
class PhraseMatch:
    start: int
    end: int
    text: str
    anchor: TemporalAnchor
    relative: bool


ABSOLUTE_IN_TEXT = re.compile(
    r"\b\d{4}-\d{2}-\d{2}\b"
    rf"|\b(?:{'|'.join(MONTH_NAMES)})\s+\d{{1,2}}(?:st|nd|rd|th)?,?\s+\d{{4}}\b"
    rf"|\b\d{{1,2}}(?:st|nd|rd|th)?\s+(?:{'|'.join(MONTH_NAMES)}),?\s+\d{{4}}\b"
    rf"|\b(?:{'|'.join(MONTH_NAMES)}),?\s+\d{{4}}\b"
)
# "May" doubles as a modal verb; only accept it after a date preposition.
BARE_MONTH_IN_TEXT = re.compile(
    rf"\b(?:{'|'.join(n for n in MONTH_NAMES if n != 'May')})\b"
    r"|(?<=\b(?:in|of) )May\b|(?<=\bsince )May\b|(?<=\bduring )May\b"
)


def find_temporal_phrases(text: str, reference: str | date | datetime) -> list[PhraseMatch]:
    """Locate resolvable temporal expressions in running text, left to right, non-overlapping."""
    ref = _reference_date(reference)
    found: list[PhraseMatch] = []
    taken: list[tuple[int, int]] = []

    def free(a: int, b: int) -> bool:
        return all(b <= s or a >= e for s, e in taken)

    for m in _RELATIVE_RE.finditer(text):
        anchor = _resolve_relative(m.group(0), ref)
        if anchor is not None and free(m.start(), m.end()):
            found.append(PhraseMatch(m.start(), m.end(), m.group(0), anchor, True))
            taken.append((m.start(), m.end()))
    for m in ABSOLUTE_IN_TEXT.finditer(text):
        anchor = parse_absolute(m.group(0))
        if anchor is not None and free(m.start(), m.end()):
            found.append(PhraseMatch(m.start(), m.end(), m.group(0), anchor, False))
            taken.append((m.start(), m.end()))
    for m in BARE_MONTH_IN_TEXT.finditer(text):
        anchor = _resolve_bare_month(m.group(0), ref)
        if anchor is not None and free(m.start(), m.end()):
            found.append(PhraseMatch(m.start(), m.end(), m.group(0), anchor, False))
            taken.append((m.start(), m.end()))
    found.sort(key=lambda pm: pm.start)
    return found


def relative_regex() -> re.Pattern[str]:
    return _RELATIVE_RE
