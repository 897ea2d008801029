from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from typedmem.core import Turn  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

# criterion number -> (description, list of outcomes)
_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion this test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item: pytest.Item, call: pytest.CallInfo):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, text = marker.args
    entry = _CRITERIA.setdefault(n, (text, []))
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry[1].append("skipped" if report.skipped else ("passed" if report.passed else "failed"))


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        text, outcomes = _CRITERIA[n]
        if "failed" in outcomes:
            verdict = "FAIL"
        elif outcomes and all(o == "skipped" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"criterion {n:>2}: {verdict}  {text}  ({len(outcomes)} checks)")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def turn(text: str, speaker: str = "A", ts: str = "2024-07-22T10:55:00+00:00") -> Turn:
    return Turn(speaker, text, ts)
