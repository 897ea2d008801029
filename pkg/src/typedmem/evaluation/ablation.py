"""Store ablations and the evidence-budget (K) sweep with marginal-utility analysis."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from ..engine import MemoryMode
from ..errors import ValidationError
from ..providers import CompletionProvider
from .datasets import Sample
from .runner import EngineSpec, Report, RunConfig, run_benchmark

ABLATION_MODES = (
    MemoryMode.EPISODIC_ONLY,
    MemoryMode.SEMANTIC_ONLY,
    MemoryMode.PROCEDURAL_ONLY,
    MemoryMode.UNIFIED,
)


def ablate_stores(
    samples: Sequence[Sample],
    mode: MemoryMode | str,
    spec: EngineSpec,
    judge_provider: CompletionProvider,
    cfg: RunConfig = RunConfig(),
    workdir: str | Path | None = None,
) -> Report:
    mode = MemoryMode(mode)
    if mode is MemoryMode.TYPED:
        raise ValidationError("ablation mode must restrict or collapse the stores", "mode")
    return run_benchmark(samples, spec, judge_provider, replace(cfg, mode=mode), workdir)


@dataclass(frozen=True)
class SweepPoint:
    K: int
    judge: float
    tokens: float


def marginal_utilities(points: Sequence[SweepPoint]) -> list[float | None]:
    """Judge points gained per 1k extra evidence tokens between consecutive K values.

    None when the token count does not move (every memory already fits the smaller budget).
    """
    out: list[float | None] = []
    for a, b in zip(points, points[1:]):
        dt = (b.tokens - a.tokens) / 1000.0
        if dt < 0:
            raise ValidationError(f"token count falls from K={a.K} to K={b.K}", "tokens")
        out.append((b.judge - a.judge) / dt if dt > 0 else None)
    return out


def find_knee(points: Sequence[SweepPoint]) -> int | None:
    """K at the end of the segment after which marginal utility falls the most.

    Only pairs of defined utilities count; None when there is no such pair.
    """
    if len(points) < 3:
        raise ValidationError("knee detection needs at least three K values", "points")
    mu = marginal_utilities(points)
    drops = [(mu[i] - mu[i + 1], i) for i in range(len(mu) - 1) if mu[i] is not None and mu[i + 1] is not None]
    if not drops:
        return None
    best = max(drops, key=lambda d: (d[0], -d[1]))[1]
    return points[best + 1].K


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    utilities: tuple[float | None, ...]
    knee: int | None

    @classmethod
    def from_points(cls, points: Sequence[SweepPoint]) -> SweepResult:
        points = tuple(sorted(points, key=lambda p: p.K))
        return cls(points, tuple(marginal_utilities(points)), find_knee(points))

    def to_dict(self) -> dict[str, object]:
        return {
            "points": [{"K": p.K, "judge": p.judge, "tokens": p.tokens} for p in self.points],
            "marginal_utility": [
                {"from": a.K, "to": b.K, "per_1k_tokens": u}
                for a, b, u in zip(self.points, self.points[1:], self.utilities)
            ],
            "knee": self.knee,
        }

    def table(self) -> str:
        rows = [f"{'K':>4}{'judge':>9}{'tokens':>9}{'dJ/1k tok':>12}", "-" * 34]
        for i, p in enumerate(self.points):
            u = self.utilities[i - 1] if i else None
            mu = "-" if u is None else f"{u:.2f}"
            rows.append(f"{p.K:>4}{p.judge:>9.2f}{p.tokens:>9.0f}{mu:>12}")
        rows.append(f"knee: K={self.knee}" if self.knee is not None else "knee: undefined (token counts saturate)")
        return "\n".join(rows) + "\n"


def sweep_k(
    samples: Sequence[Sample],
    K_values: Sequence[int],
    spec: EngineSpec,
    judge_provider: CompletionProvider,
    cfg: RunConfig = RunConfig(),
    workdir: str | Path | None = None,
) -> tuple[SweepResult, dict[int, Report]]:
    """One benchmark per K. Stores are ingested once and reused when ``workdir`` is given."""
    reports = {}
    points = []
    for K in sorted(set(K_values)):
        report = run_benchmark(samples, spec, judge_provider, replace(cfg, budget_K=K), workdir)
        reports[K] = report
        points.append(SweepPoint(K, report.judge_mean, report.tokens_mean))
    return SweepResult.from_points(points), reports


# Evidence-budget points reported for the typed system: (K, judge %, mean evidence tokens).
REPORTED_SWEEP = (
    SweepPoint(20, 75.65, 767),
    SweepPoint(25, 77.55, 916),
    SweepPoint(30, 77.91, 1098),
    SweepPoint(40, 78.32, 2512),
    SweepPoint(60, 80.43, 4196),
)
