"""Performance metrics over per-rank timing records.

Covers the scalar aggregates (total time, speed-up, efficiency, rank
averages), the two compute-balance ratios, straggler detection under two
policies, and the I/O-strategy advisor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import RankTiming, Strategy

__all__ = [
    "ScalingPoint",
    "StragglerVerdict",
    "Advice",
    "total_time",
    "speedup_efficiency",
    "rank_averages",
    "ratio_comp_io",
    "ratio_comp_comm",
    "theoretical_ratio",
    "detect_stragglers",
    "advise_strategy",
    "MEDIAN_POLICY",
    "FASTEST_GROUP_POLICY",
    "DEFAULT_MEDIAN_FACTOR",
    "DEFAULT_FASTEST_GROUP_FACTOR",
]

MEDIAN_POLICY = "median_factor"
FASTEST_GROUP_POLICY = "fastest_group_factor"

DEFAULT_MEDIAN_FACTOR = 1.5
DEFAULT_FASTEST_GROUP_FACTOR = 2.0


@dataclass(frozen=True)
class ScalingPoint:
    """One strong-scaling data point."""

    n_workers: int
    t_total: float
    speedup: float
    efficiency: float
    component_means: dict = field(default_factory=dict)
    component_stds: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StragglerVerdict:
    rank: int
    t_n: float
    threshold: float
    flagged: bool


@dataclass(frozen=True)
class Advice:
    """Strategy recommendation derived from the serial compute-to-I/O ratio."""

    r_comp_io: float
    heuristic: int
    io_bound: bool
    shared_file_ok: bool
    core_ceiling: int | None
    recommended: tuple[str, ...]
    notes: str

    def as_dict(self) -> dict:
        return {
            "r_comp_io": None if math.isinf(self.r_comp_io) else self.r_comp_io,
            "heuristic": self.heuristic,
            "io_bound": self.io_bound,
            "shared_file_ok": self.shared_file_ok,
            "core_ceiling": self.core_ceiling,
            "recommended": list(self.recommended),
            "notes": self.notes,
        }


def _t_n_values(timings) -> np.ndarray:
    values = np.array(
        [t.t_n if isinstance(t, RankTiming) else float(t) for t in timings]
    )
    return values


def total_time(timings) -> float:
    """Total time to solution: the slowest rank's ``t_n``."""
    values = _t_n_values(timings)
    if len(values) == 0:
        raise ValueError("total_time of an empty run")
    return float(values.max())


def speedup_efficiency(t_serial: float, points) -> list[ScalingPoint]:
    """Speed-up ``S = t_serial / t_total`` and efficiency ``E = S / N``."""
    if t_serial <= 0:
        raise ValueError("serial time must be positive")
    out = []
    for n_workers, t_total_n in points:
        if t_total_n <= 0:
            raise ValueError(f"t_total for N={n_workers} must be positive")
        s = t_serial / t_total_n
        out.append(
            ScalingPoint(
                n_workers=int(n_workers),
                t_total=float(t_total_n),
                speedup=s,
                efficiency=s / n_workers,
            )
        )
    return out


def rank_averages(timings: list[RankTiming]) -> dict:
    """Per-run averages over ranks of the additive timing components."""
    if not timings:
        raise ValueError("rank_averages of an empty run")
    return {
        "t_comp": float(np.mean([t.t_comp for t in timings])),
        "t_io": float(np.mean([t.t_io for t in timings])),
        "t_comm": float(np.mean([t.t_comm for t in timings])),
        "t_opening_trajectory": float(
            np.mean([t.t_opening_trajectory for t in timings])
        ),
    }


def ratio_comp_io(t_comp_serial: float, t_io_serial: float) -> float:
    """Serial compute-to-read ratio; ``inf`` when the task does no I/O.

    Equivalently the ratio of the per-frame averages, since both totals sum
    over the same frame count.
    """
    if t_comp_serial < 0 or t_io_serial < 0:
        raise ValueError("times must be non-negative")
    if t_io_serial == 0:
        return math.inf
    return t_comp_serial / t_io_serial


def ratio_comp_comm(timings: list[RankTiming]) -> float:
    """Mean compute over mean communication time; NaN when nothing was sent.

    A serial run has no communication, so the ratio is undefined there and
    the NaN sentinel is returned.
    """
    if not timings:
        raise ValueError("ratio_comp_comm of an empty run")
    mean_comm = float(np.mean([t.t_comm for t in timings]))
    mean_comp = float(np.mean([t.t_comp for t in timings]))
    if mean_comm == 0:
        return math.nan
    return mean_comp / mean_comm


def theoretical_ratio(workload_factor: float, r1: float) -> float:
    """Compute-to-I/O ratio expected for an X-fold workload: ``X * r1``.

    Repeating the computation scales the compute total with the workload
    factor while the read total stays fixed.
    """
    return workload_factor * r1


def detect_stragglers(
    timings,
    policy: str = MEDIAN_POLICY,
    median_factor: float = DEFAULT_MEDIAN_FACTOR,
    fastest_group_factor: float = DEFAULT_FASTEST_GROUP_FACTOR,
) -> list[StragglerVerdict]:
    """Flag ranks whose completion time crosses the policy threshold.

    ``median_factor`` flags every rank with ``t_n >= factor * median(t_n)``.
    ``fastest_group_factor`` first isolates the fastest group of ranks --
    those within the lowest quarter of the observed t_n spread -- and flags
    ranks at or above ``factor`` times that group's mean.  Both policies are
    deterministic; accepts RankTiming records or bare t_n values.
    """
    timings = list(timings)
    values = _t_n_values(timings)
    if len(values) < 2:
        raise ValueError("straggler detection needs at least 2 ranks")
    if policy == MEDIAN_POLICY:
        threshold = median_factor * float(np.median(values))
    elif policy == FASTEST_GROUP_POLICY:
        lo, hi = float(values.min()), float(values.max())
        cutoff = lo + (hi - lo) / 4.0
        fastest = values[values <= cutoff]
        threshold = fastest_group_factor * float(fastest.mean())
    else:
        raise ValueError(f"unknown straggler policy {policy!r}")
    return [
        StragglerVerdict(
            rank=(t.rank if isinstance(t, RankTiming) else i),
            t_n=float(v),
            threshold=threshold,
            flagged=bool(v >= threshold),
        )
        for i, (t, v) in enumerate(zip(timings, values))
    ]


def advise_strategy(r_comp_io: float) -> Advice:
    """Recommend an I/O strategy from the serial compute-to-I/O ratio.

    Above 1 the task tolerates a single shared file up to roughly 50 cores;
    at or below 1 it is I/O bound and shared-file access should be avoided
    in favor of dense parallel reads (hundreds of cores) or subfiling
    (under ~200 cores).
    """
    if math.isnan(r_comp_io) or r_comp_io < 0:
        raise ValueError(f"ratio must be >= 0 or inf, got {r_comp_io}")
    if r_comp_io > 1.0:
        return Advice(
            r_comp_io=r_comp_io,
            heuristic=1,
            io_bound=False,
            shared_file_ok=True,
            core_ceiling=50,
            recommended=(Strategy.DENSE_PARALLEL.value,),
            notes=(
                "compute-bound: a single shared trajectory file is acceptable "
                "up to about 50 cores; switch to dense parallel reads to scale "
                "further"
            ),
        )
    return Advice(
        r_comp_io=r_comp_io,
        heuristic=2,
        io_bound=True,
        shared_file_ok=False,
        core_ceiling=None,
        recommended=(Strategy.DENSE_PARALLEL.value, Strategy.SUBFILE.value),
        notes=(
            "I/O-bound: avoid shared-file access; prefer dense parallel reads "
            "(scales to hundreds of cores), otherwise split the trajectory "
            "into one segment per process (under ~200 cores)"
        ),
    )
