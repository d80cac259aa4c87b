"""Benchmark report assembly: JSON document and per-rank CSV export.

A report covers one strategy at one workload factor, with one scaling point
per worker count.  Repeats whose total time exceeds three times the median
repeat are marked as outliers and excluded from the averages, but they stay
visible in ``repeat_t_totals``, ``excluded_repeats`` and the CSV export;
nothing is silently dropped.
"""

from __future__ import annotations

import csv
import json
import platform

import numpy as np

from .model import BenchRun, RankTiming
from .perf import (
    DEFAULT_MEDIAN_FACTOR,
    advise_strategy,
    detect_stragglers,
    rank_averages,
    ratio_comp_io,
)

__all__ = ["emit_report", "write_report_json", "write_timings_csv", "OUTLIER_FACTOR"]

#: A repeat is an outlier when its total time exceeds this multiple of the
#: median repeat's total time.
OUTLIER_FACTOR = 3.0

_COMPONENTS = ("t_comp", "t_io", "t_comm", "t_opening_trajectory")


def _pop_std(values: np.ndarray) -> float:
    # population std; exactly 0.0 for identical repeats (no mean roundoff)
    if values.max() == values.min():
        return 0.0
    return float(values.std())


def _split_outliers(repeat_totals: list[float]) -> tuple[list[int], list[int]]:
    med = float(np.median(repeat_totals))
    included, excluded = [], []
    for i, t in enumerate(repeat_totals):
        (excluded if t > OUTLIER_FACTOR * med else included).append(i)
    return included, excluded


def _point(run: BenchRun) -> dict:
    repeat_totals = [rep.t_total for rep in run.repeats]
    included, excluded = _split_outliers(repeat_totals)
    kept = [run.repeats[i] for i in included]

    totals = np.array([rep.t_total for rep in kept])
    means = {}
    stds = {}
    for name in _COMPONENTS:
        per_repeat = np.array([rank_averages(list(rep.timings))[name] for rep in kept])
        means[name] = float(per_repeat.mean())
        stds[name] = _pop_std(per_repeat)

    stragglers = []
    if run.n_workers >= 2:
        for rep_idx in included:
            for verdict in detect_stragglers(
                list(run.repeats[rep_idx].timings), median_factor=DEFAULT_MEDIAN_FACTOR
            ):
                if verdict.flagged:
                    stragglers.append(
                        {
                            "repeat": rep_idx,
                            "rank": verdict.rank,
                            "t_n": verdict.t_n,
                            "threshold": verdict.threshold,
                        }
                    )

    detail_rep = run.repeats[included[0]] if included else run.repeats[0]
    rank_detail = [
        {
            "rank": t.rank,
            "t_comp": t.t_comp,
            "t_io": t.t_io,
            "t_comm": t.t_comm,
            "t_end_loop": t.t_end_loop,
            "t_opening_trajectory": t.t_opening_trajectory,
            "t_overhead1": t.t_overhead1,
            "t_overhead2": t.t_overhead2,
        }
        for t in detail_rep.timings
    ]

    return {
        "n_workers": run.n_workers,
        "t_total_mean": float(totals.mean()),
        "t_total_std": _pop_std(totals),
        "speedup": None,  # filled against the serial baseline
        "efficiency": None,
        "component_means": means,
        "component_stds": stds,
        "stragglers": stragglers,
        "excluded_repeats": excluded,
        "repeat_t_totals": [float(t) for t in repeat_totals],
        "rank_detail": rank_detail,
    }


def emit_report(
    runs: list[BenchRun],
    serial_timing: RankTiming,
    machine: str | None = None,
) -> dict:
    """Build the report document for one strategy's run set.

    ``serial_timing`` is the single-core baseline all speed-ups are relative
    to.  All runs must share one strategy and workload factor.
    """
    if not runs:
        raise ValueError("emit_report needs at least one completed run")
    strategies = {run.strategy for run in runs}
    workloads = {run.workload_factor for run in runs}
    if len(strategies) > 1 or len(workloads) > 1:
        raise ValueError("all runs in one report must share strategy and workload")

    t_serial = serial_timing.t_n
    points = []
    for run in sorted(runs, key=lambda r: r.n_workers):
        point = _point(run)
        point["speedup"] = t_serial / point["t_total_mean"]
        point["efficiency"] = point["speedup"] / run.n_workers
        points.append(point)

    advice = advise_strategy(ratio_comp_io(serial_timing.t_comp, serial_timing.t_io))
    return {
        "machine": machine if machine is not None else platform.node(),
        "strategy": runs[0].strategy.value,
        "workload_factor": runs[0].workload_factor,
        "repeats": len(runs[0].repeats),
        "serial": {
            "t_total": t_serial,
            "t_comp": serial_timing.t_comp,
            "t_io": serial_timing.t_io,
        },
        "points": points,
        "advice": advice.as_dict(),
    }


def write_report_json(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def write_timings_csv(runs: list[BenchRun], path) -> int:
    """One row per (repeat, rank) with all timing fields; returns row count."""
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("strategy", "n_workers", "workload_factor", "repeat") + RankTiming.FIELDS
        )
        for run in runs:
            for rep_idx, rep in enumerate(run.repeats):
                for timing in rep.timings:
                    writer.writerow(
                        (run.strategy.value, run.n_workers, run.workload_factor, rep_idx)
                        + timing.astuple()
                    )
                    rows += 1
    return rows
