"""Chart rendering for benchmark reports.

Every invocation on the same report bytes produces byte-identical SVG:
matplotlib's hash salt is pinned and the date stamp stripped.  One report
yields three charts: total time vs. workers, speed-up vs. workers with the
ideal line, and a per-rank stacked bar chart of the timing components in
fixed legend order.  Multiple reports overlay their curves on the first two
charts and get one per-rank chart each.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "trajbench"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["emit_plots", "SEGMENT_ORDER"]

#: Per-rank stacked-bar segments, bottom to top, with display labels.
SEGMENT_ORDER = (
    ("t_comp", "compute"),
    ("t_io", "read I/O"),
    ("t_comm", "communication"),
    ("t_end_loop", "end loop"),
    ("t_opening_trajectory", "opening trajectory"),
    ("t_overhead1", "overhead 1"),
    ("t_overhead2", "overhead 2"),
)

_SAVE_OPTS = {"metadata": {"Date": None}, "format": "svg"}


def _label(report: dict) -> str:
    label = f"{report['strategy']}"
    if report.get("workload_factor", 1) != 1:
        label += f" x{report['workload_factor']}"
    return label


def _total_chart(reports, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for report in reports:
        ns = [p["n_workers"] for p in report["points"]]
        means = [p["t_total_mean"] for p in report["points"]]
        stds = [p["t_total_std"] for p in report["points"]]
        ax.errorbar(ns, means, yerr=stds, marker="o", capsize=3, label=_label(report))
        for p in report["points"]:
            for idx in p["excluded_repeats"]:
                ax.plot(p["n_workers"], p["repeat_t_totals"][idx], "x", color="black")
    ax.set_xlabel("number of workers")
    ax.set_ylabel("total time to solution (s)")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log", base=2)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def _speedup_chart(reports, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    max_n = 1
    for report in reports:
        ns = [p["n_workers"] for p in report["points"]]
        speedups = [p["speedup"] for p in report["points"]]
        max_n = max(max_n, max(ns))
        ax.plot(ns, speedups, marker="o", label=_label(report))
    ax.plot([1, max_n], [1, max_n], linestyle="--", color="gray", label="ideal")
    ax.set_xlabel("number of workers")
    ax.set_ylabel("speed-up")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def _ranks_chart(report: dict, path) -> None:
    point = max(report["points"], key=lambda p: p["n_workers"])
    detail = point["rank_detail"]
    ranks = [row["rank"] for row in detail]
    fig, ax = plt.subplots(figsize=(max(5.5, 0.3 * len(ranks) + 2), 4))
    bottom = [0.0] * len(detail)
    for key, label in SEGMENT_ORDER:
        heights = [max(row[key], 0.0) for row in detail]
        ax.bar(ranks, heights, bottom=bottom, label=label, width=0.8)
        bottom = [b + h for b, h in zip(bottom, heights)]
    ax.set_xlabel("rank")
    ax.set_ylabel("time (s)")
    ax.set_title(f"{_label(report)}, N={point['n_workers']}")
    ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def emit_plots(reports, out_path) -> list[str]:
    """Render the chart set for one or more reports; returns written paths.

    ``out_path`` names the total-time chart; the speed-up and per-rank
    charts are written next to it with ``_speedup`` / ``_ranks`` suffixes.
    """
    if not reports:
        raise ValueError("emit_plots needs at least one report")
    for report in reports:
        if not report.get("points"):
            raise ValueError("report has no scaling points")
    out = Path(str(out_path))
    stem = out.with_suffix("")
    written = [str(out)]
    _total_chart(reports, out)
    speedup_path = f"{stem}_speedup{out.suffix or '.svg'}"
    _speedup_chart(reports, speedup_path)
    written.append(speedup_path)
    for i, report in enumerate(reports):
        suffix = "" if len(reports) == 1 else f"_{i}"
        ranks_path = f"{stem}_ranks{suffix}{out.suffix or '.svg'}"
        _ranks_chart(report, ranks_path)
        written.append(ranks_path)
    return written
