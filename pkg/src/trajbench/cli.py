"""Command-line entry point wiring the library into reproducible experiments.

Subcommands: ``generate`` (synthetic trajectory + topology), ``split``
(subfiling), ``convert`` (SEQ to DENSE), ``bench`` (serial baseline plus
repeated parallel runs, report emission) and ``report`` (chart rendering).
Exit codes: 0 success, 1 usage error, 2 runtime error.  The environment
variable ``TRAJBENCH_TMPDIR`` selects the scratch space used for derived
inputs (auto-split segments, auto-converted dense files).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from .dense import DenseReader, convert_seq_to_dense
from .engine import (
    StrategyConfig,
    generate_synthetic,
    run_parallel,
    run_serial,
    synthetic_system,
)
from .errors import TrajbenchError
from .model import BenchRun, RepeatRecord, Strategy, System
from .plots import emit_plots
from .report import emit_report, write_report_json, write_timings_csv
from .seq import SEQ_MAGIC, SeqReader, split_trajectory
from .topology import TOPOLOGY_SUFFIX, read_topology, write_topology

__all__ = ["main", "entry"]

log = logging.getLogger("trajbench")

DEFAULT_PRECISION = 1000.0
DEFAULT_REPEATS = 5
DEFAULT_WORKLOAD = 1
DEFAULT_MOBILE = 146


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def scratch_dir() -> Path:
    path = Path(os.environ.get("TRAJBENCH_TMPDIR", tempfile.gettempdir()))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _build_parser() -> _Parser:
    parser = _Parser(prog="trajbench", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", dest="global_seed", type=int, default=0,
                        help="default RNG seed for commands that take one")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--out", type=Path, default=None,
                        help="directory that relative output paths resolve into")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic trajectory + topology")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--atoms", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--precision", type=float, default=DEFAULT_PRECISION)
    p.add_argument("--format", choices=("seq", "dense"), default="seq")
    p.add_argument("--mobile", type=int, default=DEFAULT_MOBILE,
                   help="size of the mobile selection stored in the topology")
    p.add_argument("path", type=Path)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("split", help="split a SEQ trajectory into segments")
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("src", type=Path)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("convert", help="convert SEQ to DENSE (mobile subset only)")
    p.add_argument("src", type=Path)
    p.add_argument("topology", type=Path)
    p.add_argument("dst", type=Path)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("bench", help="serial baseline + repeated parallel runs")
    p.add_argument("--strategy", required=True,
                   choices=[s.value for s in Strategy])
    p.add_argument("--workers", type=int, required=True)
    p.add_argument("--repeats", type=int, default=DEFAULT_REPEATS)
    p.add_argument("--workload", type=int, default=DEFAULT_WORKLOAD)
    p.add_argument("--topology", type=Path, default=None)
    p.add_argument("--report", type=Path, required=True,
                   help="report JSON output (a CSV sibling is written too)")
    p.add_argument("--frames", type=int, default=None, help="in_memory: frame count")
    p.add_argument("--atoms", type=int, default=None, help="in_memory: atom count")
    p.add_argument("--mobile", type=int, default=DEFAULT_MOBILE)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--timeout", type=float, default=600.0)
    p.add_argument("--skip-index-validation", action="store_true")
    p.add_argument("trajectories", nargs="*", type=Path)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="render charts from report JSON files")
    p.add_argument("--plot", type=Path, required=True)
    p.add_argument("reports", nargs="+", type=Path)
    p.set_defaults(func=cmd_report)

    return parser


def _resolve_out(args, path: Path) -> Path:
    if args.out is not None and not path.is_absolute():
        args.out.mkdir(parents=True, exist_ok=True)
        return args.out / path
    return path


def _sniff_magic(path) -> int:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if len(head) < 4:
        return 0
    return int.from_bytes(head, "little")


def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else args.global_seed
    path = _resolve_out(args, args.path)
    count = generate_synthetic(
        args.frames, args.atoms, seed, path,
        fmt=args.format, precision=args.precision,
    )
    system = synthetic_system(args.atoms, args.mobile, seed)
    if count > 0:
        # reference = decoded frame 0, so it matches what readers will see
        if args.format == "seq":
            with SeqReader(path) as reader:
                frame0 = reader.read_frame(0)
        else:
            with DenseReader(path) as reader:
                frame0 = reader.read_frame(0)
        system = System(
            n_atoms=system.n_atoms,
            atom_names=system.atom_names,
            mobile_indices=system.mobile_indices,
            reference_positions=frame0.positions[system.mobile_indices],
        )
    topo_path = Path(str(path) + TOPOLOGY_SUFFIX)
    write_topology(topo_path, system)
    print(f"wrote {count} frames to {path} (topology: {topo_path})")
    return 0


def cmd_split(args) -> int:
    paths, seconds = split_trajectory(args.src, args.segments)
    print(f"wrote {len(paths)} segments in {seconds:.3f} s")
    for p in paths:
        print(f"  {p}")
    return 0


def cmd_convert(args) -> int:
    system = read_topology(args.topology)
    dst = _resolve_out(args, args.dst)
    count = convert_seq_to_dense(args.src, system, dst)
    print(f"converted {count} frames ({3 * system.n_mobile} columns) to {dst}")
    return 0


def _prepare_bench_inputs(args, strategy: Strategy) -> list[Path]:
    """Derive missing inputs (segments, dense file) into scratch space."""
    paths = list(args.trajectories)
    if strategy is Strategy.SUBFILE and len(paths) == 1 and args.workers > 1:
        work = Path(tempfile.mkdtemp(prefix="trajbench-", dir=scratch_dir()))
        copy = work / Path(paths[0]).name
        copy.write_bytes(Path(paths[0]).read_bytes())
        segs, seconds = split_trajectory(copy, args.workers)
        log.info("auto-split %s into %d segments in %.3f s", paths[0], len(segs), seconds)
        return [Path(s) for s in segs]
    if strategy is Strategy.DENSE_PARALLEL and len(paths) == 1:
        if _sniff_magic(paths[0]) == SEQ_MAGIC:
            system = read_topology(args.topology)
            work = Path(tempfile.mkdtemp(prefix="trajbench-", dir=scratch_dir()))
            dense_path = work / (Path(paths[0]).stem + ".dense")
            convert_seq_to_dense(paths[0], system, dense_path)
            log.info("auto-converted %s to %s", paths[0], dense_path)
            return [dense_path]
    return paths


def cmd_bench(args) -> int:
    strategy = Strategy(args.strategy)
    seed = args.seed if args.seed is not None else args.global_seed
    if strategy is not Strategy.IN_MEMORY:
        if not args.trajectories:
            raise TrajbenchError(f"{strategy} needs at least one trajectory file")
        if args.topology is None:
            guess = Path(str(args.trajectories[0]) + TOPOLOGY_SUFFIX)
            if not guess.exists():
                raise TrajbenchError("no --topology given and no sidecar found")
            args.topology = guess
        args.trajectories = _prepare_bench_inputs(args, strategy)

    config = StrategyConfig(
        strategy=strategy,
        trajectory_paths=tuple(str(p) for p in args.trajectories),
        topology_path=str(args.topology) if args.topology else None,
        n_workers=args.workers,
        workload_factor=args.workload,
        seed=seed,
        n_frames=args.frames,
        n_atoms=args.atoms,
        n_mobile=args.mobile,
        skip_index_validation=args.skip_index_validation,
        timeout_s=args.timeout,
    )
    config.validate()

    log.info("measuring serial baseline")
    serial_rmsd, serial_timing = run_serial(config)
    repeats = []
    for r in range(args.repeats):
        log.info("parallel repeat %d/%d", r + 1, args.repeats)
        rmsd, timings = run_parallel(config)
        repeats.append(RepeatRecord(timings=tuple(timings), rmsd=rmsd))

    run = BenchRun(
        strategy=strategy,
        n_workers=args.workers,
        workload_factor=args.workload,
        repeats=tuple(repeats),
        n_frames_total=len(serial_rmsd),
    )
    report = emit_report([run], serial_timing)
    report_path = _resolve_out(args, args.report)
    write_report_json(report, report_path)
    csv_path = report_path.with_suffix(".csv")
    rows = write_timings_csv([run], csv_path)

    point = report["points"][0]
    print(
        f"strategy={strategy} N={args.workers} X={args.workload} "
        f"t_serial={serial_timing.t_n:.3f}s "
        f"t_total={point['t_total_mean']:.3f}s "
        f"S={point['speedup']:.2f} E={point['efficiency']:.2f}"
    )
    print(f"report: {report_path} ({rows} timing rows in {csv_path})")
    return 0


def cmd_report(args) -> int:
    reports = []
    for p in args.reports:
        with open(p, "r", encoding="utf-8") as fh:
            reports.append(json.load(fh))
    out = _resolve_out(args, args.plot)
    written = emit_plots(reports, out)
    for path in written:
        print(f"chart: {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (TrajbenchError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"trajbench: error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:  # console-script hook
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
