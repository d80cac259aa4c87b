"""Split-apply-combine parallel executor.

One orchestrator process decomposes the trajectory into contiguous frame
blocks, spawns one single-threaded worker process per block, and gathers
results and timings back to itself (rank 0).  Workers talk to the
orchestrator over duplex pipes carrying the checksummed wire frames from
:mod:`trajbench.wire`; the assembled result is keyed by rank, so arrival
order never matters.

Per strategy a worker opens its trajectory view as follows (everything in
this step is timed as ``t_opening_trajectory``):

* ``shared_seq``    open the one shared file and load its offset index
* ``subfile``       open only the worker's own segment file
* ``dense_parallel``open the dense file; frame offsets are computed
* ``chain``         open every segment and load every segment index
* ``in_memory``     nothing: the block's synthetic coordinates are generated
                    before timing starts, and both ``t_opening_trajectory``
                    and ``t_io`` are identically zero

The communication time is measured on the worker from initiating the send
of its gather message until the orchestrator's receipt is acknowledged, and
reported in one trailing frame; the orchestrator folds it into the final
timing record, preserving ``t_n = t_rmsd + t_comm`` exactly.
"""

from __future__ import annotations

import multiprocessing
import multiprocessing.connection
import struct
import time as _time
import traceback
from dataclasses import dataclass

import numpy as np

from . import wire
from .chain import ChainReader
from .dense import DenseReader, dense_write
from .errors import BlockReadError, RunTimeoutError, TrajbenchError, WorkerError
from .model import (
    BlockAssignment,
    CoordFrame,
    RankTiming,
    Strategy,
    System,
    decompose_blocks,
)
from .rmsd import block_rmsd
from .seq import SeqReader, SeqStreamReader, seq_ensure_index, seq_write
from .topology import read_topology

__all__ = [
    "StrategyConfig",
    "run_parallel",
    "run_serial",
    "generate_synthetic",
    "synthetic_system",
    "assemble_rmsd",
    "BOX_NM",
    "DEFAULT_DT",
]

#: Edge length of the cubic box synthetic coordinates are drawn from (nm).
BOX_NM = 10.0
#: Time step between synthetic frames (ps).
DEFAULT_DT = 1.0

_BOX = np.diag([BOX_NM, BOX_NM, BOX_NM])


@dataclass(frozen=True)
class StrategyConfig:
    """Everything a run needs: strategy, inputs, worker count, workload."""

    strategy: Strategy
    trajectory_paths: tuple[str, ...] = ()
    topology_path: str | None = None
    n_workers: int = 1
    workload_factor: int = 1
    seed: int | None = None
    n_frames: int | None = None
    n_atoms: int | None = None
    n_mobile: int = 146
    skip_index_validation: bool = False
    timeout_s: float = 600.0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(
            self, "trajectory_paths", tuple(str(p) for p in self.trajectory_paths)
        )

    def validate(self) -> None:
        if self.n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        if self.workload_factor < 1:
            raise ValueError("workload_factor must be >= 1")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        s = self.strategy
        if s is Strategy.IN_MEMORY:
            if self.seed is None or self.n_frames is None or self.n_atoms is None:
                raise ValueError("in_memory needs seed, n_frames and n_atoms")
            if self.n_frames < 0:
                raise ValueError("n_frames must be >= 0")
            if not 3 <= self.n_mobile <= self.n_atoms:
                raise ValueError("need 3 <= n_mobile <= n_atoms")
            return
        if not self.trajectory_paths:
            raise ValueError(f"{s} needs at least one trajectory path")
        if s in (Strategy.SHARED_SEQ, Strategy.DENSE_PARALLEL):
            if len(self.trajectory_paths) != 1:
                raise ValueError(f"{s} takes exactly one trajectory file")
        if s is Strategy.SUBFILE and len(self.trajectory_paths) != self.n_workers:
            raise ValueError(
                f"subfile needs one segment per worker "
                f"({len(self.trajectory_paths)} segments, {self.n_workers} workers)"
            )
        if self.topology_path is None:
            raise ValueError(f"{s} needs a topology file")


def _synth_positions(seed: int, frame_index: int, n_atoms: int) -> np.ndarray:
    rng = np.random.default_rng([seed, frame_index])
    return rng.uniform(0.0, BOX_NM, (n_atoms, 3))


def _synth_frame(seed: int, i: int, n_atoms: int, dt: float = DEFAULT_DT) -> CoordFrame:
    return CoordFrame(
        frame_index=i, time=i * dt, box=_BOX, positions=_synth_positions(seed, i, n_atoms)
    )


def synthetic_system(n_atoms: int, n_mobile: int, seed: int) -> System:
    """System matching a synthetic trajectory; frame 0 doubles as reference."""
    if not 3 <= n_mobile <= n_atoms:
        raise ValueError("need 3 <= n_mobile <= n_atoms")
    mobile = np.array([i * n_atoms // n_mobile for i in range(n_mobile)], dtype=np.int64)
    reference = _synth_positions(seed, 0, n_atoms)[mobile]
    return System(
        n_atoms=n_atoms,
        atom_names=tuple(f"A{int(j)}" for j in mobile),
        mobile_indices=mobile,
        reference_positions=reference,
    )


def generate_synthetic(
    n_frames: int,
    n_atoms: int,
    seed: int,
    path,
    fmt: str = "seq",
    precision: float = 1000.0,
    dt: float = DEFAULT_DT,
) -> int:
    """Write a deterministic synthetic trajectory; returns the frame count.

    Coordinates are drawn uniformly from a 10 nm cubic box with a per-frame
    generator keyed on ``(seed, frame_index)``, so any frame range can be
    regenerated independently and the same seed always yields byte-identical
    files.
    """
    if n_frames < 0:
        raise ValueError("n_frames must be >= 0")
    frames = (_synth_frame(seed, i, n_atoms, dt) for i in range(n_frames))
    if fmt == "seq":
        return seq_write(frames, precision, path)
    if fmt == "dense":
        times = np.fromiter((i * dt for i in range(n_frames)), dtype="<f4", count=n_frames)
        coords = np.empty((n_frames, 3 * n_atoms), dtype="<f4")
        for i, frame in enumerate(frames):
            coords[i] = frame.positions.reshape(-1)
        return dense_write(path, times, coords)
    raise ValueError(f"unknown format {fmt!r}")


class InMemoryReader:
    """Trajectory view over synthetic coordinates generated up front.

    Generation happens in ``__init__`` so it can be excluded from all
    timings; reads are array slices and are not counted as I/O.
    """

    counts_io = False

    def __init__(self, seed: int, block: BlockAssignment, n_atoms: int,
                 dt: float = DEFAULT_DT):
        self.block = block
        self.dt = dt
        self.n_atoms = n_atoms
        self._coords = np.empty((block.n_frames, n_atoms, 3))
        for k, i in enumerate(range(block.start, block.stop)):
            self._coords[k] = _synth_positions(seed, i, n_atoms)

    def read_frame(self, i: int) -> CoordFrame:
        if not self.block.start <= i < self.block.stop:
            raise IndexError(f"frame {i} outside block [{self.block.start}, {self.block.stop})")
        return CoordFrame(
            frame_index=i,
            time=i * self.dt,
            box=_BOX,
            positions=self._coords[i - self.block.start],
        )

    def close(self) -> None:
        pass


def _effective_system(system: System, reader_n_atoms: int) -> System:
    """Remap the mobile selection when the file stores only the subset."""
    if reader_n_atoms == system.n_atoms:
        return system
    if reader_n_atoms == system.n_mobile:
        return System(
            n_atoms=system.n_mobile,
            atom_names=system.atom_names,
            mobile_indices=np.arange(system.n_mobile, dtype=np.int64),
            reference_positions=system.reference_positions,
        )
    raise ValueError(
        f"trajectory stores {reader_n_atoms} atoms; topology describes "
        f"{system.n_atoms} (selection {system.n_mobile})"
    )


def _open_view(config: StrategyConfig, block: BlockAssignment, serial: bool):
    """Open the strategy's trajectory view; returns (reader, system).

    Must be called inside the worker's opening timer; the in-memory strategy
    never reaches this function.
    """
    system = read_topology(config.topology_path)
    s = config.strategy
    if s is Strategy.SHARED_SEQ:
        reader = SeqReader(config.trajectory_paths[0],
                           validate=not config.skip_index_validation)
    elif s is Strategy.SUBFILE:
        if serial:
            reader = ChainReader(config.trajectory_paths,
                                 skip_validation=config.skip_index_validation)
        else:
            reader = SeqStreamReader(config.trajectory_paths[block.rank],
                                     first_global_index=block.start)
    elif s is Strategy.CHAIN:
        reader = ChainReader(config.trajectory_paths,
                             skip_validation=config.skip_index_validation)
    elif s is Strategy.DENSE_PARALLEL:
        reader = DenseReader(config.trajectory_paths[0])
    else:  # pragma: no cover - IN_MEMORY handled by callers
        raise ValueError(f"no file view for strategy {s}")
    # a forward-only segment reader learns its atom count from the first
    # record; everything it stores is the full system, so no remapping
    stored = getattr(reader, "n_atoms", 0)
    try:
        eff = _effective_system(system, stored) if stored else system
    except ValueError:
        reader.close()
        raise
    return reader, eff


def _run_block(config: StrategyConfig, block: BlockAssignment, serial: bool):
    """Execute one block; returns (rmsd, times, timing-with-zero-comm)."""
    clock = _time.perf_counter
    if config.strategy is Strategy.IN_MEMORY:
        system = synthetic_system(config.n_atoms, config.n_mobile, config.seed)
        reader = InMemoryReader(config.seed, block, config.n_atoms)
        t0 = clock()
        t_open = 0.0
    else:
        t0 = clock()
        reader, system = _open_view(config, block, serial)
        t_open = clock() - t0
    results, partial = block_rmsd(reader, system, block, config.workload_factor)
    t_rmsd = clock() - t0
    timing = RankTiming.build(
        rank=block.rank,
        t_opening_trajectory=t_open,
        t_io=partial.t_io,
        t_comp=partial.t_comp,
        t_end_loop=partial.t_end_loop,
        t_all_frame=partial.t_all_frame,
        t_rmsd=t_rmsd,
        t_comm=0.0,
        n_frames_processed=partial.n_frames_processed,
    )
    rmsd = np.array([r.rmsd for r in results])
    times = np.array([r.time for r in results])
    return rmsd, times, timing


def _worker_entry(config: StrategyConfig, block: BlockAssignment, conn) -> None:
    clock = _time.perf_counter
    try:
        rmsd, times, timing = _run_block(config, block, serial=False)
        msg = wire.GatherMessage(
            rank=block.rank, start=block.start, stop=block.stop,
            rmsd=rmsd, times=times, timing=timing,
        )
        payload = wire.encode_gather_message(msg)
        t0 = clock()
        conn.send_bytes(wire.frame_bytes(payload))
        ack = wire.parse_frame(conn.recv_bytes())
        if ack != wire.ACK:
            raise RuntimeError(f"unexpected acknowledgement {ack!r}")
        t_comm = clock() - t0
        conn.send_bytes(wire.frame_bytes(struct.pack("<d", t_comm)))
    except BlockReadError as exc:
        _send_error(conn, block, wire.STATUS_READ_ERROR, str(exc))
    except Exception:
        _send_error(conn, block, wire.STATUS_FAILURE,
                    traceback.format_exc(limit=8))
    finally:
        conn.close()


def _send_error(conn, block: BlockAssignment, status: int, cause: str) -> None:
    try:
        zero = RankTiming.build(block.rank, 0, 0, 0, 0, 0, 0, 0, 0)
        msg = wire.GatherMessage(
            rank=block.rank, start=block.start, stop=block.stop,
            rmsd=np.zeros(0), times=np.zeros(0), timing=zero, status=status,
        )
        conn.send_bytes(wire.frame_bytes(wire.encode_gather_message(msg)))
        conn.send_bytes(wire.frame_bytes(cause.encode("utf-8")))
    except (BrokenPipeError, OSError):  # orchestrator already gone
        pass


def _plan(config: StrategyConfig) -> tuple[int, list[BlockAssignment]]:
    """Total frame count and block assignments; builds any missing indexes.

    Index construction happens here, once, before workers start, so
    concurrent sidecar writes cannot occur.
    """
    s = config.strategy
    if s is Strategy.IN_MEMORY:
        total = config.n_frames
    elif s is Strategy.DENSE_PARALLEL:
        with DenseReader(config.trajectory_paths[0]) as r:
            total = r.n_frames
    else:
        validate = not config.skip_index_validation
        counts = [
            seq_ensure_index(p, validate=validate).n_frames
            for p in config.trajectory_paths
        ]
        total = sum(counts)
        if s is Strategy.SUBFILE:
            blocks = []
            start = 0
            for rank, count in enumerate(counts):
                blocks.append(BlockAssignment(rank=rank, start=start, stop=start + count))
                start += count
            return total, blocks
    return total, decompose_blocks(total, config.n_workers)


def assemble_rmsd(messages, n_frames_total: int) -> np.ndarray:
    """Combine gather messages into one array, keyed by block, not arrival."""
    out = np.full(n_frames_total, np.nan)
    for msg in messages:
        out[msg.start : msg.stop] = msg.rmsd
    if np.isnan(out).any():
        raise TrajbenchError("gathered blocks do not cover the trajectory")
    return out


def run_serial(config: StrategyConfig) -> tuple[np.ndarray, RankTiming]:
    """Single-process run over the whole trajectory (the t_total(1) baseline)."""
    config.validate()
    total, _ = _plan(config)
    block = BlockAssignment(rank=0, start=0, stop=total)
    rmsd, _times, timing = _run_block(config, block, serial=True)
    timing.check()
    return rmsd, timing


def run_parallel(config: StrategyConfig) -> tuple[np.ndarray, list[RankTiming]]:
    """Run the block decomposition on worker processes and gather to rank 0.

    Returns the assembled full-length RMSD array and one finalized
    :class:`RankTiming` per rank.  Raises :class:`WorkerError` if any worker
    fails and :class:`RunTimeoutError` when the configured wall-clock limit
    is exceeded.
    """
    config.validate()
    total, blocks = _plan(config)
    ctx = multiprocessing.get_context("fork")
    deadline = _time.perf_counter() + config.timeout_s

    conns: dict[int, object] = {}
    procs: dict[int, object] = {}
    try:
        for block in blocks:
            parent, child = ctx.Pipe(duplex=True)
            proc = ctx.Process(
                target=_worker_entry, args=(config, block, child), daemon=True
            )
            proc.start()
            child.close()
            conns[block.rank] = parent
            procs[block.rank] = proc

        messages, timings = _gather(conns, procs, deadline)
    finally:
        for proc in procs.values():
            if proc.is_alive():
                proc.terminate()
        for conn in conns.values():
            conn.close()
        for proc in procs.values():
            proc.join()

    rmsd = assemble_rmsd(messages.values(), total)
    ordered = [timings[rank] for rank in sorted(timings)]
    for t in ordered:
        t.check()
    return rmsd, ordered


def _gather(conns, procs, deadline):
    """Receive every worker's message, acknowledge, and collect comm times."""
    phase = {rank: "message" for rank in conns}
    messages: dict[int, wire.GatherMessage] = {}
    timings: dict[int, RankTiming] = {}
    pending = set(conns)

    while pending:
        remaining = deadline - _time.perf_counter()
        if remaining <= 0:
            raise RunTimeoutError(
                f"run exceeded its time limit with ranks {sorted(pending)} pending"
            )
        waitables = [conns[r] for r in pending] + [procs[r].sentinel for r in pending]
        ready = multiprocessing.connection.wait(waitables, timeout=min(remaining, 0.5))
        rank_of_conn = {conns[r]: r for r in pending}
        rank_of_sentinel = {procs[r].sentinel: r for r in pending}
        for obj in ready:
            if obj in rank_of_conn:
                rank = rank_of_conn[obj]
                if rank not in pending:
                    continue
                _advance_rank(rank, conns[rank], phase, messages, timings, pending)
            elif obj in rank_of_sentinel:
                rank = rank_of_sentinel[obj]
                if rank not in pending:
                    continue
                if conns[rank].poll(0):
                    continue  # death after flushing; drain on next pass
                procs[rank].join(timeout=1.0)
                raise WorkerError(
                    rank,
                    f"worker exited with code {procs[rank].exitcode} "
                    "before reporting a result",
                )
    return messages, timings


def _advance_rank(rank, conn, phase, messages, timings, pending):
    try:
        data = conn.recv_bytes()
    except EOFError:
        raise WorkerError(rank, "connection closed before the result arrived")
    payload = wire.parse_frame(data)
    if phase[rank] == "message":
        msg = wire.decode_gather_message(payload)
        if msg.rank != rank:
            raise WorkerError(rank, f"message claims rank {msg.rank}")
        if msg.status != wire.STATUS_OK:
            phase[rank] = "cause"
            messages[rank] = msg
            return
        messages[rank] = msg
        conn.send_bytes(wire.frame_bytes(wire.ACK))
        phase[rank] = "tcomm"
    elif phase[rank] == "tcomm":
        (t_comm,) = struct.unpack("<d", payload)
        timings[rank] = messages[rank].timing.replace_comm(t_comm)
        pending.discard(rank)
    else:  # cause text for a failed worker
        raise WorkerError(rank, payload.decode("utf-8", errors="replace"))
