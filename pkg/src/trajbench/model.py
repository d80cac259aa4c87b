"""Shared domain types: frames, systems, block assignments, and timings.

Everything in here is an immutable value object that is cheap to copy and
safe to send between worker processes.  Coordinate units are nanometers,
time is picoseconds, all timings are 64-bit seconds from a monotonic clock.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Strategy",
    "CoordFrame",
    "System",
    "BlockAssignment",
    "RankTiming",
    "RepeatRecord",
    "BenchRun",
    "decompose_blocks",
    "OVERHEAD_TOLERANCE",
]

#: Slack allowed on the derived overhead fields before :meth:`RankTiming.check`
#: complains.  Overheads are differences of clock readings and can dip a hair
#: below zero on coarse clocks; one millisecond is far above any noise we see.
OVERHEAD_TOLERANCE = 1e-3


class Strategy(str, enum.Enum):
    """Trajectory access strategies supported by the parallel engine."""

    SHARED_SEQ = "shared_seq"
    SUBFILE = "subfile"
    DENSE_PARALLEL = "dense_parallel"
    CHAIN = "chain"
    IN_MEMORY = "in_memory"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CoordFrame:
    """One trajectory frame.

    Attributes
    ----------
    frame_index : int
        0-based position of the frame in its trajectory.
    time : float
        Frame time in picoseconds.
    box : (3, 3) ndarray
        Simulation box vectors in nanometers (all zeros when the storage
        format does not carry a box).
    positions : (n_atoms, 3) ndarray
        Cartesian coordinates in nanometers.
    """

    frame_index: int
    time: float
    box: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (n_atoms, 3), got {pos.shape}")
        if not np.isfinite(pos).all():
            raise ValueError("positions contain non-finite values")
        box = np.asarray(self.box, dtype=np.float64)
        if box.shape != (3, 3):
            raise ValueError(f"box must be (3, 3), got {box.shape}")
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")
        object.__setattr__(self, "positions", _as_readonly(pos))
        object.__setattr__(self, "box", _as_readonly(box))

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class System:
    """Static description of the analyzed system.

    ``mobile_indices`` selects the subgroup whose deviation from
    ``reference_positions`` is computed; ``atom_names`` carries one short
    label per selected atom (that is all the topology file stores).
    """

    n_atoms: int
    atom_names: tuple[str, ...]
    mobile_indices: np.ndarray
    reference_positions: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.mobile_indices, dtype=np.int64)
        ref = np.asarray(self.reference_positions, dtype=np.float64)
        if idx.ndim != 1:
            raise ValueError("mobile_indices must be one-dimensional")
        if len(idx) and (idx[0] < 0 or idx[-1] >= self.n_atoms):
            raise ValueError("mobile index out of range")
        if len(idx) > 1 and not (np.diff(idx) > 0).all():
            raise ValueError("mobile_indices must be strictly increasing")
        if ref.shape != (len(idx), 3):
            raise ValueError(
                f"reference_positions must be ({len(idx)}, 3), got {ref.shape}"
            )
        if len(self.atom_names) != len(idx):
            raise ValueError("need one atom name per mobile index")
        object.__setattr__(self, "mobile_indices", _as_readonly(idx))
        object.__setattr__(self, "reference_positions", _as_readonly(ref))
        object.__setattr__(self, "atom_names", tuple(self.atom_names))

    @property
    def n_mobile(self) -> int:
        return len(self.mobile_indices)


@dataclass(frozen=True)
class BlockAssignment:
    """Contiguous half-open frame range [start, stop) owned by one rank."""

    rank: int
    start: int
    stop: int

    def __post_init__(self):
        if self.rank < 0:
            raise ValueError("rank must be non-negative")
        if not 0 <= self.start <= self.stop:
            raise ValueError(f"invalid block [{self.start}, {self.stop})")

    @property
    def n_frames(self) -> int:
        return self.stop - self.start


def decompose_blocks(n_frames_total: int, n_workers: int) -> list[BlockAssignment]:
    """Split ``[0, n_frames_total)`` into one contiguous block per worker.

    Block sizes differ by at most one frame; the remainder goes to the
    lowest-numbered ranks.  Trailing blocks may be empty when there are more
    workers than frames.
    """
    if n_workers < 1:
        raise ValueError(f"n_workers must be >= 1, got {n_workers}")
    if n_frames_total < 0:
        raise ValueError(f"n_frames_total must be >= 0, got {n_frames_total}")
    base, extra = divmod(n_frames_total, n_workers)
    blocks = []
    start = 0
    for rank in range(n_workers):
        size = base + (1 if rank < extra else 0)
        blocks.append(BlockAssignment(rank=rank, start=start, stop=start + size))
        start += size
    return blocks


@dataclass(frozen=True)
class RankTiming:
    """All per-rank timing quantities collected for one run.

    The three derived fields are fixed by construction:

    * ``t_n = t_rmsd + t_comm``
    * ``t_overhead1 = t_all_frame - t_io - t_comp - t_end_loop``
    * ``t_overhead2 = t_rmsd - t_all_frame - t_opening_trajectory``

    Use :meth:`build` so the identities cannot drift; :meth:`check` verifies
    them on records that crossed a process boundary.
    """

    rank: int
    t_opening_trajectory: float
    t_io: float
    t_comp: float
    t_end_loop: float
    t_all_frame: float
    t_rmsd: float
    t_comm: float
    t_overhead1: float
    t_overhead2: float
    t_n: float
    n_frames_processed: int

    #: wire/CSV field order; keep in sync with the dataclass declaration.
    FIELDS = (
        "rank",
        "t_opening_trajectory",
        "t_io",
        "t_comp",
        "t_end_loop",
        "t_all_frame",
        "t_rmsd",
        "t_comm",
        "t_overhead1",
        "t_overhead2",
        "t_n",
        "n_frames_processed",
    )

    @classmethod
    def build(
        cls,
        rank: int,
        t_opening_trajectory: float,
        t_io: float,
        t_comp: float,
        t_end_loop: float,
        t_all_frame: float,
        t_rmsd: float,
        t_comm: float,
        n_frames_processed: int,
    ) -> "RankTiming":
        """Construct a record with the derived fields computed in place."""
        return cls(
            rank=rank,
            t_opening_trajectory=t_opening_trajectory,
            t_io=t_io,
            t_comp=t_comp,
            t_end_loop=t_end_loop,
            t_all_frame=t_all_frame,
            t_rmsd=t_rmsd,
            t_comm=t_comm,
            t_overhead1=t_all_frame - t_io - t_comp - t_end_loop,
            t_overhead2=t_rmsd - t_all_frame - t_opening_trajectory,
            t_n=t_rmsd + t_comm,
            n_frames_processed=n_frames_processed,
        )

    def replace_comm(self, t_comm: float) -> "RankTiming":
        """Return a copy with the final communication time filled in."""
        return self.build(
            rank=self.rank,
            t_opening_trajectory=self.t_opening_trajectory,
            t_io=self.t_io,
            t_comp=self.t_comp,
            t_end_loop=self.t_end_loop,
            t_all_frame=self.t_all_frame,
            t_rmsd=self.t_rmsd,
            t_comm=t_comm,
            n_frames_processed=self.n_frames_processed,
        )

    def check(self) -> None:
        """Raise ``ValueError`` if the construction identities do not hold."""
        raw = (
            self.t_opening_trajectory,
            self.t_io,
            self.t_comp,
            self.t_end_loop,
            self.t_all_frame,
            self.t_rmsd,
            self.t_comm,
        )
        if any(t < 0 for t in raw):
            raise ValueError(f"rank {self.rank}: negative raw timing {raw}")
        if self.t_n != self.t_rmsd + self.t_comm:
            raise ValueError(f"rank {self.rank}: t_n identity violated")
        if self.t_overhead1 != self.t_all_frame - self.t_io - self.t_comp - self.t_end_loop:
            raise ValueError(f"rank {self.rank}: overhead1 identity violated")
        if self.t_overhead2 != self.t_rmsd - self.t_all_frame - self.t_opening_trajectory:
            raise ValueError(f"rank {self.rank}: overhead2 identity violated")
        if self.t_overhead1 < -OVERHEAD_TOLERANCE or self.t_overhead2 < -OVERHEAD_TOLERANCE:
            raise ValueError(
                f"rank {self.rank}: overhead below clock-noise tolerance "
                f"({self.t_overhead1:.6f}, {self.t_overhead2:.6f})"
            )

    def astuple(self) -> tuple:
        return tuple(getattr(self, name) for name in self.FIELDS)


@dataclass(frozen=True)
class RepeatRecord:
    """One repeat of a benchmark run: per-rank timings plus the gathered result."""

    timings: tuple[RankTiming, ...]
    rmsd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "timings", tuple(self.timings))
        object.__setattr__(
            self, "rmsd", _as_readonly(np.asarray(self.rmsd, dtype=np.float64))
        )

    @property
    def t_total(self) -> float:
        return max(t.t_n for t in self.timings)


@dataclass(frozen=True)
class BenchRun:
    """All repeats of one (strategy, n_workers, workload) benchmark point."""

    strategy: Strategy
    n_workers: int
    workload_factor: int
    repeats: tuple[RepeatRecord, ...]
    n_frames_total: int

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "repeats", tuple(self.repeats))
        if self.workload_factor < 1:
            raise ValueError("workload_factor must be >= 1")
        for i, rep in enumerate(self.repeats):
            if len(rep.timings) != self.n_workers:
                raise ValueError(
                    f"repeat {i}: expected {self.n_workers} timing records, "
                    f"got {len(rep.timings)}"
                )
            if len(rep.rmsd) != self.n_frames_total:
                raise ValueError(
                    f"repeat {i}: gathered array has length {len(rep.rmsd)}, "
                    f"expected {self.n_frames_total}"
                )
