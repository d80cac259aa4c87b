"""Virtual concatenation of SEQ segment files.

The chain reader presents a list of segments as one trajectory.  Opening is
deliberately eager: the offset index of *every* segment is loaded (or built)
and every file handle is opened at construction time, which is exactly the
cost profile that makes chained access expensive at scale.  Stale-index
validation can be skipped with ``skip_validation=True`` for measurements
where the sidecars are known to be fresh and concurrent revalidation must be
avoided.
"""

from __future__ import annotations

import numpy as np

from .model import CoordFrame
from .seq import SeqReader, seq_ensure_index

__all__ = ["ChainReader", "chain_open"]


class ChainReader:
    """Read a list of SEQ segments as one virtual trajectory."""

    counts_io = True

    def __init__(self, paths, skip_validation: bool = False):
        if not paths:
            raise ValueError("chain needs at least one segment")
        self.paths = [str(p) for p in paths]
        self._readers = []
        try:
            for p in self.paths:
                index = seq_ensure_index(p, validate=not skip_validation)
                self._readers.append(SeqReader(p, index))
        except Exception:
            self.close()
            raise
        atom_counts = {r.n_atoms for r in self._readers if r.n_frames}
        if len(atom_counts) > 1:
            self.close()
            raise ValueError(
                f"segments disagree on atom count: {sorted(atom_counts)}"
            )
        lengths = [r.n_frames for r in self._readers]
        self._starts = np.zeros(len(lengths), dtype=np.int64)
        np.cumsum(lengths[:-1], out=self._starts[1:])
        self.n_frames = int(sum(lengths))
        self.n_atoms = atom_counts.pop() if atom_counts else 0

    def map_global(self, g: int) -> tuple[int, int]:
        """Map a global frame index to ``(segment, local index)``."""
        if not 0 <= g < self.n_frames:
            raise IndexError(f"frame {g} out of range [0, {self.n_frames})")
        # 'right' skips empty segments, whose starts collide with a neighbor
        seg = int(np.searchsorted(self._starts, g, side="right")) - 1
        return seg, g - int(self._starts[seg])

    def read_frame(self, g: int) -> CoordFrame:
        seg, local = self.map_global(g)
        frame = self._readers[seg].read_frame(local)
        if frame.frame_index == g:
            return frame
        # segments produced by other tools may number frames locally
        return CoordFrame(
            frame_index=g,
            time=frame.time,
            box=frame.box,
            positions=frame.positions,
        )

    def close(self) -> None:
        for r in getattr(self, "_readers", []):
            try:
                r.close()
            except OSError:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def chain_open(paths, skip_validation: bool = False) -> ChainReader:
    """Open segment files as one virtual trajectory (see :class:`ChainReader`)."""
    return ChainReader(paths, skip_validation=skip_validation)
