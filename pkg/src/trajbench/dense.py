"""DENSE trajectory format: fixed-stride T x 3N coordinate array.

Layout (little-endian)::

    u32  magic          0x4D444453
    u32  version        1
    u64  n_frames       T
    u32  n_atoms_stored
    u64  times_offset   byte position of the f32 time array (length T)
    u64  coords_offset  byte position of the coordinate block
    f32  times[T]
    f32  coords[T][3 * n_atoms_stored]   row-major

Frame ``i`` lives at ``coords_offset + i * 3 * n_atoms_stored * 4`` and is
read with one positioned read of exactly that many bytes, so concurrent
readers never contend: no scan, no lock.  The format carries no box; readers
report a zero box.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptFileError
from .model import CoordFrame, System
from .seq import seq_ensure_index, seq_scan

__all__ = [
    "DENSE_MAGIC",
    "DENSE_VERSION",
    "DenseHeader",
    "dense_write",
    "dense_read_frame",
    "DenseReader",
    "convert_seq_to_dense",
]

DENSE_MAGIC = 0x4D444453
DENSE_VERSION = 1

_HEADER = struct.Struct("<IIQIQQ")
HEADER_SIZE = _HEADER.size  # 36 bytes


@dataclass(frozen=True)
class DenseHeader:
    n_frames: int
    n_atoms_stored: int
    times_offset: int
    coords_offset: int

    @property
    def frame_nbytes(self) -> int:
        return 3 * self.n_atoms_stored * 4

    def coords_position(self, i: int) -> int:
        return self.coords_offset + i * self.frame_nbytes

    def expected_file_size(self) -> int:
        return self.coords_offset + self.n_frames * self.frame_nbytes

    def to_bytes(self) -> bytes:
        return _HEADER.pack(
            DENSE_MAGIC,
            DENSE_VERSION,
            self.n_frames,
            self.n_atoms_stored,
            self.times_offset,
            self.coords_offset,
        )

    @classmethod
    def from_file(cls, fh, path="<dense>") -> "DenseHeader":
        raw = fh.read(HEADER_SIZE)
        if len(raw) < HEADER_SIZE:
            raise CorruptFileError(f"{path}: truncated header")
        magic, version, n_frames, n_atoms, t_off, c_off = _HEADER.unpack(raw)
        if magic != DENSE_MAGIC:
            raise CorruptFileError(f"{path}: bad magic 0x{magic:08X}")
        if version != DENSE_VERSION:
            raise CorruptFileError(f"{path}: unsupported version {version}")
        return cls(n_frames, n_atoms, t_off, c_off)


def _layout(n_frames: int) -> tuple[int, int]:
    times_offset = HEADER_SIZE
    coords_offset = times_offset + 4 * n_frames
    return times_offset, coords_offset


def dense_write(path, times: np.ndarray, coords: np.ndarray) -> int:
    """Write a complete DENSE file from in-memory arrays; returns T.

    ``coords`` is (T, 3M) or (T, M, 3); both are stored as f32 rows.
    """
    times = np.asarray(times, dtype="<f4").reshape(-1)
    coords = np.asarray(coords, dtype="<f4")
    n_frames = len(times)
    coords = coords.reshape(n_frames, -1)
    if coords.shape[1] % 3 != 0:
        raise ValueError("coordinate row length must be a multiple of 3")
    t_off, c_off = _layout(n_frames)
    header = DenseHeader(n_frames, coords.shape[1] // 3, t_off, c_off)
    with open(path, "wb") as fh:
        fh.write(header.to_bytes())
        fh.write(times.tobytes())
        fh.write(coords.tobytes())
    return n_frames


class DenseReader:
    """Random-access reader for a DENSE file.

    Opening parses the header and loads the (small) time array; coordinate
    rows are fetched lazily with one positioned read each.
    """

    counts_io = True

    def __init__(self, path):
        self.path = str(path)
        self._fh = open(path, "rb")
        self.header = DenseHeader.from_file(self._fh, path)
        self._fh.seek(0, 2)
        actual = self._fh.tell()
        if actual != self.header.expected_file_size():
            raise CorruptFileError(
                f"{path}: file size {actual} does not match header "
                f"(expected {self.header.expected_file_size()})"
            )
        self._fh.seek(self.header.times_offset)
        self.times = np.frombuffer(
            self._fh.read(4 * self.header.n_frames), dtype="<f4"
        ).astype(np.float64)
        self._box = np.zeros((3, 3))

    @property
    def n_frames(self) -> int:
        return self.header.n_frames

    @property
    def n_atoms(self) -> int:
        return self.header.n_atoms_stored

    def read_frame(self, i: int) -> CoordFrame:
        if not 0 <= i < self.header.n_frames:
            raise IndexError(f"frame {i} out of range [0, {self.header.n_frames})")
        self._fh.seek(self.header.coords_position(i))
        raw = self._fh.read(self.header.frame_nbytes)
        if len(raw) < self.header.frame_nbytes:
            raise CorruptFileError(f"{self.path}: short read at frame {i}")
        xyz = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        return CoordFrame(
            frame_index=i,
            time=float(self.times[i]),
            box=self._box,
            positions=xyz.reshape(-1, 3),
        )

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def dense_read_frame(path, i: int) -> CoordFrame:
    """One-shot random-access read of frame ``i``."""
    with DenseReader(path) as reader:
        return reader.read_frame(i)


def convert_seq_to_dense(src, system: System, dst) -> int:
    """Convert a SEQ trajectory to DENSE, keeping only the mobile subset.

    The output stores ``3 * len(system.mobile_indices)`` coordinates per
    frame plus the per-frame times.  Returns the frame count.
    """
    index = seq_ensure_index(src)
    n_frames = index.n_frames
    mobile = system.mobile_indices
    t_off, c_off = _layout(n_frames)
    header = DenseHeader(n_frames, len(mobile), t_off, c_off)
    times = np.zeros(n_frames, dtype="<f4")
    with open(dst, "wb") as fh:
        fh.write(header.to_bytes())
        fh.write(times.tobytes())  # placeholder, rewritten below
        count = 0
        for frame in seq_scan(src):
            if frame.n_atoms != system.n_atoms:
                raise ValueError(
                    f"{src}: frame has {frame.n_atoms} atoms, topology says "
                    f"{system.n_atoms}"
                )
            times[count] = frame.time
            fh.write(frame.positions[mobile].astype("<f4").tobytes())
            count += 1
        if count != n_frames:
            raise CorruptFileError(f"{src}: index lists {n_frames} frames, read {count}")
        fh.seek(t_off)
        fh.write(times.tobytes())
    return count
