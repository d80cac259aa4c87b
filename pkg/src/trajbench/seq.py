"""SEQ trajectory format: lossy, variable-length, sequential access.

A SEQ file is a plain concatenation of frame records.  Every record starts
with a fixed 64-byte little-endian header::

    u32  magic            0x4D445351
    u64  frame_index
    f32  time             picoseconds
    f32  box[9]           row-major 3x3 box, nanometers
    f32  precision        quantization scale, 1/nm
    u32  n_atoms
    u32  payload_len      bytes

followed by ``payload_len`` bytes: a zigzag-varint stream of the
``3 * n_atoms`` per-component integer deltas of ``round(coord * precision)``,
atom-major (x, y, z per atom), each component delta taken against the same
component of the previous atom and the first atom against 0.  Decoding is
thus exact up to the quantization bound of ``0.5 / precision`` per component.

Because records are variable-length the format has no native random access;
a sidecar offset index (``<trajectory>.offidx``) provides it::

    u64  n_frames
    u32  n_atoms
    u64  trajectory_file_size      bytes
    u64  trajectory_mtime          whole seconds since epoch
    u64  offsets[n_frames]         byte position of each record start

The stored (n_atoms, size, mtime) triple is compared against the trajectory
before the offsets are trusted; any mismatch marks the index stale.
"""

from __future__ import annotations

import os
import struct
import time as _time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import varint
from .errors import CorruptFileError, TruncatedRecordError
from .model import CoordFrame, decompose_blocks

__all__ = [
    "SEQ_MAGIC",
    "DEFAULT_PRECISION",
    "OffsetIndex",
    "seq_write",
    "seq_scan",
    "seq_build_index",
    "seq_validate_index",
    "seq_load_index",
    "seq_ensure_index",
    "seq_read_frame",
    "SeqReader",
    "SeqStreamReader",
    "split_trajectory",
    "index_sidecar_path",
]

SEQ_MAGIC = 0x4D445351
#: Gromacs-conventional 0.001 nm resolution.
DEFAULT_PRECISION = 1000.0

_RECORD_HEADER = struct.Struct("<IQf9ffII")
RECORD_HEADER_SIZE = _RECORD_HEADER.size  # 64 bytes

_INDEX_HEADER = struct.Struct("<QIQQ")

INDEX_SUFFIX = ".offidx"


def index_sidecar_path(path) -> str:
    return str(path) + INDEX_SUFFIX


def _encode_record(frame: CoordFrame, precision: float) -> bytes:
    q = np.rint(np.asarray(frame.positions, dtype=np.float64) * precision).astype(np.int64)
    deltas = q.copy()
    deltas[1:] -= q[:-1]
    payload = varint.encode_stream(deltas.reshape(-1))
    header = _RECORD_HEADER.pack(
        SEQ_MAGIC,
        frame.frame_index,
        float(frame.time),
        *np.asarray(frame.box, dtype=np.float32).reshape(9),
        float(precision),
        frame.n_atoms,
        len(payload),
    )
    return header + payload


def seq_write(frames: Iterable[CoordFrame], precision: float, path) -> int:
    """Write frames to ``path`` in SEQ layout; returns the frame count.

    All frames must share one atom count and ``precision`` must be positive.
    """
    if precision <= 0:
        raise ValueError(f"precision must be > 0, got {precision}")
    count = 0
    n_atoms = None
    with open(path, "wb") as fh:
        for frame in frames:
            if n_atoms is None:
                n_atoms = frame.n_atoms
            elif frame.n_atoms != n_atoms:
                raise ValueError(
                    f"frame {frame.frame_index} has {frame.n_atoms} atoms, "
                    f"expected {n_atoms}"
                )
            fh.write(_encode_record(frame, precision))
            count += 1
    return count


def _read_record(fh, path, offset: int) -> tuple[CoordFrame, bytes, bytes] | None:
    """Read one record at the current position.

    Returns ``(frame, header_bytes, payload_bytes)`` or ``None`` at a clean
    end of file.
    """
    header = fh.read(RECORD_HEADER_SIZE)
    if not header:
        return None
    if len(header) < RECORD_HEADER_SIZE:
        raise TruncatedRecordError(path, offset, "short header")
    fields = _RECORD_HEADER.unpack(header)
    magic, frame_index, t = fields[0], fields[1], fields[2]
    box = np.array(fields[3:12], dtype=np.float64).reshape(3, 3)
    precision, n_atoms, payload_len = fields[12], fields[13], fields[14]
    if magic != SEQ_MAGIC:
        raise CorruptFileError(f"{path}: bad magic 0x{magic:08X} at byte {offset}")
    payload = fh.read(payload_len)
    if len(payload) < payload_len:
        raise TruncatedRecordError(path, offset, "short payload")
    try:
        deltas = varint.decode_stream(payload, 3 * n_atoms)
    except varint.CodecError as exc:
        raise CorruptFileError(f"{path}: record at byte {offset}: {exc}") from exc
    q = deltas.reshape(n_atoms, 3).cumsum(axis=0)
    frame = CoordFrame(
        frame_index=frame_index,
        time=t,
        box=box,
        positions=q / precision,
    )
    return frame, header, payload


def seq_scan(path) -> Iterator[CoordFrame]:
    """Yield all frames of a SEQ file in storage order (no index needed)."""
    with open(path, "rb") as fh:
        offset = 0
        while True:
            rec = _read_record(fh, path, offset)
            if rec is None:
                return
            frame, header, payload = rec
            offset += len(header) + len(payload)
            yield frame


@dataclass(frozen=True)
class OffsetIndex:
    """Persistent random-access index for a SEQ trajectory."""

    n_frames: int
    n_atoms: int
    trajectory_file_size: int
    trajectory_mtime: int
    offsets: np.ndarray

    def __post_init__(self):
        offs = np.asarray(self.offsets, dtype=np.uint64)
        if len(offs) != self.n_frames:
            raise ValueError("offset count does not match n_frames")
        if len(offs):
            if offs[0] != 0:
                raise ValueError("first offset must be 0")
            if len(offs) > 1 and not (np.diff(offs.astype(np.int64)) > 0).all():
                raise ValueError("offsets must be strictly increasing")
        offs.setflags(write=False)
        object.__setattr__(self, "offsets", offs)

    def to_bytes(self) -> bytes:
        head = _INDEX_HEADER.pack(
            self.n_frames,
            self.n_atoms,
            self.trajectory_file_size,
            self.trajectory_mtime,
        )
        return head + self.offsets.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "OffsetIndex":
        if len(data) < _INDEX_HEADER.size:
            raise CorruptFileError("offset index shorter than its header")
        n_frames, n_atoms, size, mtime = _INDEX_HEADER.unpack_from(data)
        body = data[_INDEX_HEADER.size :]
        if len(body) != 8 * n_frames:
            raise CorruptFileError("offset index has wrong payload size")
        offsets = np.frombuffer(body, dtype="<u8").astype(np.uint64)
        return cls(n_frames, n_atoms, size, mtime, offsets)


def _file_fingerprint(path) -> tuple[int, int]:
    st = os.stat(path)
    return st.st_size, int(st.st_mtime)


def seq_build_index(path) -> OffsetIndex:
    """Scan ``path`` once, persist the sidecar index, and return it.

    Not safe to run concurrently for the same trajectory; the engine builds
    indexes once before workers start.
    """
    offsets = []
    n_atoms = 0
    with open(path, "rb") as fh:
        offset = 0
        while True:
            pos = offset
            rec = _read_record(fh, path, pos)
            if rec is None:
                break
            frame, header, payload = rec
            offsets.append(pos)
            if len(offsets) == 1:
                n_atoms = frame.n_atoms
            elif frame.n_atoms != n_atoms:
                raise CorruptFileError(
                    f"{path}: atom count changes at byte {pos} "
                    f"({n_atoms} -> {frame.n_atoms})"
                )
            offset = pos + len(header) + len(payload)
    size, mtime = _file_fingerprint(path)
    index = OffsetIndex(
        n_frames=len(offsets),
        n_atoms=n_atoms,
        trajectory_file_size=size,
        trajectory_mtime=mtime,
        offsets=np.array(offsets, dtype=np.uint64),
    )
    with open(index_sidecar_path(path), "wb") as fh:
        fh.write(index.to_bytes())
    return index


def seq_load_index(path) -> OffsetIndex | None:
    """Load the sidecar index for ``path``; ``None`` if the sidecar is missing."""
    sidecar = index_sidecar_path(path)
    if not os.path.exists(sidecar):
        return None
    with open(sidecar, "rb") as fh:
        return OffsetIndex.from_bytes(fh.read())


def seq_validate_index(path, index: OffsetIndex | None) -> bool:
    """True iff the stored (n_atoms, size, mtime) triple matches the file.

    A missing index (``None``) is reported as invalid, never as an error;
    callers react by rebuilding.  The check is deliberately conservative: a
    touched mtime invalidates the index even if the bytes are unchanged.
    """
    if index is None:
        return False
    try:
        size, mtime = _file_fingerprint(path)
    except OSError:
        return False
    if index.trajectory_file_size != size or index.trajectory_mtime != mtime:
        return False
    if index.n_frames and index.n_atoms <= 0:
        return False
    # n_atoms is validated against the first record, the cheapest read.
    if index.n_frames:
        try:
            with open(path, "rb") as fh:
                head = fh.read(RECORD_HEADER_SIZE)
            if len(head) < RECORD_HEADER_SIZE:
                return False
            fields = _RECORD_HEADER.unpack(head)
            if fields[0] != SEQ_MAGIC or fields[13] != index.n_atoms:
                return False
        except OSError:
            return False
    return True


def seq_ensure_index(path, validate: bool = True) -> OffsetIndex:
    """Return a valid index for ``path``, building and persisting if needed."""
    index = seq_load_index(path)
    if index is not None and (not validate or seq_validate_index(path, index)):
        return index
    return seq_build_index(path)


def seq_read_frame(path, index: OffsetIndex, i: int) -> CoordFrame:
    """Random-access read of frame ``i`` using a prebuilt index."""
    if not 0 <= i < index.n_frames:
        raise IndexError(f"frame {i} out of range [0, {index.n_frames})")
    with open(path, "rb") as fh:
        fh.seek(int(index.offsets[i]))
        rec = _read_record(fh, path, int(index.offsets[i]))
    if rec is None:
        raise TruncatedRecordError(path, int(index.offsets[i]), "record vanished")
    return rec[0]


class SeqReader:
    """Random-access reader over one SEQ file backed by an offset index."""

    counts_io = True

    def __init__(self, path, index: OffsetIndex | None = None, validate: bool = True):
        self.path = str(path)
        self.index = index if index is not None else seq_ensure_index(path, validate)
        self._fh = open(path, "rb")

    @property
    def n_frames(self) -> int:
        return self.index.n_frames

    @property
    def n_atoms(self) -> int:
        return self.index.n_atoms

    def read_frame(self, i: int) -> CoordFrame:
        if not 0 <= i < self.index.n_frames:
            raise IndexError(f"frame {i} out of range [0, {self.index.n_frames})")
        pos = int(self.index.offsets[i])
        self._fh.seek(pos)
        rec = _read_record(self._fh, self.path, pos)
        if rec is None:
            raise TruncatedRecordError(self.path, pos, "record vanished")
        return rec[0]

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SeqStreamReader:
    """Forward-only reader for a SEQ file; no index required.

    ``read_frame`` accepts global frame indices and maps them to the local
    stream via ``first_global_index``; access must be monotonically
    increasing (frames in between are decoded and discarded).
    """

    counts_io = True

    def __init__(self, path, first_global_index: int = 0):
        self.path = str(path)
        self.first_global_index = first_global_index
        self._fh = open(path, "rb")
        self._cursor = 0  # local index of the next record
        self._offset = 0

    def read_frame(self, i: int) -> CoordFrame:
        local = i - self.first_global_index
        if local < self._cursor:
            raise ValueError(
                f"stream reader cannot seek backwards (frame {i} already passed)"
            )
        while True:
            rec = _read_record(self._fh, self.path, self._offset)
            if rec is None:
                raise IndexError(f"frame {i} beyond end of {self.path}")
            frame, header, payload = rec
            self._offset += len(header) + len(payload)
            self._cursor += 1
            if self._cursor - 1 == local:
                return frame

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def segment_path(src, k: int) -> str:
    """Path of segment ``k`` derived from the source trajectory path."""
    p = Path(str(src))
    return str(p.with_name(f"{p.stem}.seg{k:04d}{p.suffix}"))


def split_trajectory(src, n_segments: int) -> tuple[list[str], float]:
    """Split ``src`` into ``n_segments`` SEQ files along even frame blocks.

    Records are copied verbatim (payloads are not re-quantized), so the
    concatenation of all segments is byte-identical to the source.  Returns
    the segment paths and the wall-clock seconds spent writing them.
    """
    if n_segments < 1:
        raise ValueError(f"n_segments must be >= 1, got {n_segments}")
    index = seq_ensure_index(src)
    blocks = decompose_blocks(index.n_frames, n_segments)
    paths = [segment_path(src, b.rank) for b in blocks]
    start = _time.perf_counter()
    with open(src, "rb") as fh:
        for block, seg in zip(blocks, paths):
            with open(seg, "wb") as out:
                if block.n_frames == 0:
                    continue
                lo = int(index.offsets[block.start])
                hi = (
                    int(index.offsets[block.stop])
                    if block.stop < index.n_frames
                    else index.trajectory_file_size
                )
                fh.seek(lo)
                remaining = hi - lo
                while remaining > 0:
                    chunk = fh.read(min(remaining, 1 << 20))
                    if not chunk:
                        raise TruncatedRecordError(src, hi - remaining, "short copy")
                    out.write(chunk)
                    remaining -= len(chunk)
    elapsed = _time.perf_counter() - start
    return paths, elapsed
