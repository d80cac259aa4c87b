"""Binary wire protocol between worker processes and the orchestrator.

All integers are little-endian.  Every transmission is a *frame*::

    u32  payload length
    ...  payload
    u32  CRC32 of the payload

The gather message payload packs its fields in declaration order::

    u32  rank
    u64  block start
    u64  block stop
    f64  rmsd[n]                n = stop - start
    f64  times[n]
    RankTiming                  u32 rank, 10 x f64 timings, u64 frames
    u32  status                 0 = ok

The array length is implied by the payload size (``n = (len - 116) / 16``),
which doubles as a structural check.  A worker that fails sends a gather
message with empty arrays and a non-zero status, followed by one frame of
UTF-8 cause text.  A successful worker waits for the single-byte ACK frame
and then reports its measured communication time as one trailing f64 frame.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CorruptFileError
from .model import RankTiming

__all__ = [
    "ACK",
    "STATUS_OK",
    "STATUS_READ_ERROR",
    "STATUS_FAILURE",
    "GatherMessage",
    "frame_bytes",
    "parse_frame",
    "encode_gather_message",
    "decode_gather_message",
    "encode_timing",
    "decode_timing",
]

ACK = b"\x06"

STATUS_OK = 0
STATUS_READ_ERROR = 1
STATUS_FAILURE = 2

_LEN = struct.Struct("<I")
_CRC = struct.Struct("<I")
_HEAD = struct.Struct("<IQQ")
_TIMING = struct.Struct("<I10dQ")
_STATUS = struct.Struct("<I")

_FIXED_SIZE = _HEAD.size + _TIMING.size + _STATUS.size  # 116 bytes


@dataclass(frozen=True)
class GatherMessage:
    """One worker's complete result for one run."""

    rank: int
    start: int
    stop: int
    rmsd: np.ndarray
    times: np.ndarray
    timing: RankTiming
    status: int = STATUS_OK

    def __post_init__(self):
        rmsd = np.ascontiguousarray(self.rmsd, dtype="<f8")
        times = np.ascontiguousarray(self.times, dtype="<f8")
        if self.status == STATUS_OK:
            n = self.stop - self.start
            if len(rmsd) != n or len(times) != n:
                raise ValueError(
                    f"array lengths ({len(rmsd)}, {len(times)}) must equal "
                    f"block size {n}"
                )
        object.__setattr__(self, "rmsd", rmsd)
        object.__setattr__(self, "times", times)


def frame_bytes(payload: bytes) -> bytes:
    """Wrap a payload as a length-prefixed, CRC-trailed frame."""
    return _LEN.pack(len(payload)) + payload + _CRC.pack(zlib.crc32(payload))


def parse_frame(data: bytes) -> bytes:
    """Unwrap one complete frame; raises on length or checksum mismatch."""
    if len(data) < _LEN.size + _CRC.size:
        raise CorruptFileError("frame shorter than its envelope")
    (length,) = _LEN.unpack_from(data)
    if len(data) != _LEN.size + length + _CRC.size:
        raise CorruptFileError(
            f"frame length mismatch: envelope says {length}, "
            f"got {len(data) - _LEN.size - _CRC.size}"
        )
    payload = data[_LEN.size : _LEN.size + length]
    (crc,) = _CRC.unpack_from(data, _LEN.size + length)
    if crc != zlib.crc32(payload):
        raise CorruptFileError("frame checksum mismatch")
    return payload


def encode_timing(t: RankTiming) -> bytes:
    return _TIMING.pack(
        t.rank,
        t.t_opening_trajectory,
        t.t_io,
        t.t_comp,
        t.t_end_loop,
        t.t_all_frame,
        t.t_rmsd,
        t.t_comm,
        t.t_overhead1,
        t.t_overhead2,
        t.t_n,
        t.n_frames_processed,
    )


def decode_timing(data: bytes, offset: int = 0) -> RankTiming:
    fields = _TIMING.unpack_from(data, offset)
    return RankTiming(
        rank=fields[0],
        t_opening_trajectory=fields[1],
        t_io=fields[2],
        t_comp=fields[3],
        t_end_loop=fields[4],
        t_all_frame=fields[5],
        t_rmsd=fields[6],
        t_comm=fields[7],
        t_overhead1=fields[8],
        t_overhead2=fields[9],
        t_n=fields[10],
        n_frames_processed=fields[11],
    )


def encode_gather_message(msg: GatherMessage) -> bytes:
    head = _HEAD.pack(msg.rank, msg.start, msg.stop)
    return (
        head
        + msg.rmsd.tobytes()
        + msg.times.tobytes()
        + encode_timing(msg.timing)
        + _STATUS.pack(msg.status)
    )


def decode_gather_message(payload: bytes) -> GatherMessage:
    if len(payload) < _FIXED_SIZE:
        raise CorruptFileError("gather message shorter than its fixed fields")
    body = len(payload) - _FIXED_SIZE
    if body % 16 != 0:
        raise CorruptFileError(f"gather message arrays misaligned ({body} bytes)")
    n = body // 16
    rank, start, stop = _HEAD.unpack_from(payload)
    pos = _HEAD.size
    rmsd = np.frombuffer(payload, dtype="<f8", count=n, offset=pos).copy()
    pos += 8 * n
    times = np.frombuffer(payload, dtype="<f8", count=n, offset=pos).copy()
    pos += 8 * n
    timing = decode_timing(payload, pos)
    pos += _TIMING.size
    (status,) = _STATUS.unpack_from(payload, pos)
    return GatherMessage(
        rank=rank, start=start, stop=stop, rmsd=rmsd, times=times,
        timing=timing, status=status,
    )
