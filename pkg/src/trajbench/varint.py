"""Vectorized zigzag-varint codec for signed integer streams.

Zigzag maps signed to unsigned (0, -1, 1, -2, ... -> 0, 1, 2, 3, ...) so
small-magnitude deltas encode to few bytes; varint then emits 7 payload bits
per byte, most-significant bit set on continuation bytes.  Values must fit
comfortably in int64 (|v| < 2**62).
"""

from __future__ import annotations

import numpy as np

__all__ = ["zigzag_encode", "zigzag_decode", "encode_stream", "decode_stream", "CodecError"]

_MAX_VARINT_BYTES = 10  # ceil(64 / 7)


class CodecError(ValueError):
    """Raised when a varint stream cannot be decoded."""


def zigzag_encode(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    return ((v << 1) ^ (v >> 63)).astype(np.uint64)


def zigzag_decode(encoded: np.ndarray) -> np.ndarray:
    u = np.asarray(encoded, dtype=np.uint64)
    half = (u >> np.uint64(1)).astype(np.int64)
    sign = -(u & np.uint64(1)).astype(np.int64)
    return half ^ sign


def encode_stream(values: np.ndarray) -> bytes:
    """Encode a 1-D int64 array as a contiguous zigzag-varint byte stream."""
    u = zigzag_encode(np.atleast_1d(values))
    if u.size == 0:
        return b""
    # bytes needed per value
    nbytes = np.ones(u.shape, dtype=np.int64)
    rest = u >> np.uint64(7)
    while rest.any():
        nbytes += (rest > 0).astype(np.int64)
        rest >>= np.uint64(7)
    starts = np.zeros(u.shape, dtype=np.int64)
    np.cumsum(nbytes[:-1], out=starts[1:])
    out = np.zeros(int(starts[-1] + nbytes[-1]), dtype=np.uint8)
    for k in range(_MAX_VARINT_BYTES):
        mask = nbytes > k
        if not mask.any():
            break
        chunk = ((u[mask] >> np.uint64(7 * k)) & np.uint64(0x7F)).astype(np.uint8)
        cont = (nbytes[mask] > k + 1).astype(np.uint8) << 7
        out[starts[mask] + k] = chunk | cont
    return out.tobytes()


def decode_stream(data: bytes, count: int) -> np.ndarray:
    """Decode exactly ``count`` zigzag-varint values from ``data``.

    Raises :class:`CodecError` if the stream is truncated, contains trailing
    bytes, or holds the wrong number of values.
    """
    if count == 0:
        if data:
            raise CodecError("trailing bytes after last value")
        return np.zeros(0, dtype=np.int64)
    b = np.frombuffer(data, dtype=np.uint8)
    is_last = (b & 0x80) == 0
    ends = np.flatnonzero(is_last)
    if len(ends) != count:
        raise CodecError(f"expected {count} values, found {len(ends)}")
    if ends[-1] != len(b) - 1:
        raise CodecError("trailing bytes after last value")
    starts = np.empty_like(ends)
    starts[0] = 0
    starts[1:] = ends[:-1] + 1
    lengths = ends - starts + 1
    if (lengths > _MAX_VARINT_BYTES).any():
        raise CodecError("varint longer than 10 bytes")
    shifts = (np.arange(len(b), dtype=np.int64) - np.repeat(starts, lengths)) * 7
    contrib = (b & 0x7F).astype(np.uint64) << shifts.astype(np.uint64)
    return zigzag_decode(np.add.reduceat(contrib, starts))
