"""SEQ format tests.

Expected offsets are computed from the documented record layout (a 64-byte
fixed header followed by the varint payload) independently of the scanner
that is being tested.
"""

import os
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajbench import varint
from trajbench.errors import CorruptFileError, TruncatedRecordError
from trajbench.model import CoordFrame
from trajbench.seq import (
    DEFAULT_PRECISION,
    RECORD_HEADER_SIZE,
    SeqReader,
    SeqStreamReader,
    index_sidecar_path,
    seq_build_index,
    seq_ensure_index,
    seq_load_index,
    seq_read_frame,
    seq_scan,
    seq_validate_index,
    seq_write,
    split_trajectory,
)

BOX = np.diag([10.0, 10.0, 10.0])


def make_frames(rng, n_frames, n_atoms, lo=0.0, hi=10.0):
    return [
        CoordFrame(i, float(i), BOX, rng.uniform(lo, hi, (n_atoms, 3)))
        for i in range(n_frames)
    ]


def payload_length(frame, precision):
    """Independent payload-size oracle from the documented delta codec."""
    q = np.rint(frame.positions * precision).astype(np.int64)
    deltas = q.copy()
    deltas[1:] -= q[:-1]
    return len(varint.encode_stream(deltas.reshape(-1)))


def test_header_size_matches_documented_field_widths():
    # magic + frame_index + time + 9-float box + precision + n_atoms + payload_len
    assert RECORD_HEADER_SIZE == 4 + 8 + 4 + 36 + 4 + 4 + 4 == 64


def test_record_header_golden_bytes(tmp_path):
    """Byte-by-byte header layout, packed independently in declaration order."""
    from trajbench.seq import SEQ_MAGIC

    pos = np.array([[0.001, 0.002, 0.003], [0.004, 0.005, 0.006], [0.0, 0.0, 0.0]])
    frame = CoordFrame(5, 2.5, BOX, pos)
    path = tmp_path / "golden.seq"
    seq_write([frame], 1000.0, path)
    raw = path.read_bytes()
    q = np.array([[1, 2, 3], [4, 5, 6], [0, 0, 0]], dtype=np.int64)
    deltas = q.copy()
    deltas[1:] -= q[:-1]
    payload = varint.encode_stream(deltas.reshape(-1))
    expected = struct.pack(
        "<IQf9ffII", SEQ_MAGIC, 5, 2.5, *BOX.astype(np.float32).reshape(9),
        1000.0, 3, len(payload),
    )
    assert raw[:64] == expected
    assert raw[64:] == payload


def test_offset_index_golden_bytes(tmp_path, rng):
    """Sidecar layout: n_frames, n_atoms, size, mtime, then u64 offsets."""
    path = tmp_path / "t.seq"
    seq_write(make_frames(rng, 3, 7), DEFAULT_PRECISION, path)
    index = seq_build_index(path)
    raw = open(index_sidecar_path(path), "rb").read()
    expected = struct.pack(
        "<QIQQ", index.n_frames, index.n_atoms,
        index.trajectory_file_size, index.trajectory_mtime,
    ) + np.asarray(index.offsets, dtype="<u8").tobytes()
    assert raw == expected
    assert index.trajectory_file_size == os.path.getsize(path)
    assert index.trajectory_mtime == int(os.stat(path).st_mtime)


def test_quantization_of_known_coordinate(tmp_path, rng):
    pos = np.full((3, 3), 1.23456)
    path = tmp_path / "one.seq"
    seq_write([CoordFrame(0, 0.0, BOX, pos)], 1000.0, path)
    (frame,) = list(seq_scan(path))
    assert abs(frame.positions[0, 0] - 1.23456) <= 0.0005


class TestRoundTrip:
    def test_100_random_frames(self, tmp_path, rng):
        frames = make_frames(rng, 100, 17)
        path = tmp_path / "t.seq"
        assert seq_write(frames, DEFAULT_PRECISION, path) == 100
        decoded = list(seq_scan(path))
        assert len(decoded) == 100
        for orig, back in zip(frames, decoded):
            assert back.frame_index == orig.frame_index
            assert back.time == orig.time  # frame times are f32-representable
            assert np.abs(back.positions - orig.positions).max() <= 0.5 / DEFAULT_PRECISION
            assert np.allclose(back.box, orig.box)

    def test_lossy_bound_holds_for_any_precision(self, tmp_path, rng):
        for precision in (10.0, 1000.0, 100000.0):
            frames = make_frames(rng, 5, 50)
            path = tmp_path / f"p{precision}.seq"
            seq_write(frames, precision, path)
            for orig, back in zip(frames, seq_scan(path)):
                assert np.abs(back.positions - orig.positions).max() <= 0.5 / precision

    def test_rejects_inconsistent_atom_counts(self, tmp_path, rng):
        frames = make_frames(rng, 2, 5) + make_frames(rng, 1, 6)
        with pytest.raises(ValueError):
            seq_write(frames, 1000.0, tmp_path / "bad.seq")

    def test_rejects_non_positive_precision(self, tmp_path, rng):
        with pytest.raises(ValueError):
            seq_write(make_frames(rng, 1, 5), 0.0, tmp_path / "bad.seq")


class TestIndex:
    def test_offsets_against_layout_arithmetic(self, tmp_path, rng):
        frames = make_frames(rng, 10, 7)
        path = tmp_path / "t.seq"
        seq_write(frames, DEFAULT_PRECISION, path)
        expected = []
        pos = 0
        for frame in frames:
            expected.append(pos)
            pos += RECORD_HEADER_SIZE + payload_length(frame, DEFAULT_PRECISION)
        index = seq_build_index(path)
        assert list(index.offsets) == expected
        assert pos == os.path.getsize(path)

    def test_crafted_payload_lengths_10_12_11(self, tmp_path):
        # quantized rows chosen so the three payloads take 10, 12 and 11
        # bytes; offsets then follow from the 64-byte fixed header
        q_frames = [
            [(63, 0, 0), (63, 0, 0), (127, 0, 0)],   # deltas 63/0/64 -> 10 bytes
            [(64, 64, 64), (64, 64, 64), (64, 64, 64)],  # 64,64,64/0.. -> 12 bytes
            [(64, 64, 0), (64, 64, 0), (64, 64, 0)],     # 64,64,0/0..  -> 11 bytes
        ]
        frames = [
            CoordFrame(i, float(i), BOX, np.array(q, dtype=float) / 1000.0)
            for i, q in enumerate(q_frames)
        ]
        path = tmp_path / "crafted.seq"
        seq_write(frames, 1000.0, path)
        assert [payload_length(f, 1000.0) for f in frames] == [10, 12, 11]
        index = seq_build_index(path)
        assert list(index.offsets) == [0, 74, 150]
        assert os.path.getsize(path) == 150 + 64 + 11

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.seq"
        path.write_bytes(b"")
        index = seq_build_index(path)
        assert index.n_frames == 0
        assert len(index.offsets) == 0

    def test_indexed_read_equals_scan_for_every_frame(self, tmp_path, rng):
        frames = make_frames(rng, 100, 9)
        path = tmp_path / "t.seq"
        seq_write(frames, DEFAULT_PRECISION, path)
        index = seq_build_index(path)
        scanned = list(seq_scan(path))
        for i in range(100):
            direct = seq_read_frame(path, index, i)
            assert direct.frame_index == scanned[i].frame_index
            assert np.array_equal(direct.positions, scanned[i].positions)

    def test_truncated_record_reports_byte_position(self, tmp_path, rng):
        path = tmp_path / "t.seq"
        seq_write(make_frames(rng, 3, 9), DEFAULT_PRECISION, path)
        index = seq_build_index(path)
        cut = int(index.offsets[2]) + 10
        with open(path, "r+b") as fh:
            fh.truncate(cut)
        with pytest.raises(TruncatedRecordError) as excinfo:
            seq_build_index(path)
        assert excinfo.value.byte_position == int(index.offsets[2])

    def test_bad_magic_is_corrupt_file(self, tmp_path, rng):
        path = tmp_path / "t.seq"
        seq_write(make_frames(rng, 2, 9), DEFAULT_PRECISION, path)
        with open(path, "r+b") as fh:
            fh.write(struct.pack("<I", 0xDEADBEEF))
        with pytest.raises(CorruptFileError):
            seq_build_index(path)

    def test_sidecar_persisted_and_loadable(self, tmp_path, rng):
        path = tmp_path / "t.seq"
        seq_write(make_frames(rng, 4, 9), DEFAULT_PRECISION, path)
        built = seq_build_index(path)
        assert os.path.exists(index_sidecar_path(path))
        loaded = seq_load_index(path)
        assert loaded is not None
        assert np.array_equal(loaded.offsets, built.offsets)
        assert loaded.n_atoms == built.n_atoms


class TestIndexValidation:
    def _indexed(self, tmp_path, rng, n=5):
        path = tmp_path / "t.seq"
        seq_write(make_frames(rng, n, 9), DEFAULT_PRECISION, path)
        return path, seq_build_index(path)

    def test_untouched_file_is_valid(self, tmp_path, rng):
        path, index = self._indexed(tmp_path, rng)
        assert seq_validate_index(path, index) is True

    def test_appended_frame_invalidates(self, tmp_path, rng):
        path, index = self._indexed(tmp_path, rng)
        extra = make_frames(rng, 6, 9)[5:]
        with open(path, "ab") as fh:
            from trajbench.seq import _encode_record

            fh.write(_encode_record(extra[0], DEFAULT_PRECISION))
        assert seq_validate_index(path, index) is False

    def test_touched_mtime_invalidates_even_with_same_content(self, tmp_path, rng):
        path, index = self._indexed(tmp_path, rng)
        st_ = os.stat(path)
        os.utime(path, (st_.st_atime + 7, st_.st_mtime + 7))
        assert seq_validate_index(path, index) is False

    def test_missing_sidecar_reported_invalid_not_error(self, tmp_path, rng):
        path, _ = self._indexed(tmp_path, rng)
        assert seq_validate_index(path, None) is False
        assert seq_load_index(tmp_path / "never-written.seq") is None

    def test_ensure_index_rebuilds_stale(self, tmp_path, rng):
        path, index = self._indexed(tmp_path, rng)
        st_ = os.stat(path)
        os.utime(path, (st_.st_atime + 7, st_.st_mtime + 7))
        rebuilt = seq_ensure_index(path)
        assert seq_validate_index(path, rebuilt) is True


class TestSplit:
    def test_10_frames_into_3_segments(self, tmp_path, rng):
        path = tmp_path / "t.seq"
        seq_write(make_frames(rng, 10, 6), DEFAULT_PRECISION, path)
        paths, seconds = split_trajectory(path, 3)
        assert len(paths) == 3
        assert seconds >= 0.0
        counts = [len(list(seq_scan(p))) for p in paths]
        assert counts == [4, 3, 3]

    def test_concatenated_segments_byte_identical_to_source(self, tmp_path, rng):
        path = tmp_path / "t.seq"
        seq_write(make_frames(rng, 10, 6), DEFAULT_PRECISION, path)
        paths, _ = split_trajectory(path, 3)
        joined = b"".join(open(p, "rb").read() for p in paths)
        assert joined == open(path, "rb").read()

    def test_single_segment_is_a_copy(self, tmp_path, rng):
        path = tmp_path / "t.seq"
        seq_write(make_frames(rng, 7, 6), DEFAULT_PRECISION, path)
        paths, _ = split_trajectory(path, 1)
        assert open(paths[0], "rb").read() == open(path, "rb").read()

    def test_more_segments_than_frames_gives_empty_files(self, tmp_path, rng):
        path = tmp_path / "t.seq"
        seq_write(make_frames(rng, 2, 6), DEFAULT_PRECISION, path)
        paths, _ = split_trajectory(path, 4)
        counts = [len(list(seq_scan(p))) for p in paths]
        assert counts == [1, 1, 0, 0]


class TestStreamReader:
    def test_sequential_global_reads(self, tmp_path, rng):
        path = tmp_path / "t.seq"
        frames = make_frames(rng, 9, 6)
        seq_write(frames, DEFAULT_PRECISION, path)
        paths, _ = split_trajectory(path, 3)
        reader = SeqStreamReader(paths[1], first_global_index=3)
        for g in (3, 4, 5):
            frame = reader.read_frame(g)
            assert frame.frame_index == g
            assert np.array_equal(
                frame.positions,
                np.rint(frames[g].positions * DEFAULT_PRECISION) / DEFAULT_PRECISION,
            )
        reader.close()

    def test_backwards_read_rejected(self, tmp_path, rng):
        path = tmp_path / "t.seq"
        seq_write(make_frames(rng, 5, 6), DEFAULT_PRECISION, path)
        reader = SeqStreamReader(path)
        reader.read_frame(2)
        with pytest.raises(ValueError):
            reader.read_frame(1)
        reader.close()


@given(seed=st.integers(0, 2**32 - 1), k=st.sampled_from([1, 2, 3, 7]))
def test_split_then_chain_reproduces_source(seed, k, tmp_path_factory):
    from trajbench.chain import chain_open

    rng = np.random.default_rng(seed)
    tmp = tmp_path_factory.mktemp("splitchain")
    path = tmp / "t.seq"
    n = int(rng.integers(0, 25))
    seq_write(make_frames(rng, n, 4), DEFAULT_PRECISION, path)
    paths, _ = split_trajectory(path, k)
    source = list(seq_scan(path))
    with chain_open(paths) as chained:
        assert chained.n_frames == n
        for i in range(n):
            assert np.array_equal(chained.read_frame(i).positions, source[i].positions)


def test_reader_random_access_matches(tmp_path, rng):
    path = tmp_path / "t.seq"
    frames = make_frames(rng, 30, 6)
    seq_write(frames, DEFAULT_PRECISION, path)
    with SeqReader(path) as reader:
        order = rng.permutation(30)
        for i in order:
            frame = reader.read_frame(int(i))
            assert frame.frame_index == i
