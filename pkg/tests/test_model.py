import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajbench.model import (
    BenchRun,
    CoordFrame,
    RankTiming,
    RepeatRecord,
    System,
    decompose_blocks,
)


class TestDecomposeBlocks:
    def test_even_split_with_remainder(self):
        blocks = decompose_blocks(10, 3)
        assert [(b.start, b.stop) for b in blocks] == [(0, 4), (4, 7), (7, 10)]

    def test_paper_scale_division_is_exact(self):
        # 2,512,200 frames over 24 ranks divides exactly
        blocks = decompose_blocks(2_512_200, 24)
        assert len(blocks) == 24
        assert all(b.n_frames == 104_675 for b in blocks)

    def test_more_workers_than_frames(self):
        blocks = decompose_blocks(3, 5)
        assert [(b.start, b.stop) for b in blocks] == [
            (0, 1), (1, 2), (2, 3), (3, 3), (3, 3),
        ]

    def test_zero_workers_rejected(self):
        with pytest.raises(ValueError):
            decompose_blocks(10, 0)

    def test_negative_total_rejected(self):
        with pytest.raises(ValueError):
            decompose_blocks(-1, 2)

    @given(total=st.integers(0, 5000), workers=st.integers(1, 64))
    def test_partition_properties(self, total, workers):
        blocks = decompose_blocks(total, workers)
        assert len(blocks) == workers
        assert sum(b.n_frames for b in blocks) == total
        sizes = [b.n_frames for b in blocks]
        assert max(sizes) - min(sizes) <= 1
        covered = [i for b in blocks for i in range(b.start, b.stop)]
        assert covered == list(range(total))
        assert [b.rank for b in blocks] == list(range(workers))


class TestCoordFrame:
    def test_rejects_non_finite(self):
        pos = np.zeros((4, 3))
        pos[1, 2] = np.nan
        with pytest.raises(ValueError):
            CoordFrame(0, 0.0, np.eye(3), pos)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            CoordFrame(0, 0.0, np.eye(3), np.zeros((4, 2)))

    def test_positions_read_only(self):
        frame = CoordFrame(0, 0.0, np.eye(3), np.zeros((4, 3)))
        with pytest.raises(ValueError):
            frame.positions[0, 0] = 1.0


class TestSystem:
    def test_rejects_out_of_range_index(self):
        with pytest.raises(ValueError):
            System(5, ("a", "b", "c"), [0, 2, 5], np.zeros((3, 3)))

    def test_rejects_unsorted_indices(self):
        with pytest.raises(ValueError):
            System(5, ("a", "b", "c"), [0, 2, 1], np.zeros((3, 3)))

    def test_rejects_wrong_reference_shape(self):
        with pytest.raises(ValueError):
            System(5, ("a", "b"), [0, 1], np.zeros((3, 3)))


class TestRankTiming:
    def test_build_satisfies_identities(self):
        t = RankTiming.build(
            rank=2, t_opening_trajectory=0.5, t_io=1.0, t_comp=2.0,
            t_end_loop=0.1, t_all_frame=3.2, t_rmsd=3.8, t_comm=0.4,
            n_frames_processed=10,
        )
        assert t.t_n == t.t_rmsd + t.t_comm
        assert t.t_overhead1 == t.t_all_frame - t.t_io - t.t_comp - t.t_end_loop
        assert t.t_overhead2 == t.t_rmsd - t.t_all_frame - t.t_opening_trajectory
        t.check()

    def test_check_rejects_negative_raw_timing(self):
        t = RankTiming.build(0, 0.0, -1.0, 2.0, 0.0, 1.0, 1.0, 0.0, 5)
        with pytest.raises(ValueError):
            t.check()

    def test_check_rejects_broken_identity(self):
        good = RankTiming.build(0, 0.1, 1.0, 2.0, 0.1, 3.3, 3.5, 0.2, 5)
        bad = RankTiming(*(good.astuple()[:10] + (good.t_n + 1.0, 5)))
        with pytest.raises(ValueError):
            bad.check()

    def test_check_rejects_large_negative_overhead(self):
        # t_rmsd smaller than the loop time it is supposed to contain
        t = RankTiming.build(0, 0.5, 1.0, 2.0, 0.1, 3.5, 1.0, 0.0, 5)
        with pytest.raises(ValueError):
            t.check()

    @given(
        t_io=st.floats(0, 10),
        t_comp=st.floats(0, 10),
        t_end=st.floats(0, 1),
        slack=st.floats(0, 0.5),
        t_open=st.floats(0, 2),
        t_comm=st.floats(0, 3),
    )
    def test_nested_measurements_always_check(self, t_io, t_comp, t_end, slack, t_open, t_comm):
        t_all = t_io + t_comp + t_end + slack
        t_rmsd = t_open + t_all + slack
        t = RankTiming.build(0, t_open, t_io, t_comp, t_end, t_all, t_rmsd, t_comm, 3)
        t.check()


class TestBenchRun:
    def _timing(self, rank):
        return RankTiming.build(rank, 0.0, 1.0, 2.0, 0.0, 3.0, 3.0, 0.5, 10)

    def test_validates_rank_count(self):
        rep = RepeatRecord(timings=(self._timing(0),), rmsd=np.zeros(20))
        with pytest.raises(ValueError):
            BenchRun("shared_seq", 2, 1, (rep,), 20)

    def test_validates_rmsd_length(self):
        rep = RepeatRecord(
            timings=(self._timing(0), self._timing(1)), rmsd=np.zeros(19)
        )
        with pytest.raises(ValueError):
            BenchRun("shared_seq", 2, 1, (rep,), 20)

    def test_t_total_is_slowest_rank(self):
        slow = RankTiming.build(1, 0.0, 1.0, 2.0, 0.0, 3.0, 6.0, 0.5, 10)
        rep = RepeatRecord(timings=(self._timing(0), slow), rmsd=np.zeros(20))
        assert rep.t_total == slow.t_n
