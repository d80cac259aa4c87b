import os

import numpy as np
import pytest

from trajbench.dense import convert_seq_to_dense
from trajbench.engine import (
    StrategyConfig,
    assemble_rmsd,
    generate_synthetic,
    run_parallel,
    run_serial,
    synthetic_system,
)
from trajbench.errors import RunTimeoutError, TrajbenchError, WorkerError
from trajbench.model import RankTiming, Strategy, System
from trajbench.seq import SeqReader, seq_build_index, split_trajectory
from trajbench.topology import write_topology
from trajbench.wire import GatherMessage


def make_inputs(tmp_path, n_frames=120, n_atoms=30, n_mobile=10, seed=11):
    """Synthetic SEQ trajectory plus a topology whose reference is the
    decoded frame 0, exactly what file-backed readers will see."""
    traj = tmp_path / "traj.seq"
    generate_synthetic(n_frames, n_atoms, seed, traj)
    system = synthetic_system(n_atoms, n_mobile, seed)
    if n_frames > 0:
        with SeqReader(traj) as reader:
            frame0 = reader.read_frame(0)
        system = System(
            n_atoms=n_atoms,
            atom_names=system.atom_names,
            mobile_indices=system.mobile_indices,
            reference_positions=frame0.positions[system.mobile_indices],
        )
    topo = tmp_path / "traj.seq.topo"
    write_topology(topo, system)
    return traj, topo, system


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("engine")
    return make_inputs(tmp)


@pytest.fixture(scope="module")
def serial_reference(inputs):
    traj, topo, _ = inputs
    config = StrategyConfig(
        strategy=Strategy.SHARED_SEQ, trajectory_paths=(traj,), topology_path=topo
    )
    return run_serial(config)


class TestSerial:
    def test_serial_over_empty_trajectory(self, tmp_path):
        traj, topo, _ = make_inputs(tmp_path, n_frames=0)
        config = StrategyConfig(
            strategy=Strategy.SHARED_SEQ, trajectory_paths=(traj,), topology_path=topo
        )
        rmsd, timing = run_serial(config)
        assert len(rmsd) == 0
        assert timing.n_frames_processed == 0
        timing.check()

    def test_serial_timing_identities(self, serial_reference):
        _, timing = serial_reference
        timing.check()
        assert timing.t_comm == 0.0
        assert timing.t_n == timing.t_rmsd
        assert timing.t_io > 0
        assert timing.t_comp > 0


class TestParallelEqualsSerial:
    def test_shared_seq(self, inputs, serial_reference):
        traj, topo, _ = inputs
        ref, _ = serial_reference
        config = StrategyConfig(
            strategy=Strategy.SHARED_SEQ, trajectory_paths=(traj,),
            topology_path=topo, n_workers=4,
        )
        rmsd, timings = run_parallel(config)
        assert np.abs(rmsd - ref).max() <= 1e-9
        assert [t.rank for t in timings] == [0, 1, 2, 3]
        for t in timings:
            t.check()

    def test_subfile(self, inputs, serial_reference, tmp_path):
        traj, topo, _ = inputs
        ref, _ = serial_reference
        paths, _ = split_trajectory(traj, 4)
        config = StrategyConfig(
            strategy=Strategy.SUBFILE, trajectory_paths=tuple(paths),
            topology_path=topo, n_workers=4,
        )
        rmsd, timings = run_parallel(config)
        assert np.abs(rmsd - ref).max() <= 1e-9
        serial_rmsd, _ = run_serial(config)
        assert np.abs(serial_rmsd - ref).max() <= 1e-9

    def test_chain(self, inputs, serial_reference):
        traj, topo, _ = inputs
        ref, _ = serial_reference
        paths, _ = split_trajectory(traj, 3)  # segment count != worker count
        config = StrategyConfig(
            strategy=Strategy.CHAIN, trajectory_paths=tuple(paths),
            topology_path=topo, n_workers=4,
        )
        rmsd, _ = run_parallel(config)
        assert np.abs(rmsd - ref).max() <= 1e-9

    def test_dense(self, inputs, serial_reference, tmp_path):
        traj, topo, system = inputs
        ref, _ = serial_reference
        dense_path = tmp_path / "traj.dense"
        convert_seq_to_dense(traj, system, dense_path)
        config = StrategyConfig(
            strategy=Strategy.DENSE_PARALLEL, trajectory_paths=(dense_path,),
            topology_path=topo, n_workers=4,
        )
        rmsd, _ = run_parallel(config)
        # f32 storage of the quantized coordinates; far inside the bound
        assert np.abs(rmsd - ref).max() <= 1e-3

    def test_in_memory(self):
        config = StrategyConfig(
            strategy=Strategy.IN_MEMORY, n_workers=4, seed=5,
            n_frames=60, n_atoms=20, n_mobile=6,
        )
        serial_rmsd, _ = run_serial(config)
        rmsd, _ = run_parallel(config)
        assert np.abs(rmsd - serial_rmsd).max() <= 1e-12

    def test_single_worker_matches_serial_values(self, inputs, serial_reference):
        traj, topo, _ = inputs
        ref, _ = serial_reference
        config = StrategyConfig(
            strategy=Strategy.SHARED_SEQ, trajectory_paths=(traj,),
            topology_path=topo, n_workers=1,
        )
        rmsd, timings = run_parallel(config)
        assert np.array_equal(rmsd, ref)
        assert len(timings) == 1
        assert timings[0].t_comm < 0.5  # single gather of a tiny payload


class TestInMemoryControl:
    def test_io_and_opening_are_exactly_zero(self):
        config = StrategyConfig(
            strategy=Strategy.IN_MEMORY, n_workers=3, seed=9,
            n_frames=30, n_atoms=15, n_mobile=5,
        )
        _, timings = run_parallel(config)
        assert len(timings) == 3
        for t in timings:
            assert t.t_io == 0.0
            assert t.t_opening_trajectory == 0.0
            assert t.t_comp > 0.0


class TestGather:
    def test_assembly_is_order_independent(self, rng):
        blocks = [(0, 0, 4), (1, 4, 8), (2, 8, 10)]
        messages = []
        for rank, start, stop in blocks:
            timing = RankTiming.build(rank, 0, 0, 0, 0, 0, 0, 0, stop - start)
            messages.append(
                GatherMessage(
                    rank=rank, start=start, stop=stop,
                    rmsd=np.full(stop - start, float(rank)),
                    times=np.zeros(stop - start), timing=timing,
                )
            )
        expected = assemble_rmsd(messages, 10)
        for _ in range(5):
            shuffled = list(rng.permutation(len(messages)))
            out = assemble_rmsd([messages[i] for i in shuffled], 10)
            assert np.array_equal(out, expected)

    def test_gap_detected(self):
        timing = RankTiming.build(0, 0, 0, 0, 0, 0, 0, 0, 4)
        msg = GatherMessage(
            rank=0, start=0, stop=4, rmsd=np.zeros(4), times=np.zeros(4),
            timing=timing,
        )
        with pytest.raises(TrajbenchError):
            assemble_rmsd([msg], 10)


class TestFailures:
    def test_worker_read_failure_carries_rank_and_cause(self, tmp_path):
        traj, topo, _ = make_inputs(tmp_path, n_frames=40)
        seq_build_index(traj)
        index = seq_build_index(traj)
        # corrupt the payload of a frame in rank 1's block without changing
        # the file size, then skip validation so workers hit it
        target = int(index.offsets[25])
        size = os.path.getsize(traj)
        with open(traj, "r+b") as fh:
            fh.seek(target + 64)
            fh.write(b"\xff" * 8)
        assert os.path.getsize(traj) == size
        config = StrategyConfig(
            strategy=Strategy.SHARED_SEQ, trajectory_paths=(traj,),
            topology_path=topo, n_workers=2, skip_index_validation=True,
        )
        with pytest.raises(WorkerError) as excinfo:
            run_parallel(config)
        assert excinfo.value.rank == 1
        assert "frame" in excinfo.value.cause

    def test_timeout_aborts_run(self, tmp_path):
        config = StrategyConfig(
            strategy=Strategy.IN_MEMORY, n_workers=2, seed=3,
            n_frames=400, n_atoms=100, n_mobile=50,
            workload_factor=200, timeout_s=0.15,
        )
        with pytest.raises(RunTimeoutError):
            run_parallel(config)

    def test_subfile_segment_count_must_match_workers(self, tmp_path):
        traj, topo, _ = make_inputs(tmp_path, n_frames=20)
        paths, _ = split_trajectory(traj, 3)
        config = StrategyConfig(
            strategy=Strategy.SUBFILE, trajectory_paths=tuple(paths),
            topology_path=topo, n_workers=4,
        )
        with pytest.raises(ValueError):
            run_parallel(config)

    def test_in_memory_requires_seed_and_counts(self):
        config = StrategyConfig(strategy=Strategy.IN_MEMORY, n_workers=2)
        with pytest.raises(ValueError):
            config.validate()


class TestGenerateSynthetic:
    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.seq", tmp_path / "b.seq"
        generate_synthetic(25, 12, 7, a)
        generate_synthetic(25, 12, 7, b)
        assert a.read_bytes() == b.read_bytes()

    def test_different_seed_different_payload(self, tmp_path):
        a, b = tmp_path / "a.seq", tmp_path / "b.seq"
        generate_synthetic(25, 12, 7, a)
        generate_synthetic(25, 12, 8, b)
        assert a.read_bytes() != b.read_bytes()

    def test_single_frame_file_decodes(self, tmp_path):
        path = tmp_path / "one.seq"
        assert generate_synthetic(1, 5, 3, path) == 1
        with SeqReader(path) as reader:
            frame = reader.read_frame(0)
        raw = np.random.default_rng([3, 0]).uniform(0, 10.0, (5, 3))
        assert np.abs(frame.positions - raw).max() <= 0.5 / 1000.0

    def test_dense_format_stores_unquantized_f32(self, tmp_path):
        from trajbench.dense import DenseReader

        path = tmp_path / "t.dense"
        generate_synthetic(4, 5, 3, path, fmt="dense")
        raw = np.random.default_rng([3, 2]).uniform(0, 10.0, (5, 3))
        with DenseReader(path) as reader:
            assert reader.n_frames == 4
            got = reader.read_frame(2).positions
        assert np.abs(got - raw).max() <= 1e-6

    def test_negative_frames_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            generate_synthetic(-1, 5, 3, tmp_path / "x.seq")
