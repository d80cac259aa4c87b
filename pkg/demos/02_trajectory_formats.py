#!/usr/bin/env python3
"""The two trajectory formats and the tooling around them.

SEQ is the sequential, lossy, variable-length format: cheap on disk, but a
frame can only be found by scanning -- unless a persistent offset index is
built once and kept next to the file.  DENSE is the opposite trade: a flat
T x 3N float array whose frame offsets are pure arithmetic, so any number
of readers can fetch any frame without coordination.
"""

import os
import tempfile

import numpy as np

from trajbench import (
    ChainReader,
    DenseReader,
    SeqReader,
    convert_seq_to_dense,
    generate_synthetic,
    read_topology,
    seq_build_index,
    seq_scan,
    seq_validate_index,
    split_trajectory,
    synthetic_system,
    write_topology,
)
from trajbench.seq import seq_load_index

work = tempfile.mkdtemp(prefix="trajbench-demo-")
traj = os.path.join(work, "demo.seq")

# --- build a 500-frame synthetic trajectory (341 atoms, like a small protein)
generate_synthetic(500, 341, seed=42, path=traj)
print(f"SEQ file: {os.path.getsize(traj) / 1e6:.2f} MB for 500 frames x 341 atoms")
print(f"  (raw float64 would be {500 * 341 * 3 * 8 / 1e6:.2f} MB)")

# the codec is lossy: coordinates are quantized to 1/1000 nm
frame0 = next(seq_scan(traj))
raw = np.random.default_rng([42, 0]).uniform(0, 10.0, (341, 3))
print(f"quantization error: {np.abs(frame0.positions - raw).max():.2e} nm "
      "(bound 5.0e-04)")

# --- random access needs the offset index
index = seq_build_index(traj)
print(f"\noffset index: {index.n_frames} offsets, sidecar "
      f"{os.path.basename(traj)}.offidx")

with SeqReader(traj, index) as reader:
    mid = reader.read_frame(250)
    print(f"frame 250 via index: t={mid.time} ps, first atom {mid.positions[0]}")

# the index validates itself against size and mtime before it is trusted
print("index valid now:     ", seq_validate_index(traj, index))
os.utime(traj, (os.stat(traj).st_atime, os.stat(traj).st_mtime + 10))
print("after touching mtime:", seq_validate_index(traj, seq_load_index(traj)))

# --- topology: the selection and reference the analysis runs against
system = synthetic_system(341, 146, seed=42)
topo = traj + ".topo"
write_topology(topo, system)
print(f"\ntopology: {read_topology(topo).n_mobile} mobile atoms of "
      f"{read_topology(topo).n_atoms}")

# --- DENSE keeps only the mobile subset, ready for contention-free reads
dense_path = os.path.join(work, "demo.dense")
convert_seq_to_dense(traj, system, dense_path)
with DenseReader(dense_path) as reader:
    print(f"DENSE file: {reader.n_frames} frames x {3 * reader.n_atoms} columns, "
          f"{os.path.getsize(dense_path) / 1e6:.2f} MB")
    print(f"frame 250 offset: byte {reader.header.coords_position(250)} "
          "(computed, no scan)")

# --- subfiling: one segment per future worker
paths, seconds = split_trajectory(traj, 4)
print(f"\nsplit into 4 segments in {seconds * 1e3:.1f} ms:")
for p in paths:
    print(f"  {os.path.basename(p)}  {os.path.getsize(p)} bytes")

# --- and the chain reader stitches segments back into one virtual trajectory
with ChainReader(paths) as chained:
    probe = chained.read_frame(250)
    print(f"\nchain over segments: {chained.n_frames} frames, frame 250 maps to "
          f"segment {chained.map_global(250)[0]}, local {chained.map_global(250)[1]}")
    assert np.array_equal(probe.positions, mid.positions)
print("chain(split(traj)) reproduces the source exactly")
