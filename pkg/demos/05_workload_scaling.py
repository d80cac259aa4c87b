#!/usr/bin/env python3
"""Compute-to-I/O balance and the strategy advisor.

Whether a trajectory analysis scales is largely decided by one number: the
serial ratio of compute time to read time, R = t_comp / t_io.  Reading
dominates the plain deviation task (R < 1), so shared-file access falls
apart under contention.  Repeating the per-frame computation X times in a
loop scales t_comp linearly while t_io stays put, which lets one dial in
any ratio and watch the advisor change its mind.
"""

import os
import tempfile

import numpy as np

from trajbench import (
    StrategyConfig,
    advise_strategy,
    generate_synthetic,
    ratio_comp_io,
    run_serial,
    synthetic_system,
    theoretical_ratio,
    write_topology,
)
from trajbench.model import System
from trajbench.seq import SeqReader

# a deliberately read-heavy setup: large frames, small selection.  Decoding
# 2000 atoms per frame costs far more than superimposing 30 of them, so the
# plain task starts out I/O bound.
N_ATOMS, N_MOBILE = 2000, 30
work = tempfile.mkdtemp(prefix="trajbench-demo-")
traj = os.path.join(work, "demo.seq")
generate_synthetic(1500, N_ATOMS, seed=3, path=traj)
base = synthetic_system(N_ATOMS, N_MOBILE, seed=3)
with SeqReader(traj) as reader:
    ref = reader.read_frame(0).positions[base.mobile_indices]
topo = traj + ".topo"
write_topology(topo, System(N_ATOMS, base.atom_names, base.mobile_indices, ref))

factors = [1, 10, 40]
measured = {}
print(f"{'X':>4} {'t_comp':>8} {'t_io':>8} {'R meas':>8} {'R theory':>9}")
r1 = None
for x in factors:
    config = StrategyConfig(
        strategy="shared_seq", trajectory_paths=(traj,), topology_path=topo,
        workload_factor=x,
    )
    _, timing = run_serial(config)
    r = ratio_comp_io(timing.t_comp, timing.t_io)
    if r1 is None:
        r1 = r
    measured[x] = (timing.t_comp, timing.t_io, r)
    print(f"{x:>4} {timing.t_comp:8.3f} {timing.t_io:8.3f} {r:8.2f} "
          f"{theoretical_ratio(x, r1):9.2f}")

# compute time should be proportional to the workload factor
xs = np.array(factors, dtype=float)
ts = np.array([measured[x][0] for x in factors])
slope = (xs * ts).sum() / (xs * xs).sum()
r2 = 1 - ((ts - slope * xs) ** 2).sum() / ((ts - ts.mean()) ** 2).sum()
print(f"\nproportional fit t_comp = {slope:.4f} * X, R^2 = {r2:.4f}")

# what the advisor says as the balance shifts
print("\nadvisor:")
for x in factors + [100]:
    r = theoretical_ratio(x, r1)
    advice = advise_strategy(r)
    ceiling = f"~{advice.core_ceiling} cores" if advice.core_ceiling else "n/a"
    print(f"  R = {r:7.2f} (X = {x:>3}) -> heuristic {advice.heuristic}, "
          f"shared file ok: {advice.shared_file_ok} ({ceiling}), "
          f"prefer: {', '.join(advice.recommended)}")

# the no-I/O control: an in-memory run has R = +inf by definition
config = StrategyConfig(
    strategy="in_memory", seed=3, n_frames=1500, n_atoms=N_ATOMS, n_mobile=N_MOBILE,
)
_, timing = run_serial(config)
r_inf = ratio_comp_io(timing.t_comp, timing.t_io)
print(f"\nin-memory control: t_io = {timing.t_io}, R = {r_inf} -> "
      f"heuristic {advise_strategy(r_inf).heuristic}")
