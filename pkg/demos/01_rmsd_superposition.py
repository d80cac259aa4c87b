#!/usr/bin/env python3
"""Minimal RMSD after optimal superposition: what the kernel does.

The deviation between two conformations is meaningless until the rigid-body
part (where the molecule drifted and tumbled) is removed.  `rmsd_qcp` does
that without ever building a rotation matrix, by locating the largest
eigenvalue of a 4x4 quaternion key matrix; `rmsd_kabsch_oracle` is the
classic SVD route kept around as an independent cross-check.
"""

import time

import numpy as np

from trajbench import rmsd_kabsch_oracle, rmsd_qcp

rng = np.random.default_rng(2024)

# a fake "protein": 146 points in a 10 nm box
ref = rng.uniform(-5.0, 5.0, (146, 3))

# 1. the deviation of a structure from itself is zero
print("identity:            ", rmsd_qcp(ref, ref))

# 2. translation is absorbed: shift the whole structure by an arbitrary vector
shifted = ref + np.array([1.0, -2.0, 0.5])
print("rigid translation:   ", rmsd_qcp(shifted, ref))

# 3. rotation is absorbed too: turn the structure 90 degrees about z
rot90 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
print("rigid rotation:      ", rmsd_qcp(ref @ rot90.T, ref))

# 4. actual structural change is what remains: jitter every atom by ~0.1 nm
noisy = ref + rng.normal(scale=0.1, size=ref.shape)
print("0.1 nm jitter:       ", rmsd_qcp(noisy, ref))

# ... and it cannot be larger than skipping the rotation search entirely
ac = noisy - noisy.mean(axis=0)
bc = ref - ref.mean(axis=0)
plain = np.sqrt(((ac - bc) ** 2).sum() / len(ref))
print("without rotation fit:", plain, "(upper bound)")

# 5. the two independent implementations agree to machine precision
worst = 0.0
for _ in range(200):
    a = rng.uniform(-5.0, 5.0, (146, 3))
    b = rng.uniform(-5.0, 5.0, (146, 3))
    worst = max(worst, abs(rmsd_qcp(a, b) - rmsd_kabsch_oracle(a, b)))
print(f"max |qcp - kabsch| over 200 random pairs: {worst:.2e}")

# 6. why the eigenvalue route is the default: it is the faster kernel
pairs = [(rng.uniform(-5, 5, (146, 3)), rng.uniform(-5, 5, (146, 3))) for _ in range(500)]
t0 = time.perf_counter()
for a, b in pairs:
    rmsd_qcp(a, b)
t_qcp = time.perf_counter() - t0
t0 = time.perf_counter()
for a, b in pairs:
    rmsd_kabsch_oracle(a, b)
t_svd = time.perf_counter() - t0
print(f"500 evaluations: qcp {t_qcp * 1e3:.1f} ms, svd {t_svd * 1e3:.1f} ms")
