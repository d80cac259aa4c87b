#!/usr/bin/env python3
"""Straggler detection: finding the ranks that drag a run down.

A parallel run is only as fast as its slowest rank, so a handful of
delayed workers can erase the benefit of dozens of fast ones.  Two
policies are implemented: a crisp one (flag everything at or above 1.5x
the median completion time) and a cluster-style one (flag everything at
or above twice the mean of the fastest group of ranks).
"""

import numpy as np

from trajbench import detect_stragglers
from trajbench.perf import FASTEST_GROUP_POLICY, MEDIAN_POLICY

rng = np.random.default_rng(11)


def show(name, values, policy, **kw):
    verdicts = detect_stragglers(values, policy=policy, **kw)
    flagged = [v.rank for v in verdicts if v.flagged]
    threshold = verdicts[0].threshold
    print(f"{name:<34} threshold {threshold:6.1f} s -> "
          f"{len(flagged)} straggler(s) {flagged if len(flagged) <= 8 else '...'}")
    return flagged


# --- the textbook case: one rank much slower than its three peers
print("== one slow rank out of four ==")
show("median policy (1.5 x median)", [20.0, 20.0, 20.0, 60.0], MEDIAN_POLICY)
show("fastest-group policy (2 x mean)", [20.0, 20.0, 20.0, 60.0], FASTEST_GROUP_POLICY)

# --- the pathological regime: MOST ranks are stragglers.  The median policy
# cannot see this (the median itself is slow); the fastest-group policy can.
print("\n== 62 of 72 ranks slow (majority stragglers) ==")
histogram = [60.0] * 62 + [20.0] * 10
show("median policy", histogram, MEDIAN_POLICY)
show("fastest-group policy", histogram, FASTEST_GROUP_POLICY)

# --- no spread, no stragglers, under either policy
print("\n== perfectly balanced run ==")
uniform = [30.0] * 24
show("median policy", uniform, MEDIAN_POLICY)
show("fastest-group policy", uniform, FASTEST_GROUP_POLICY)

# --- noisy but healthy: small jitter should not trip either policy
print("\n== healthy run with 5% jitter ==")
noisy = list(30.0 + rng.normal(scale=1.5, size=24))
show("median policy", noisy, MEDIAN_POLICY)
show("fastest-group policy", noisy, FASTEST_GROUP_POLICY)

# --- threshold monotonicity: a stricter factor can only flag fewer ranks
print("\n== threshold monotonicity ==")
values = list(rng.uniform(10, 80, size=32))
loose = set(show("median factor 1.5", values, MEDIAN_POLICY, median_factor=1.5))
tight = set(show("median factor 2.0", values, MEDIAN_POLICY, median_factor=2.0))
assert tight <= loose
print("flags at factor 2.0 are a subset of flags at factor 1.5: OK")
