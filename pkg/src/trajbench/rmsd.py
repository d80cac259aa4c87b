"""Minimal RMSD after optimal rigid-body superposition.

``rmsd_qcp`` finds the minimum over all proper rotations and translations of
the root mean squared distance between two paired point sets.  Translations
drop out by centering both sets; the optimal rotation enters only through
the largest eigenvalue of the 4x4 quaternion key matrix, which is obtained
by Newton iteration on its characteristic quartic, so no rotation matrix is
ever constructed.

``rmsd_kabsch_oracle`` is a deliberately independent implementation (SVD of
the covariance matrix with a proper-rotation sign correction) used to
cross-validate the fast path; the two share no solver code.
"""

from __future__ import annotations

import time as _time
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BlockReadError
from .model import BlockAssignment, RankTiming, System

__all__ = [
    "RmsdResult",
    "RmsdFallbackWarning",
    "rmsd_qcp",
    "rmsd_kabsch_oracle",
    "block_rmsd",
    "NEWTON_TOLERANCE",
    "NEWTON_MAX_ITER",
]

#: Absolute convergence tolerance of the Newton iteration on the quartic.
NEWTON_TOLERANCE = 1e-11
NEWTON_MAX_ITER = 50


class RmsdFallbackWarning(UserWarning):
    """The fast eigenvalue path degraded to the SVD fallback for one input."""


@dataclass(frozen=True)
class RmsdResult:
    frame_index: int
    time: float
    rmsd: float


def _checked_pair(mobile, reference):
    a = np.asarray(mobile, dtype=np.float64)
    b = np.asarray(reference, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"expected (M, 3) arrays, got {a.shape}")
    if a.shape[0] < 3:
        raise ValueError(f"need at least 3 points, got {a.shape[0]}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("coordinates contain non-finite values")
    return a, b


def rmsd_kabsch_oracle(mobile, reference) -> float:
    """Minimal RMSD via SVD superposition (independent reference path).

    The covariance matrix of the centered sets is decomposed with SVD and
    the rotation is forced to be proper (det = +1), so reflected inputs keep
    a strictly positive deviation.
    """
    a, b = _checked_pair(mobile, reference)
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    h = a.T @ b
    u, s, vt = np.linalg.svd(h)
    if np.linalg.det(u @ vt) < 0:
        u[:, -1] = -u[:, -1]
    rot = u @ vt
    diff = a @ rot - b
    return float(np.sqrt((diff * diff).sum() / a.shape[0]))


def _det3(a, b, c, d, e, f, g, h, i) -> float:
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def rmsd_qcp(mobile, reference) -> float:
    """Minimal RMSD via the quaternion characteristic-polynomial method.

    Both sets are centered, the 3x3 correlation matrix is formed, and the
    largest eigenvalue of the 4x4 key matrix is located by Newton iteration
    on the characteristic quartic starting from ``(G_a + G_b) / 2``, which
    bounds it from above.  The coefficients are scalar expressions, so the
    hot path makes no linear-algebra library calls.  Degenerate inputs
    (correlation rank < 2) and non-converged iterations fall back to the
    SVD oracle and emit a :class:`RmsdFallbackWarning`.
    """
    a, b = _checked_pair(mobile, reference)
    m = a.shape[0]
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    g_a = float((a * a).sum())
    g_b = float((b * b).sum())
    sxx, sxy, sxz, syx, syy, syz, szx, szy, szz = (a.T @ b).ravel().tolist()

    # rank < 2 exactly when every 2x2 minor of the correlation matrix
    # vanishes; compared in scale-invariant form
    minors2 = (
        (sxx * syy - sxy * syx) ** 2
        + (sxx * syz - sxz * syx) ** 2
        + (sxy * syz - sxz * syy) ** 2
        + (sxx * szy - sxy * szx) ** 2
        + (sxx * szz - sxz * szx) ** 2
        + (sxy * szz - sxz * szy) ** 2
        + (syx * szy - syy * szx) ** 2
        + (syx * szz - syz * szx) ** 2
        + (syy * szz - syz * szy) ** 2
    )
    frob2 = (
        sxx * sxx + sxy * sxy + sxz * sxz
        + syx * syx + syy * syy + syz * syz
        + szx * szx + szy * szy + szz * szz
    )
    if minors2 <= (1e-12 * frob2) ** 2:
        warnings.warn(
            "degenerate point set (correlation rank < 2); using SVD fallback",
            RmsdFallbackWarning,
            stacklevel=2,
        )
        return rmsd_kabsch_oracle(mobile, reference)

    # symmetric traceless 4x4 key matrix
    k00 = sxx + syy + szz
    k01 = syz - szy
    k02 = szx - sxz
    k03 = sxy - syx
    k11 = sxx - syy - szz
    k12 = sxy + syx
    k13 = szx + sxz
    k22 = -sxx + syy - szz
    k23 = syz + szy
    k33 = -sxx - syy + szz

    c2 = -2.0 * frob2
    c1 = -8.0 * _det3(sxx, sxy, sxz, syx, syy, syz, szx, szy, szz)
    c0 = (
        k00 * _det3(k11, k12, k13, k12, k22, k23, k13, k23, k33)
        - k01 * _det3(k01, k12, k13, k02, k22, k23, k03, k23, k33)
        + k02 * _det3(k01, k11, k13, k02, k12, k23, k03, k13, k33)
        - k03 * _det3(k01, k11, k12, k02, k12, k22, k03, k13, k23)
    )

    lam = 0.5 * (g_a + g_b)
    converged = False
    for _ in range(NEWTON_MAX_ITER):
        lam2 = lam * lam
        p = lam2 * lam2 + c2 * lam2 + c1 * lam + c0
        dp = 4.0 * lam2 * lam + 2.0 * c2 * lam + c1
        if dp == 0.0:
            break
        step = p / dp
        lam -= step
        if abs(step) < NEWTON_TOLERANCE:
            converged = True
            break
    if not converged:
        warnings.warn(
            "eigenvalue iteration did not converge; using SVD fallback",
            RmsdFallbackWarning,
            stacklevel=2,
        )
        return rmsd_kabsch_oracle(mobile, reference)
    radicand = g_a + g_b - 2.0 * lam
    # the radicand is a difference of G-scale quantities, so anything below
    # a few ulps of (G_a + G_b) is cancellation noise, not signal; clamping
    # covers the negative excursions too
    if radicand <= 16.0 * np.finfo(np.float64).eps * (g_a + g_b):
        return 0.0
    return float(np.sqrt(radicand / m))


def block_rmsd(
    source,
    system: System,
    block: BlockAssignment,
    workload_factor: int = 1,
) -> tuple[list[RmsdResult], RankTiming]:
    """Run the per-frame RMSD over one block of frames.

    For every frame in ``[block.start, block.stop)`` the frame is read (read
    time accumulated into ``t_io`` unless the source is an in-memory view),
    the mobile subset extracted, and the deviation computed
    ``workload_factor`` times with every repetition timed into ``t_comp``;
    the value of the last repetition is kept.  Returns the results in frame
    order and a partial timing record with the loop-level quantities filled
    in (``t_opening_trajectory`` and ``t_comm`` are the caller's business).

    A failed read aborts the block with :class:`BlockReadError`; partial
    results are discarded.
    """
    if workload_factor < 1:
        raise ValueError(f"workload_factor must be >= 1, got {workload_factor}")
    counts_io = getattr(source, "counts_io", True)
    mobile = system.mobile_indices
    reference = system.reference_positions
    results: list[RmsdResult] = []
    t_io = 0.0
    t_comp = 0.0
    clock = _time.perf_counter

    loop_start = clock()
    last_iter_end = loop_start
    for i in range(block.start, block.stop):
        t0 = clock()
        try:
            frame = source.read_frame(i)
        except Exception as exc:
            raise BlockReadError(block.rank, i, exc) from exc
        t1 = clock()
        if counts_io:
            t_io += t1 - t0

        t0 = clock()
        xyz = frame.positions[mobile]
        for _ in range(workload_factor):
            value = rmsd_qcp(xyz, reference)
        t_comp += clock() - t0

        results.append(RmsdResult(frame_index=i, time=frame.time, rmsd=value))
        last_iter_end = clock()

    source.close()
    loop_end = clock()
    t_end_loop = loop_end - last_iter_end
    t_all_frame = loop_end - loop_start
    timing = RankTiming.build(
        rank=block.rank,
        t_opening_trajectory=0.0,
        t_io=t_io,
        t_comp=t_comp,
        t_end_loop=t_end_loop,
        t_all_frame=t_all_frame,
        t_rmsd=t_all_frame,
        t_comm=0.0,
        n_frames_processed=len(results),
    )
    return results, timing
