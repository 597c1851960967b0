"""Compiled inner loop for row-sketch SGD with (stochastic) heavy-ball momentum."""

from __future__ import annotations

import numpy as np
from numba import njit

MODE_NONE = 0
MODE_HEAVY_BALL = 1
MODE_STOCHASTIC = 2

STOP_NONE = 0
STOP_REL_B = 1
STOP_ABS_L2 = 2


@njit(cache=True)
def row_steps(
    A,
    BinvAt,
    dinv,
    b,
    idx,
    coords,
    x,
    xprev,
    omega,
    beta,
    mode,
    stop_kind,
    tol,
    xstar,
    B,
    b_identity,
    dist0,
    step_cost,
    extra_cost,
    k0,
    stride,
    ops0,
    track_cesaro,
    ces_sum,
    snaps,
    snap_k,
    snap_ops,
    ces_snaps,
):
    """Run ``len(idx)`` steps in place; returns (steps, snapshots, ops, stopped).

    A snapshot of x is written whenever the global step count is a multiple
    of ``stride`` or the stop rule fires.
    """
    m, n = A.shape
    tmp = np.empty(n)
    e = np.empty(n)
    nsnap = 0
    ops = ops0
    for t in range(idx.shape[0]):
        i = idx[t]
        if track_cesaro:
            for j in range(n):
                ces_sum[j] += x[j]
        r = -b[i]
        for j in range(n):
            r += A[i, j] * x[j]
        scale = omega * r * dinv[i]
        for j in range(n):
            tmp[j] = x[j] - scale * BinvAt[j, i]
        if mode == MODE_HEAVY_BALL:
            for j in range(n):
                tmp[j] += beta * (x[j] - xprev[j])
        elif mode == MODE_STOCHASTIC:
            c = coords[t]
            tmp[c] += beta * (x[c] - xprev[c])
        for j in range(n):
            xprev[j] = x[j]
            x[j] = tmp[j]
        ops += step_cost[i] + extra_cost
        k = k0 + t + 1

        stopped = False
        if stop_kind != STOP_NONE:
            for j in range(n):
                e[j] = x[j] - xstar[j]
            if stop_kind == STOP_ABS_L2 or b_identity:
                s = 0.0
                for j in range(n):
                    s += e[j] * e[j]
            else:
                s = 0.0
                for j in range(n):
                    bj = 0.0
                    for l in range(n):
                        bj += B[j, l] * e[l]
                    s += bj * e[j]
            if stop_kind == STOP_REL_B:
                stopped = s <= tol * dist0
            else:
                stopped = np.sqrt(s) < tol

        if k % stride == 0 or stopped:
            for j in range(n):
                snaps[nsnap, j] = x[j]
            if track_cesaro:
                for j in range(n):
                    ces_snaps[nsnap, j] = ces_sum[j] / k
            snap_k[nsnap] = k
            snap_ops[nsnap] = ops
            nsnap += 1
        if stopped:
            return t + 1, nsnap, ops, True
    return idx.shape[0], nsnap, ops, False
