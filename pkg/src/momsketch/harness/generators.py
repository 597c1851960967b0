"""Synthetic consistent systems used by the experiments."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..linalg import LinearSystem
from ..rng import DATA_STREAM, make_rng

MAX_PD_RETRIES = 20


def gen_gaussian_system(m: int, n: int, seed: int) -> LinearSystem:
    """A with i.i.d. N(0, 1) entries, b = A z for Gaussian z."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rng = make_rng(seed, DATA_STREAM)
    A = rng.standard_normal((m, n))
    z = rng.standard_normal(n)
    return LinearSystem(A, A @ z)


def gen_pd_system(m: int, n: int, seed: int) -> LinearSystem:
    """A = P^T P for Gaussian m x n P, b = A z."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rng = make_rng(seed, DATA_STREAM)
    for _ in range(MAX_PD_RETRIES):
        P = rng.standard_normal((m, n))
        A = P.T @ P
        A = 0.5 * (A + A.T)
        w = np.linalg.eigvalsh(A)
        if w[0] > 1e-10 * w[-1]:
            z = rng.standard_normal(n)
            return LinearSystem(A, A @ z)
    raise ValueError(f"P^T P numerically singular for m={m}, n={n}; use m >= n")


def sparse_row_mask(m: int, n: int, g: int, rng: np.random.Generator) -> np.ndarray:
    """Column indices (m x g) of the kept entries, sorted per row."""
    keys = rng.random((m, n))
    return np.sort(np.argsort(keys, axis=1)[:, :g], axis=1)


def gen_sparse_rows_system(m: int, n: int, g: int, seed: int) -> LinearSystem:
    """Gaussian matrix with exactly g nonzeros per row, stored as CSR.

    The values come from the same Gaussian draw for every g, so systems for
    different g at one seed share their surviving entries.
    """
    if not 1 <= g <= n:
        raise ValueError("need 1 <= g <= n")
    rng = make_rng(seed, DATA_STREAM)
    base = rng.standard_normal((m, n))
    cols = sparse_row_mask(m, n, g, make_rng(seed, DATA_STREAM, g))
    rows = np.repeat(np.arange(m), g)
    vals = base[rows, cols.ravel()]
    A = sp.csr_matrix((vals, (rows, cols.ravel())), shape=(m, n))
    z = make_rng(seed, DATA_STREAM, g, 1).standard_normal(n)
    return LinearSystem(A, A @ z)


def system_from_matrix(A, seed: int) -> LinearSystem:
    """Attach a consistent right-hand side b = A z, z ~ N(0, I)."""
    z = make_rng(seed, DATA_STREAM, 7).standard_normal(A.shape[1])
    return LinearSystem(A, A @ z)
