"""Dense/sparse system storage, B-geometry and PSD pseudoinversion.

Everything here is built once and then treated as read-only; derived
quantities (dense copies, factorizations) are cached lazily on first use.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.sparse as sp

PINV_REL_TOL = 1e-10
CONSISTENCY_TOL = 1e-8
SPECTRUM_ZERO_TOL = 1e-9


class InconsistentSystemError(ValueError):
    """Raised when ``b`` is not in the range of ``A``."""


class DegenerateSpectrumError(ValueError):
    """Raised when every eigenvalue of W is numerically zero."""


def _check_symmetric(M: np.ndarray, tol: float = 1e-12) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() > tol * scale:
        raise ValueError("matrix is not symmetric")


def pinv_psd(M: np.ndarray, rel_tol: float = PINV_REL_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix.

    Eigenvalues below ``rel_tol * lambda_max`` are treated as zero.
    """
    M = np.asarray(M, dtype=float)
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    _check_symmetric(M)
    if M.size == 0:
        return M.copy()
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    lmax = w.max()
    if lmax <= 0.0:
        return np.zeros_like(M)
    keep = w > rel_tol * lmax
    Vk = V[:, keep]
    return (Vk / w[keep]) @ Vk.T


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """A consistent linear system ``A x = b``.

    ``A`` may be a dense ndarray or any scipy sparse matrix; sparse input is
    kept in CSR form. Consistency is verified on construction.
    """

    A: np.ndarray | sp.csr_matrix
    b: np.ndarray
    check_consistency: bool = True
    row_sq_norms: np.ndarray = field(init=False, repr=False)
    row_nnz: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        A = self.A
        if sp.issparse(A):
            A = sp.csr_matrix(A, dtype=float)
            A.sum_duplicates()
            row_sq = np.asarray(A.multiply(A).sum(axis=1)).ravel()
            nnz = np.diff(A.indptr)
        else:
            A = np.array(A, dtype=float)
            if A.ndim != 2:
                raise ValueError("A must be two-dimensional")
            row_sq = np.einsum("ij,ij->i", A, A)
            nnz = np.count_nonzero(A, axis=1)
        b = np.array(self.b, dtype=float).ravel()
        if b.shape[0] != A.shape[0]:
            raise ValueError(f"b has length {b.shape[0]}, expected {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "row_sq_norms", row_sq)
        object.__setattr__(self, "row_nnz", nnz)
        if self.check_consistency:
            res = self.consistency_residual()
            if res > CONSISTENCY_TOL * max(np.linalg.norm(b), 1e-300):
                raise InconsistentSystemError(
                    f"least-squares residual {res:.3e} exceeds tolerance"
                )

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.A)

    @cached_property
    def dense(self) -> np.ndarray:
        return self.A.toarray() if self.is_sparse else self.A

    @cached_property
    def fro_sq(self) -> float:
        return float(self.row_sq_norms.sum())

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        return self.A.T @ y

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x - self.b

    def consistency_residual(self) -> float:
        if not np.any(self.b):
            return 0.0
        x, *_ = np.linalg.lstsq(self.dense, self.b, rcond=None)
        return float(np.linalg.norm(self.dense @ x - self.b))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.dense).tobytes())
        h.update(np.ascontiguousarray(self.b).tobytes())
        return h.hexdigest()[:16]


MetricKind = Literal["identity", "system", "gram"]


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """The positive definite matrix B defining the geometry of the method."""

    kind: MetricKind
    B: np.ndarray

    def __post_init__(self) -> None:
        B = np.array(self.B, dtype=float)
        _check_symmetric(B, tol=1e-10)
        object.__setattr__(self, "B", 0.5 * (B + B.T))
        if self.kind != "identity":
            w = self._eig[0]
            if w.min() <= 1e-12 * max(w.max(), 1.0):
                raise ValueError("metric matrix B is not positive definite")

    @classmethod
    def identity(cls, n: int) -> MetricSpec:
        return cls("identity", np.eye(n))

    @classmethod
    def system_matrix(cls, system: LinearSystem) -> MetricSpec:
        """B = A, for symmetric positive definite A (coordinate descent)."""
        if system.m != system.n:
            raise ValueError("B = A requires a square system matrix")
        return cls("system", system.dense)

    @classmethod
    def gram(cls, system: LinearSystem) -> MetricSpec:
        """B = A^T A, for A of full column rank."""
        A = system.dense
        return cls("gram", A.T @ A)

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.B)

    @cached_property
    def sqrt(self) -> np.ndarray:
        if self.is_identity:
            return np.eye(self.n)
        w, V = self._eig
        return (V * np.sqrt(w)) @ V.T

    @cached_property
    def inv_sqrt(self) -> np.ndarray:
        if self.is_identity:
            return np.eye(self.n)
        w, V = self._eig
        return (V / np.sqrt(w)) @ V.T

    @cached_property
    def inv(self) -> np.ndarray:
        if self.is_identity:
            return np.eye(self.n)
        w, V = self._eig
        return (V / w) @ V.T

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x.copy() if self.is_identity else self.B @ x

    def solve(self, x: np.ndarray) -> np.ndarray:
        """Apply B^{-1} to a vector or to the columns of a matrix."""
        return x.copy() if self.is_identity else self.inv @ x

    def norm_sq(self, x: np.ndarray) -> float:
        return b_inner(x, x, self)


def b_inner(x: np.ndarray, y: np.ndarray, metric: MetricSpec) -> float:
    """The B-inner product <Bx, y>."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.shape[0] != metric.n:
        raise ValueError(
            f"dimension mismatch: {x.shape}, {y.shape}, metric of size {metric.n}"
        )
    if metric.is_identity:
        return float(x @ y)
    return float((metric.B @ x) @ y)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    lambda_min_plus: float
    lambda_max: float
    zero_tol: float
    exact: bool

    @property
    def inv_lambda_min_plus(self) -> float:
        return 1.0 / self.lambda_min_plus


def project_onto_solution_set(
    system: LinearSystem, metric: MetricSpec, x: np.ndarray
) -> np.ndarray:
    """B-orthogonal projection of ``x`` onto {x : Ax = b}."""
    x = np.asarray(x, dtype=float)
    if x.shape != (system.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({system.n},)")
    A = system.dense
    BinvAt = metric.solve(A.T)
    G = A @ BinvAt
    r = A @ x - system.b
    return x - BinvAt @ (pinv_psd(0.5 * (G + G.T)) @ r)


def spectrum_W(
    system: LinearSystem, metric: MetricSpec, ez: np.ndarray
) -> SpectrumReport:
    """Eigenvalues of W = B^{-1/2} E[Z] B^{-1/2}.

    ``ez`` is either a closed form or a Monte-Carlo estimate of E[Z].
    """
    ez = np.asarray(ez, dtype=float)
    if ez.shape != (system.n, system.n):
        raise ValueError("E[Z] must be n x n")
    _check_symmetric(ez, tol=1e-9)
    W = metric.inv_sqrt @ ez @ metric.inv_sqrt
    lam = np.linalg.eigvalsh(0.5 * (W + W.T))
    lmax = float(lam[-1])
    if lmax <= 0.0:
        raise DegenerateSpectrumError("all eigenvalues of W are zero")
    zero_tol = SPECTRUM_ZERO_TOL * lmax
    nonzero = lam[lam > zero_tol]
    # E[Z] PD within tolerance implies E[H] PD when A has full column rank,
    # the usual sufficient condition for exactness.
    exact = bool(nonzero.size == lam.size)
    return SpectrumReport(
        eigenvalues=lam,
        lambda_min_plus=float(nonzero[0]),
        lambda_max=lmax,
        zero_tol=zero_tol,
        exact=exact,
    )


def estimate_EZ_monte_carlo(sketcher, system, metric, nsamples, seed):
    """Empirical mean of Z = A^T H A over ``nsamples`` i.i.d. sketches."""
    from .sketch import sample, z_matrix
    from .rng import make_rng

    if nsamples < 1:
        raise ValueError("nsamples must be >= 1")
    rng = make_rng(seed)
    acc = np.zeros((system.n, system.n))
    if sketcher.kind == "row":
        # aggregate by index: Z_i is the same matrix for every draw of row i
        idx = sketcher.sample_indices(rng, nsamples)
        counts = np.bincount(idx, minlength=system.m)
        for i in np.flatnonzero(counts):
            s = sketcher.sample_from_index(int(i))
            acc += counts[i] * z_matrix(system, metric, s)
    else:
        for _ in range(nsamples):
            acc += z_matrix(system, metric, sample(sketcher, rng))
    acc /= nsamples
    return 0.5 * (acc + acc.T)
