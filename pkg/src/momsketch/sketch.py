"""Sketch distributions and the stochastic objective f_S with its gradient.

A sketch S is an m x q matrix drawn from a distribution D. Given the metric
B, the random matrix H = S (S^T A B^{-1} A^T S)^+ S^T defines

    f_S(x)      = 1/2 (Ax - b)^T H (Ax - b)
    grad f_S(x) = B^{-1} A^T H (Ax - b)      (gradient in the B inner product)
    Z           = A^T H A.

All routines work with the small q x q matrix S^T A B^{-1} A^T S instead of
forming H.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .linalg import LinearSystem, MetricSpec, pinv_psd

log = logging.getLogger(__name__)

SketchKind = Literal["row", "block", "gaussian", "column"]

# below this the sketched Gram matrix is treated as zero and the step is skipped
GRAM_FLOOR = 1e-30


def _validate_probs(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0 or np.any(p < 0) or not np.isfinite(p).all():
        raise ValueError("probabilities must be finite and nonnegative")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {p.sum():.15g}, not 1")
    return p


@dataclass(frozen=True, eq=False)
class Sketcher:
    """Distribution over sketch matrices.

    Use the named constructors rather than building this directly:
    ``kaczmarz``, ``coordinate_descent``, ``rows``, ``block``, ``gaussian``
    and ``column_coordinate``.
    """

    kind: SketchKind
    m: int
    probs: np.ndarray | None = None
    block_size: int = 1
    columns: np.ndarray | None = field(default=None, repr=False)
    _cdf: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind in ("row", "column"):
            p = _validate_probs(self.probs)
            if self.kind == "row" and p.size != self.m:
                raise ValueError("row probabilities must have length m")
            cdf = np.cumsum(p)
            cdf[-1] = 1.0
            object.__setattr__(self, "probs", p)
            object.__setattr__(self, "_cdf", cdf)
        if self.kind == "column" and self.columns is None:
            raise ValueError("column sketcher needs the matrix columns")
        if self.kind == "block" and not 1 <= self.block_size <= self.m:
            raise ValueError("block_size must lie in [1, m]")

    # -- constructors -----------------------------------------------------

    @classmethod
    def rows(cls, probs) -> Sketcher:
        p = np.asarray(probs, dtype=float)
        return cls("row", p.size, probs=p)

    @classmethod
    def kaczmarz(cls, system: LinearSystem) -> Sketcher:
        """Rows with p_i = ||A_i:||^2 / ||A||_F^2."""
        return cls.rows(system.row_sq_norms / system.fro_sq)

    @classmethod
    def coordinate_descent(cls, system: LinearSystem) -> Sketcher:
        """Rows with p_i = A_ii / Trace(A); A must be positive definite."""
        if system.m != system.n:
            raise ValueError("coordinate descent needs a square system")
        d = np.diag(system.dense).copy()
        if np.any(d <= 0):
            raise ValueError("coordinate descent needs a positive diagonal")
        return cls.rows(d / d.sum())

    @classmethod
    def uniform_rows(cls, m: int) -> Sketcher:
        return cls.rows(np.full(m, 1.0 / m))

    @classmethod
    def block(cls, m: int, block_size: int) -> Sketcher:
        return cls("block", m, block_size=block_size)

    @classmethod
    def gaussian(cls, m: int) -> Sketcher:
        return cls("gaussian", m)

    @classmethod
    def column_coordinate(cls, system: LinearSystem) -> Sketcher:
        """S = A_{:i} with p_i = ||A_{:i}||^2 / ||A||_F^2 (use with B = A^T A)."""
        A = system.dense
        col_sq = np.einsum("ij,ij->j", A, A)
        return cls("column", system.m, probs=col_sq / col_sq.sum(), columns=A)

    # -- sampling ---------------------------------------------------------

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Batch categorical draws; identical to ``size`` calls of ``sample``."""
        if self._cdf is None:
            raise TypeError(f"{self.kind} sketches are not categorical")
        u = rng.random(size)
        return np.searchsorted(self._cdf, u, side="right").astype(np.int64)

    def sample_from_index(self, i: int) -> SketchSample:
        if self.kind == "row":
            return SketchSample("row", index=i)
        if self.kind == "column":
            return SketchSample("column", index=i, vector=self.columns[:, i])
        raise TypeError(f"{self.kind} sketches are not categorical")


@dataclass(frozen=True, eq=False)
class SketchSample:
    """One realized sketch.

    ``row`` samples carry ``index`` (S = e_index), ``block`` samples carry
    ``indices`` (S = I_{:C}), ``gaussian`` and ``column`` samples carry the
    dense m-vector S in ``vector``.
    """

    kind: SketchKind
    index: int = -1
    indices: np.ndarray | None = None
    vector: np.ndarray | None = None

    def matrix(self, m: int) -> np.ndarray:
        """S as a dense m x q array."""
        if self.kind == "row":
            S = np.zeros((m, 1))
            S[self.index, 0] = 1.0
            return S
        if self.kind == "block":
            S = np.zeros((m, len(self.indices)))
            S[self.indices, np.arange(len(self.indices))] = 1.0
            return S
        return self.vector.reshape(m, 1)

    def sketch_vector(self, v: np.ndarray) -> np.ndarray:
        """S^T v for an m-vector v."""
        if self.kind == "row":
            return np.array([v[self.index]])
        if self.kind == "block":
            return v[self.indices]
        return np.array([self.vector @ v])


def sample(sk: Sketcher, rng: np.random.Generator) -> SketchSample:
    if sk.kind in ("row", "column"):
        return sk.sample_from_index(int(sk.sample_indices(rng, 1)[0]))
    if sk.kind == "block":
        idx = np.sort(rng.choice(sk.m, size=sk.block_size, replace=False))
        return SketchSample("block", indices=idx)
    return SketchSample("gaussian", vector=rng.standard_normal(sk.m))


# -- the sketched quadratic ---------------------------------------------------


def _sketched_AT(system: LinearSystem, s: SketchSample) -> np.ndarray:
    """A^T S as an n x q array."""
    A = system.A
    if s.kind == "row":
        row = A[s.index]
        row = row.toarray().ravel() if system.is_sparse else row
        return row.reshape(-1, 1)
    if s.kind == "block":
        rows = A[s.indices]
        rows = rows.toarray() if system.is_sparse else rows
        return rows.T.copy()
    return np.asarray(A.T @ s.vector).reshape(-1, 1)


@dataclass(frozen=True)
class _Sketched:
    AtS: np.ndarray  # n x q
    BinvAtS: np.ndarray  # n x q
    G_pinv: np.ndarray  # (S^T A B^-1 A^T S)^+, q x q
    degenerate: bool


def _sketch(system: LinearSystem, metric: MetricSpec, s: SketchSample) -> _Sketched:
    AtS = _sketched_AT(system, s)
    BinvAtS = metric.solve(AtS)
    G = AtS.T @ BinvAtS
    if G.shape == (1, 1):
        g = float(G[0, 0])
        degenerate = g <= GRAM_FLOOR
        Gp = np.zeros((1, 1)) if degenerate else np.array([[1.0 / g]])
    else:
        degenerate = not np.any(np.abs(G) > GRAM_FLOOR)
        Gp = pinv_psd(0.5 * (G + G.T)) if not degenerate else np.zeros_like(G)
    if degenerate:
        log.debug("zero sketched system (%s sketch); step skipped", s.kind)
    return _Sketched(AtS, BinvAtS, Gp, degenerate)


def stoch_grad(
    system: LinearSystem, metric: MetricSpec, s: SketchSample, x: np.ndarray
) -> np.ndarray:
    """B^{-1} A^T S (S^T A B^{-1} A^T S)^+ S^T (Ax - b)."""
    sk = _sketch(system, metric, s)
    if sk.degenerate:
        return np.zeros(system.n)
    r = s.sketch_vector(system.residual(x))
    return sk.BinvAtS @ (sk.G_pinv @ r)


def f_S_value(
    system: LinearSystem, metric: MetricSpec, s: SketchSample, x: np.ndarray
) -> float:
    """1/2 ||Ax - b||_H^2."""
    sk = _sketch(system, metric, s)
    r = s.sketch_vector(system.residual(x))
    return 0.5 * float(r @ sk.G_pinv @ r)


def z_matrix(system: LinearSystem, metric: MetricSpec, s: SketchSample) -> np.ndarray:
    """Z = A^T H A for one sketch."""
    sk = _sketch(system, metric, s)
    return sk.AtS @ sk.G_pinv @ sk.AtS.T


# -- closed forms for the two classical special cases -------------------------

ClosedVariant = Literal["mRK", "mRCD"]


def _check_variant(system: LinearSystem, metric: MetricSpec, variant: str) -> None:
    if variant == "mRK":
        if not metric.is_identity:
            raise ValueError("mRK closed forms require B = I")
    elif variant == "mRCD":
        if metric.kind != "system":
            raise ValueError("mRCD closed forms require B = A")
    else:
        raise ValueError(f"unknown variant {variant!r}")


def f_value_closed(
    system: LinearSystem, metric: MetricSpec, variant: ClosedVariant, x: np.ndarray
) -> float:
    """Population objective f(x) = E[f_S(x)] for mRK or mRCD."""
    _check_variant(system, metric, variant)
    r = system.residual(x)
    denom = system.fro_sq if variant == "mRK" else float(np.trace(system.dense))
    return float(r @ r) / (2.0 * denom)


def expected_Z_closed(
    system: LinearSystem, metric: MetricSpec, variant: ClosedVariant
) -> np.ndarray:
    """E[Z]: A^T A / ||A||_F^2 for mRK, A^2 / Trace(A) for mRCD."""
    _check_variant(system, metric, variant)
    A = system.dense
    if variant == "mRK":
        return A.T @ A / system.fro_sq
    return A @ A / float(np.trace(A))


def W_closed(
    system: LinearSystem, metric: MetricSpec, variant: ClosedVariant
) -> np.ndarray:
    """W: A^T A / ||A||_F^2 for mRK, A / Trace(A) for mRCD."""
    _check_variant(system, metric, variant)
    A = system.dense
    if variant == "mRK":
        return A.T @ A / system.fro_sq
    return A / float(np.trace(A))
