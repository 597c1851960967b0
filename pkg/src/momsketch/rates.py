"""Convergence-rate constants for heavy-ball and stochastic-momentum methods.

For stepsize omega, momentum beta and the extreme nonzero eigenvalues of W,

    a1 = 1 + 3b + 2b^2 - (omega (2 - omega) + omega b) lmin
    a2 = b + 2b^2 + omega b lmax

and, when a1 + a2 < 1, the error recursion F_{k+1} <= a1 F_k + a2 F_{k-1}
with F_1 = F_0 is bounded by q^k (1 + delta) F_0 with
q = (a1 + sqrt(a1^2 + 4 a2)) / 2 and delta = q - a1. Stochastic momentum
replaces b by b / n in a1 and divides a2 by n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class RateError(ValueError):
    pass


@dataclass(frozen=True)
class RateReport:
    a1: float
    a2: float
    q: float
    delta: float
    admissible: bool

    def bound(self, k) -> np.ndarray | float:
        """Multiplier q^k (1 + delta) on the initial error."""
        return self.q ** np.asarray(k, dtype=float) * (1.0 + self.delta)


def _lemma_q(a1: float, a2: float) -> tuple[float, float]:
    q = 0.5 * (a1 + math.sqrt(a1 * a1 + 4.0 * a2))
    return q, q - a1


def _check(omega: float, beta: float, lmin: float, lmax: float) -> None:
    if not 0.0 < omega < 2.0:
        raise RateError("omega must lie in (0, 2)")
    if beta < 0.0:
        raise RateError("beta must be nonnegative")
    if not 0.0 < lmin <= lmax <= 1.0 + 1e-12:
        raise RateError("need 0 < lambda_min_plus <= lambda_max <= 1")


def _report(a1: float, a2: float) -> RateReport:
    q, delta = _lemma_q(a1, a2)
    return RateReport(a1, a2, q, delta, admissible=(a1 + a2 < 1.0))


def rate_constants(
    omega: float, beta: float, lambda_min_plus: float, lambda_max: float
) -> RateReport:
    """L2 rate constants for mSGD/mSN/mSPP."""
    _check(omega, beta, lambda_min_plus, lambda_max)
    a1 = 1 + 3 * beta + 2 * beta**2 - (omega * (2 - omega) + omega * beta) * lambda_min_plus
    a2 = beta + 2 * beta**2 + omega * beta * lambda_max
    return _report(a1, a2)


def sm_rate_constants(
    omega: float, beta: float, n: int, lambda_min_plus: float, lambda_max: float
) -> RateReport:
    """L2 rate constants for stochastic momentum on n coordinates (B = I)."""
    _check(omega, beta, lambda_min_plus, lambda_max)
    if n < 1:
        raise RateError("n must be >= 1")
    bn = beta / n
    a1 = 1 + 3 * bn + 2 * beta**2 / n - (omega * (2 - omega) + omega * bn) * lambda_min_plus
    a2 = (beta + 2 * beta**2 + omega * beta * lambda_max) / n
    return _report(a1, a2)


def beta_max(omega: float, lambda_min_plus: float, lambda_max: float) -> float:
    """Supremum of the momentum values keeping a1 + a2 < 1."""
    if not 0.0 < omega < 2.0:
        raise RateError("omega must lie in (0, 2)")
    lmin, lmax = lambda_min_plus, lambda_max
    c = 4 - omega * lmin + omega * lmax
    return 0.125 * (
        -4 + omega * lmin - omega * lmax
        + math.sqrt(c * c + 16 * omega * (2 - omega) * lmin)
    )


def accelerated_params(
    lambda_min_plus: float, lambda_max: float, mode: str = "unit_step"
) -> tuple[float, float]:
    """(omega, beta) giving the accelerated rate beta^k for ||E[x_k - x*]||_B^2."""
    if lambda_min_plus <= 0.0:
        raise RateError("lambda_min_plus must be positive")
    if not lambda_min_plus <= lambda_max <= 1.0 + 1e-12:
        raise RateError("need lambda_min_plus <= lambda_max <= 1")
    if mode == "unit_step":
        omega = 1.0
        beta = (1.0 - math.sqrt(0.99 * lambda_min_plus)) ** 2
    elif mode == "inv_lmax":
        omega = 1.0 / lambda_max
        beta = (1.0 - math.sqrt(0.99 * lambda_min_plus / lambda_max)) ** 2
    else:
        raise RateError(f"unknown mode {mode!r}")
    lower = (1.0 - math.sqrt(omega * lambda_min_plus)) ** 2
    if not lower < beta < 1.0:
        raise RateError("momentum outside the accelerated window")
    return omega, beta


def cesaro_bound(omega: float, beta: float, dist0_sq: float, f0: float, k: int) -> float:
    """Bound on E[f(mean of x_1..x_k)]."""
    if omega <= 0 or not 0.0 <= beta < 1.0:
        raise RateError("need omega > 0 and 0 <= beta < 1")
    if omega + 2 * beta >= 2:
        raise RateError("need omega + 2 beta < 2")
    if k < 1:
        raise RateError("k must be >= 1")
    num = (1 - beta) ** 2 * dist0_sq + 2 * omega * beta * f0
    return num / (2 * omega * (2 - 2 * beta - omega) * k)


def recursion_bound(a1: float, a2: float, F0: float, k: int) -> float:
    """q^k (1 + delta) F0, an upper bound on F_{k+1} of the two-term recursion."""
    if a2 < 0 or a1 + a2 >= 1 or (a1 <= 0 and a2 <= 0):
        raise RateError("inadmissible recursion coefficients")
    if F0 < 0:
        raise RateError("F0 must be nonnegative")
    q, delta = _lemma_q(a1, a2)
    return q**k * (1 + delta) * F0


def unroll_recursion(a1: float, a2: float, F0: float, kmax: int) -> np.ndarray:
    """F_0..F_{kmax+1} of F_{k+1} = a1 F_k + a2 F_{k-1} with F_1 = F_0."""
    F = np.empty(kmax + 2)
    F[0] = F[1] = F0
    for j in range(1, kmax + 1):
        F[j + 1] = a1 * F[j] + a2 * F[j - 1]
    return F


@dataclass(frozen=True)
class ComplexityModel:
    """Per-iteration operation counts for row-sketch methods with g nonzeros per row."""

    n: int
    g: float

    def __post_init__(self):
        if self.n < 1 or not 0 < self.g:
            raise ValueError("need n >= 1 and g > 0")

    @property
    def basic(self) -> float:
        return 4 * self.g

    @property
    def momentum(self) -> float:
        return 4 * self.g + 3 * self.n

    @property
    def stochastic_momentum(self) -> float:
        return 4 * self.g + 1

    @property
    def asymptote(self) -> float:
        return 1 + self.n / self.g


def complexity_ratio(
    model: ComplexityModel,
    beta: float,
    omega: float,
    lambda_min_plus: float,
    lambda_max: float,
) -> dict:
    """Total-complexity comparison of mSGD(beta) against smSGD(beta * n).

    Uses per-iteration costs g + n and g, so the ratio tends to 1 + n / g as
    beta -> 0.
    """
    n, g = model.n, model.g
    heavy = rate_constants(omega, beta, lambda_min_plus, lambda_max)
    stoch = sm_rate_constants(omega, beta * n, n, lambda_min_plus, lambda_max)
    if not (heavy.admissible and stoch.admissible):
        raise RateError("beta is not admissible for both methods")
    c_m = (g + n) / (1 - heavy.q)
    c_s = g / (1 - stoch.q)
    return {
        "C_mSGD": c_m,
        "C_smSGD": c_s,
        "ratio": c_m / c_s,
        "asymptote": model.asymptote,
    }
