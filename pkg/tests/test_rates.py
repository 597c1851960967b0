import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momsketch.rates import (
    ComplexityModel,
    RateError,
    accelerated_params,
    beta_max,
    cesaro_bound,
    complexity_ratio,
    rate_constants,
    recursion_bound,
    sm_rate_constants,
    unroll_recursion,
)

# Frozen from 50-digit mpmath evaluations of the closed forms.
ORACLE_Q = 0.9027569629854992
ORACLE_DELTA = 0.06845696298549921
ORACLE_SM_Q = 0.7516651745810486
ORACLE_BETA_MAX = 0.05048525400275946
ORACLE_ACC_UNIT = 2.512578676009053e-05
ORACLE_ACC_SMALL = 0.8109025125786760
ORACLE_RATIO_300_30 = 10.999998677164647
ORACLE_F21 = 0.000186280961328125
ORACLE_BOUND_20 = 0.00022995184335935760


def test_theorem_constants_oracle():
    r = rate_constants(1.0, 0.03, 0.25, 1.0)
    assert r.a1 == pytest.approx(0.8343, abs=1e-12)
    assert r.a2 == pytest.approx(0.0618, abs=1e-12)
    assert r.q == pytest.approx(ORACLE_Q, rel=1e-14)
    assert r.delta == pytest.approx(ORACLE_DELTA, rel=1e-12)
    assert r.admissible


def test_no_momentum_reduces_to_plain_rate():
    for omega in (0.3, 1.0, 1.7):
        r = rate_constants(omega, 0.0, 0.2, 0.9)
        assert r.q == pytest.approx(1 - omega * (2 - omega) * 0.2, rel=1e-14)
        assert r.delta == pytest.approx(0.0, abs=1e-15)
    assert rate_constants(1.0, 0.0, 1.0, 1.0).q == 0.0


def test_bound_multiplier():
    r = rate_constants(1.0, 0.03, 0.25, 1.0)
    np.testing.assert_allclose(r.bound([0, 3]), [1 + ORACLE_DELTA, ORACLE_Q**3 * (1 + ORACLE_DELTA)])


def test_beta_max_oracle_and_boundary():
    b = beta_max(1.0, 0.25, 1.0)
    assert b == pytest.approx(ORACLE_BETA_MAX, rel=1e-13)
    r = rate_constants(1.0, b, 0.25, 1.0)
    assert r.a1 + r.a2 == pytest.approx(1.0, abs=1e-12)
    assert rate_constants(1.0, 0.99 * b, 0.25, 1.0).admissible
    assert not rate_constants(1.0, 1.01 * b, 0.25, 1.0).admissible
    assert beta_max(1.0, 1e-14, 1.0) < 1e-13


def test_accelerated_params_oracle():
    assert accelerated_params(1.0, 1.0)[1] == pytest.approx(ORACLE_ACC_UNIT, rel=1e-12)
    assert accelerated_params(0.01, 1.0)[1] == pytest.approx(ORACLE_ACC_SMALL, rel=1e-14)
    assert accelerated_params(0.01, 1.0, "unit_step") == pytest.approx(
        accelerated_params(0.01, 1.0, "inv_lmax")
    )
    omega, beta = accelerated_params(0.01, 0.5, "inv_lmax")
    assert omega == 2.0 and beta == pytest.approx((1 - math.sqrt(0.0198)) ** 2)
    with pytest.raises(RateError):
        accelerated_params(0.0, 1.0)
    with pytest.raises(RateError):
        accelerated_params(0.1, 1.0, "nope")


def test_stochastic_constants_oracle():
    r = sm_rate_constants(1.0, 0.03, 100, 0.25, 1.0)
    assert r.a1 == pytest.approx(0.750843, abs=1e-12)
    assert r.a2 == pytest.approx(0.000618, abs=1e-12)
    assert r.q == pytest.approx(ORACLE_SM_Q, rel=1e-13)


def test_stochastic_constants_degenerate_cases():
    assert sm_rate_constants(0.7, 0.0, 50, 0.1, 0.8) == rate_constants(0.7, 0.0, 0.1, 0.8)
    assert sm_rate_constants(0.7, 0.04, 1, 0.1, 0.8) == rate_constants(0.7, 0.04, 0.1, 0.8)
    with pytest.raises(RateError):
        sm_rate_constants(1.0, 0.1, 0, 0.1, 1.0)


@st.composite
def admissible(draw):
    omega = draw(st.floats(0.05, 1.95))
    lmax = draw(st.floats(0.05, 1.0))
    lmin = draw(st.floats(0.01, 1.0)) * lmax
    n = draw(st.integers(1, 500))
    frac = draw(st.floats(0.0, 0.999))
    return omega, frac * beta_max(omega, lmin, lmax), n, lmin, lmax


@given(admissible())
@settings(max_examples=200, deadline=None)
def test_rate_ordering(t):
    omega, beta, n, lmin, lmax = t
    q0 = rate_constants(omega, 0.0, lmin, lmax).q
    q = rate_constants(omega, beta, lmin, lmax).q
    qs = sm_rate_constants(omega, beta * n, n, lmin, lmax).q
    assert q >= q0 - 1e-15
    assert qs >= q - 1e-12


@given(admissible())
@settings(max_examples=100, deadline=None)
def test_q_increases_with_beta(t):
    omega, beta, _, lmin, lmax = t
    assert rate_constants(omega, beta, lmin, lmax).q <= rate_constants(
        omega, min(beta * 1.1 + 1e-6, beta_max(omega, lmin, lmax)), lmin, lmax
    ).q + 1e-15


def test_cesaro_bound_examples():
    assert cesaro_bound(1.0, 0.3, 1.0, 0.5, 10) == pytest.approx(0.09875, rel=1e-14)
    assert cesaro_bound(0.5, 0.0, 2.0, 7.0, 4) == pytest.approx(2.0 / (2 * 0.5 * 1.5 * 4))
    for bad in [(1.0, 0.5, 1, 1, 1), (1.0, 1.0, 1, 1, 1), (1.0, 0.1, 1, 1, 0)]:
        with pytest.raises(RateError):
            cesaro_bound(*bad)


def test_recursion_oracle_and_unrolling():
    F = unroll_recursion(0.5, 0.1, 1.0, 20)
    assert F[21] == pytest.approx(ORACLE_F21, rel=1e-13)
    assert recursion_bound(0.5, 0.1, 1.0, 20) == pytest.approx(ORACLE_BOUND_20, rel=1e-13)


def test_recursion_special_cases():
    assert recursion_bound(0.6, 0.0, 2.0, 5) == pytest.approx(0.6**5 * 2.0)
    assert recursion_bound(0.6, 0.2, 0.0, 9) == 0.0
    for bad in [(0.8, 0.3), (0.5, -0.1)]:
        with pytest.raises(RateError):
            recursion_bound(*bad, 1.0, 1)


def test_recursion_bound_is_sound():
    rng = np.random.default_rng(12345)
    for _ in range(10_000):
        a2 = rng.uniform(0, 0.5)
        a1 = rng.uniform(0, 1 - a2)
        if a1 + a2 >= 1:
            continue
        F = unroll_recursion(a1, a2, 1.0, 100)
        k = np.arange(101)
        q = 0.5 * (a1 + math.sqrt(a1 * a1 + 4 * a2))
        bound = q**k * (1 + q - a1)
        assert np.all(F[1:] <= bound * (1 + 1e-12) + 1e-300)


def test_rate_argument_errors():
    for bad in [(0.0, 0.1, 0.1, 1), (2.0, 0.1, 0.1, 1), (1, -0.1, 0.1, 1), (1, 0, 0, 1), (1, 0, 0.5, 0.4)]:
        with pytest.raises(RateError):
            rate_constants(*bad)


def test_complexity_model_costs():
    m = ComplexityModel(100, 5)
    assert (m.basic, m.momentum, m.stochastic_momentum, m.asymptote) == (20, 320, 21, 21)
    assert ComplexityModel(40, 40).asymptote == 2
    assert ComplexityModel(100, 10).asymptote == 11
    with pytest.raises(ValueError):
        ComplexityModel(0, 1)


def test_complexity_ratio_limits():
    out = complexity_ratio(ComplexityModel(100, 10), 0.0, 1.0, 0.05, 0.8)
    assert out["ratio"] == pytest.approx(11.0, rel=1e-14)
    out = complexity_ratio(ComplexityModel(300, 30), 1e-6, 1.0, 0.01, 0.5)
    assert out["ratio"] == pytest.approx(ORACLE_RATIO_300_30, rel=1e-12)
    assert abs(out["ratio"] - 11) / 11 < 0.01
    with pytest.raises(RateError):
        complexity_ratio(ComplexityModel(100, 10), 0.5, 1.0, 0.05, 0.8)
