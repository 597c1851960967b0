"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict, printed in the pytest
terminal summary. The module also runs standalone:
``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from momsketch.consensus import (
    GraphSpec,
    algebraic_connectivity,
    build_graph,
    closed_form_connectivity,
    incidence_matrix,
    run_gossip,
)
from momsketch.harness.experiment import measure_complexity_ratio
from momsketch.harness.generators import gen_gaussian_system, gen_pd_system
from momsketch.linalg import (
    LinearSystem,
    MetricSpec,
    b_inner,
    estimate_EZ_monte_carlo,
    project_onto_solution_set,
    spectrum_W,
)
from momsketch.rates import (
    accelerated_params,
    beta_max,
    cesaro_bound,
    rate_constants,
    sm_rate_constants,
)
from momsketch.rng import DATA_STREAM, make_rng
from momsketch.sketch import (
    Sketcher,
    W_closed,
    expected_Z_closed,
    f_S_value,
    f_value_closed,
    sample,
    stoch_grad,
)
from momsketch.solvers import IterateState, SolverConfig, run, step_primal

RESULTS: list[str] = []


def report(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _b_sq(e, metric):
    return b_inner(e, e, metric)


# 1 -------------------------------------------------------------------------


def test_identity_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    kinds = ("row", "block", "gaussian", "column")
    for case in range(100):
        kind = kinds[case % 4]
        m, n = int(rng.integers(5, 30)), int(rng.integers(2, 12))
        if kind == "column":
            m = max(m, n + 1)  # full column rank keeps A^T A positive definite
        A = rng.standard_normal((m, n))
        system = LinearSystem(A, A @ rng.standard_normal(n))
        if kind == "column":
            metric = MetricSpec.gram(system)
            sk = Sketcher.column_coordinate(system)
        else:
            if case % 8 < 4:
                metric = MetricSpec.identity(n)
            else:
                P = rng.standard_normal((n, n))
                metric = MetricSpec("system", P @ P.T + 0.5 * np.eye(n))
            if kind == "row":
                sk = Sketcher.kaczmarz(system) if metric.is_identity else Sketcher.uniform_rows(m)
            elif kind == "block":
                sk = Sketcher.block(m, int(rng.integers(1, m + 1)))
            else:
                sk = Sketcher.gaussian(m)
        x_star = project_onto_solution_set(system, metric, rng.standard_normal(n))
        x = rng.standard_normal(n)
        s = sample(sk, rng)
        g = stoch_grad(system, metric, s, x)
        f = f_S_value(system, metric, s, x)
        scale = max(abs(f), 1e-300)
        worst = max(
            worst,
            abs(f - 0.5 * b_inner(g, g, metric)) / scale,
            abs(f - 0.5 * b_inner(g, x - x_star, metric)) / scale,
        )
    elapsed = time.perf_counter() - t0
    report(1, "gradient identities", worst <= 1e-10 and elapsed < 5,
           f"max rel deviation {worst:.2e} (tol 1e-10), {elapsed:.2f}s (< 5s)")


# 2, 3 -----------------------------------------------------------------------

EQUIV_GRID = [(w, b) for w in (0.5, 1.0) for b in (0.0, 0.3)]


def _stepwise(system, metric, method, omega, beta, steps, seed):
    cfg = SolverConfig(method=method, omega=omega, beta=beta, max_iters=steps,
                       checkpoint_stride=1, keep_iterates=True, engine="python", seed=seed)
    return run(cfg, system, metric, Sketcher.kaczmarz(system))


def test_method_equivalence():
    t0 = time.perf_counter()
    system = gen_gaussian_system(50, 20, seed=1)
    metric = MetricSpec.identity(20)
    worst = 0.0
    for omega, beta in EQUIV_GRID:
        ref = _stepwise(system, metric, "sgd", omega, beta, 200, seed=5)
        for method in ("newton", "prox"):
            other = _stepwise(system, metric, method, omega, beta, 200, seed=5)
            worst = max(worst, float(np.abs(other.iterates - ref.iterates).max()))
    elapsed = time.perf_counter() - t0
    report(2, "SGD / Newton / proximal agreement", worst <= 1e-8 and elapsed < 5,
           f"max per-step deviation {worst:.2e} (tol 1e-8), {elapsed:.2f}s (< 5s)")


def test_projection_invariance():
    system = gen_gaussian_system(50, 20, seed=1)
    metric = MetricSpec.identity(20)
    x0 = np.zeros(20)
    p0 = project_onto_solution_set(system, metric, x0)
    worst = 0.0
    for omega, beta in EQUIV_GRID:
        tr = _stepwise(system, metric, "sgd", omega, beta, 200, seed=5)
        for x in tr.iterates:
            p = project_onto_solution_set(system, metric, x)
            worst = max(worst, np.linalg.norm(p - p0) / np.linalg.norm(p0))
    report(3, "projection invariance", worst <= 1e-8,
           f"max relative drift {worst:.2e} (tol 1e-8)")


# 4 ---------------------------------------------------------------------------


def test_primal_dual_correspondence():
    t0 = time.perf_counter()
    system = gen_gaussian_system(50, 20, seed=2)
    metric = MetricSpec.identity(20)
    x0 = make_rng(2, DATA_STREAM, 9).standard_normal(20)
    A = system.dense
    worst = 0.0
    for omega in (0.5, 1.5):
        for beta in (0.0, 0.2):
            common = dict(omega=omega, beta=beta, max_iters=500, checkpoint_stride=1,
                          keep_iterates=True, engine="python", seed=3)
            primal = run(SolverConfig(**common), system, metric, Sketcher.kaczmarz(system), x0)
            dual = run(SolverConfig(method="dual", **common), system, metric,
                       Sketcher.kaczmarz(system), x0)
            img = x0 + A.T @ dual.y_final
            worst = max(worst, np.linalg.norm(primal.x_final - img)
                        / (1 + np.linalg.norm(primal.x_final)))
            d = np.linalg.norm(primal.iterates - dual.iterates, axis=1)
            worst = max(worst, float(np.max(d / (1 + np.linalg.norm(primal.iterates, axis=1)))))
    elapsed = time.perf_counter() - t0
    report(4, "primal-dual correspondence", worst <= 1e-8 and elapsed < 10,
           f"max scaled gap {worst:.2e} (tol 1e-8), {elapsed:.2f}s (< 10s)")


# 5, 6 -----------------------------------------------------------------------


def _kaczmarz_problem():
    system = gen_gaussian_system(50, 20, seed=0)
    metric = MetricSpec.identity(20)
    spec = spectrum_W(system, metric, expected_Z_closed(system, metric, "mRK"))
    return system, metric, spec


def test_l2_bound():
    t0 = time.perf_counter()
    system, metric, spec = _kaczmarz_problem()
    lmin, lmax = spec.lambda_min_plus, spec.lambda_max
    beta = 0.5 * beta_max(1.0, lmin, lmax)
    rep = rate_constants(1.0, beta, lmin, lmax)
    cfg = SolverConfig(omega=1.0, beta=beta, max_iters=2000, checkpoint_stride=20, seed=17)
    sk = Sketcher.kaczmarz(system)
    runs = 1000
    total = None
    for t in range(runs):
        tr = run(cfg, system, metric, sk, trial=t)
        total = tr.rel_err_B.copy() if total is None else total + tr.rel_err_B
    mean = total / runs
    ratio = float(np.max(mean / rep.bound(tr.k)))
    elapsed = time.perf_counter() - t0
    report(5, "expected L2 bound", ratio <= 1.2 and elapsed < 120,
           f"max mean/bound {ratio:.3f} over {len(tr.k)} checkpoints (<= 1.2), "
           f"1/lambda_min+={1 / lmin:.1f}, beta={beta:.3g}, {elapsed:.1f}s")


def test_cesaro_bound():
    system, metric, _ = _kaczmarz_problem()
    cfg = SolverConfig(omega=1.0, beta=0.3, max_iters=1000, checkpoint_stride=10,
                       track_cesaro=True, seed=23)
    sk = Sketcher.kaczmarz(system)
    x0 = np.zeros(20)
    x_star = project_onto_solution_set(system, metric, x0)
    dist0 = _b_sq(x0 - x_star, metric)
    f0 = f_value_closed(system, metric, "mRK", x0)
    runs = 1000
    acc = None
    for t in range(runs):
        tr = run(cfg, system, metric, sk, x0, trial=t)
        acc = tr.cesaro_f.copy() if acc is None else acc + tr.cesaro_f
    mean = acc / runs
    parts, ok = [], True
    for k in (10, 100, 1000):
        j = int(np.searchsorted(tr.k, k))
        b = cesaro_bound(1.0, 0.3, dist0, f0, k)
        ok &= mean[j] <= 1.2 * b
        parts.append(f"k={k}: {mean[j] / b:.3f}")
    report(6, "Cesaro average bound", bool(ok), "mean/bound " + ", ".join(parts) + " (<= 1.2)")


# 7 ---------------------------------------------------------------------------


def test_accelerated_expectation_rate():
    t0 = time.perf_counter()
    system = gen_gaussian_system(30, 10, seed=0)
    metric = MetricSpec.identity(10)
    spec = spectrum_W(system, metric, expected_Z_closed(system, metric, "mRK"))
    omega, beta = accelerated_params(spec.lambda_min_plus, spec.lambda_max, "unit_step")
    cfg = SolverConfig(omega=omega, beta=beta, max_iters=500, checkpoint_stride=10,
                       keep_iterates=True, seed=31)
    sk = Sketcher.kaczmarz(system)
    runs = 10_000
    acc = None
    for t in range(runs):
        tr = run(cfg, system, metric, sk, trial=t)
        e = tr.iterates - tr.x_star
        acc = e if acc is None else acc + e
    mean_err = acc / runs
    sq = np.einsum("ij,ij->i", mean_err, mean_err)
    window = (tr.k >= 50) & (tr.k <= 500)
    slope = np.polyfit(tr.k[window], np.log(sq[window]), 1)[0]
    factor = math.exp(slope)
    elapsed = time.perf_counter() - t0
    report(7, "accelerated decay of the mean error", factor <= beta + 0.05 and elapsed < 300,
           f"fitted factor {factor:.4f} vs beta+0.05={beta + 0.05:.4f}, "
           f"1/lambda_min+={1 / spec.lambda_min_plus:.1f}, {elapsed:.1f}s (< 300s)")


# 8 ---------------------------------------------------------------------------


def test_rate_dominance():
    rng = np.random.default_rng(8)
    ok, count = True, 0
    while count < 100:
        omega = rng.uniform(0.05, 1.95)
        lmax = rng.uniform(0.05, 1.0)
        lmin = rng.uniform(0.01, 1.0) * lmax
        n = int(rng.integers(1, 1000))
        beta = rng.uniform(0, 1) * beta_max(omega, lmin, lmax)
        if not rate_constants(omega, beta, lmin, lmax).admissible:
            continue
        count += 1
        q0 = rate_constants(omega, 0.0, lmin, lmax).q
        q = rate_constants(omega, beta, lmin, lmax).q
        qs = sm_rate_constants(omega, beta * n, n, lmin, lmax).q
        ok &= qs >= q >= q0
        ok &= sm_rate_constants(omega, 0.0, n, lmin, lmax) == rate_constants(omega, 0.0, lmin, lmax)
        ok &= sm_rate_constants(omega, beta, 1, lmin, lmax) == rate_constants(omega, beta, lmin, lmax)
    report(8, "rate dominance and reductions", bool(ok), f"{count} admissible tuples checked")


# 9 ---------------------------------------------------------------------------


def test_complexity_ratio():
    t0 = time.perf_counter()
    rows = measure_complexity_ratio(200, 100, [5, 20, 50], beta=1e-4, eps=1e-3, trials=10, seed=0)
    elapsed = time.perf_counter() - t0
    parts, ok = [], elapsed < 180
    for r in rows:
        dev = r["ratio_measured"] / r["ratio_theory"] - 1
        ok &= abs(dev) <= 0.25
        parts.append(f"g={r['g']}: {r['ratio_measured']:.2f} vs {r['ratio_theory']:.0f} ({dev:+.0%})")
    report(9, "measured complexity ratio", bool(ok),
           "; ".join(parts) + f" (within 25%), {elapsed:.1f}s (< 180s)")


# 10 --------------------------------------------------------------------------


def test_connectivity_table():
    table = [("line", 100, 1013), ("cycle", 100, 253), ("line", 200, 4052), ("cycle", 200, 1013)]
    ok, parts = True, []
    for topo, n, expected in table:
        lam = algebraic_connectivity(build_graph(GraphSpec(topo, n)))
        closed = closed_form_connectivity(topo, n)
        ok &= abs(1 / lam - expected) <= 1 and abs(lam - closed) <= 1e-9 * closed
        parts.append(f"{topo}{n}: {1 / lam:.1f}")
    report(10, "graph connectivity table", bool(ok), ", ".join(parts))


# 11 --------------------------------------------------------------------------


def test_gossip():
    ok, worst_step, worst_err = True, 0.0, 0.0
    graphs = [("line", n) for n in range(2, 51)] + [("cycle", n) for n in range(3, 51)]
    for i, (topo, n) in enumerate(graphs):
        g = build_graph(GraphSpec(topo, n))
        c = make_rng(11, DATA_STREAM, i).random(n)
        cfg = SolverConfig(omega=1.0, beta=0.0, tol=1e-8, max_iters=10_000_000, seed=i)
        tr = run_gossip(g, c, cfg)
        ok &= tr.converged
        ok &= bool(np.allclose(tr.x_star, c.mean(), rtol=0, atol=1e-12))
        worst_err = max(worst_err, float(tr.rel_err_B[-1]))
        # per-step sum drift over an explicitly stepped prefix
        system = incidence_matrix(g)
        metric = MetricSpec.identity(n)
        sk = Sketcher.kaczmarz(system)
        srng = np.random.default_rng(i)
        st = IterateState.start(c)
        prev = c.sum()
        for _ in range(200):
            st = step_primal(cfg, system, metric, sample(sk, srng), st)
            cur = st.x.sum()
            worst_step = max(worst_step, abs(cur - prev))
            prev = cur
    ok &= worst_step <= 1e-10 and worst_err <= 1e-8

    cycle = build_graph(GraphSpec("cycle", 100))
    wins = 0
    for t in range(10):
        c = make_rng(12, DATA_STREAM, t).random(100)
        base = dict(omega=1.0, tol=1e-6, max_iters=10_000_000, seed=t)
        plain = run_gossip(cycle, c, SolverConfig(beta=0.0, **base), trial=t)
        heavy = run_gossip(cycle, c, SolverConfig(beta=0.4, **base), trial=t)
        wins += heavy.iterations < plain.iterations
    ok &= wins >= 8
    report(11, "gossip averaging", bool(ok),
           f"{len(graphs)} graphs, max step drift {worst_step:.1e}, worst rel_err {worst_err:.1e}; "
           f"momentum faster in {wins}/10 trials (>= 8)")


# 12 --------------------------------------------------------------------------


def test_expected_Z_oracle():
    ok, parts = True, []
    rk = gen_gaussian_system(40, 10, seed=4)
    I = MetricSpec.identity(10)
    sk = Sketcher.kaczmarz(rk)
    mc = estimate_EZ_monte_carlo(sk, rk, I, 100_000, seed=1)
    ref = expected_Z_closed(rk, I, "mRK")
    err = np.linalg.norm(mc - ref) / np.linalg.norm(ref)
    ok &= err <= 0.02
    parts.append(f"mRK {err:.2%}")

    pd = gen_pd_system(30, 10, seed=5)
    B = MetricSpec.system_matrix(pd)
    sk = Sketcher.coordinate_descent(pd)
    mc = estimate_EZ_monte_carlo(sk, pd, B, 100_000, seed=2)
    W_mc = B.inv_sqrt @ mc @ B.inv_sqrt
    ref = W_closed(pd, B, "mRCD")
    err = np.linalg.norm(W_mc - ref) / np.linalg.norm(ref)
    ok &= err <= 0.02
    parts.append(f"mRCD {err:.2%}")

    lo, hi = np.inf, -np.inf
    for system, metric, ez in [
        (rk, I, expected_Z_closed(rk, I, "mRK")),
        (pd, B, expected_Z_closed(pd, B, "mRCD")),
        (rk, I, estimate_EZ_monte_carlo(Sketcher.block(40, 4), rk, I, 2000, seed=3)),
        (rk, I, estimate_EZ_monte_carlo(Sketcher.gaussian(40), rk, I, 2000, seed=4)),
        (rk, MetricSpec.gram(rk), estimate_EZ_monte_carlo(
            Sketcher.column_coordinate(rk), rk, MetricSpec.gram(rk), 2000, seed=5)),
    ]:
        ev = spectrum_W(system, metric, ez).eigenvalues
        lo, hi = min(lo, ev.min()), max(hi, ev.max())
    ok &= lo >= -1e-9 and hi <= 1 + 1e-9
    report(12, "E[Z] oracle and W spectrum range", bool(ok),
           ", ".join(parts) + f" (<= 2%); eigenvalues in [{lo:.2e}, {hi:.6f}]")


if __name__ == "__main__":
    import sys

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    failed = 0
    for fn in tests:
        try:
            fn()
        except AssertionError:
            failed += 1
    print("\n".join(sorted(RESULTS, key=lambda s: int(s.split()[1]))))
    sys.exit(1 if failed else 0)
