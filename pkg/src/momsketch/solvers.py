"""Sketch-and-project methods with heavy-ball and stochastic momentum.

Primal methods (SGD, Newton, proximal point) all move along the same random
sketched direction and, for 0 < omega <= 1, produce identical iterates; they
are implemented along separate code paths so that agreement is a real check.
The dual method (SDSA with momentum) works on y in R^m and maps back to the
primal through phi(y) = x0 + B^{-1} A^T y.

Iteration counting: ``k`` is the number of steps taken. The starting point is
duplicated (x_prev = x = x0), so k = 0 is x0 and the heavy-ball recursion is
well defined from the first step.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Literal

import numpy as np

from . import _kernels
from .linalg import LinearSystem, MetricSpec, pinv_psd, project_onto_solution_set
from .rng import COORD_STREAM, SKETCH_STREAM, make_rng
from .sketch import (
    SketchSample,
    Sketcher,
    _sketch,
    sample,
    stoch_grad,
)

log = logging.getLogger(__name__)

Method = Literal["sgd", "newton", "prox", "dual"]
Momentum = Literal["none", "heavy_ball", "stochastic"]
StopRule = Literal["relative_B", "absolute_l2"]

_CHUNK = 8192


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Method, stepsize ``omega``, momentum ``beta`` and stopping policy.

    ``momentum_scale`` only matters for stochastic momentum: ``raw`` uses
    beta on the sampled coordinate (the analysed recursion), ``equivalent``
    uses n * beta so that the expected momentum term equals the heavy-ball
    term beta * (x_k - x_{k-1}).
    """

    method: Method = "sgd"
    momentum: Momentum = "heavy_ball"
    omega: float = 1.0
    beta: float = 0.0
    momentum_scale: Literal["raw", "equivalent"] = "raw"
    max_iters: int = 1000
    checkpoint_stride: int | None = None
    tol: float | None = None
    stop_rule: StopRule = "relative_B"
    seed: int = 0
    keep_iterates: bool = False
    track_cesaro: bool = False
    engine: Literal["auto", "python"] = "auto"

    def validate(self, metric: MetricSpec | None = None) -> None:
        if self.method not in ("sgd", "newton", "prox", "dual"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.momentum not in ("none", "heavy_ball", "stochastic"):
            raise ConfigError(f"unknown momentum mode {self.momentum!r}")
        if self.method == "prox":
            if not 0.0 < self.omega <= 1.0:
                raise ConfigError("proximal point needs 0 < omega <= 1")
        elif not 0.0 < self.omega < 2.0:
            raise ConfigError("omega must lie in (0, 2)")
        if self.beta < 0.0:
            raise ConfigError("beta must be nonnegative")
        if self.momentum == "stochastic":
            if self.method == "dual":
                raise ConfigError("stochastic momentum is a primal method")
            if metric is not None and not metric.is_identity:
                raise ConfigError("stochastic momentum requires B = I")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        if self.checkpoint_stride is not None and self.checkpoint_stride < 1:
            raise ConfigError("checkpoint_stride must be >= 1")
        if self.tol is not None and self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.momentum_scale not in ("raw", "equivalent"):
            raise ConfigError(f"unknown momentum scale {self.momentum_scale!r}")

    def effective_beta(self, n: int) -> float:
        if self.momentum == "none":
            return 0.0
        if self.momentum == "stochastic" and self.momentum_scale == "equivalent":
            return n * self.beta
        return self.beta

    @property
    def cost_class(self) -> str:
        if self.momentum == "none" or self.beta == 0.0:
            return "basic"
        return "momentum" if self.momentum == "heavy_ball" else "stochastic_momentum"


@dataclass
class IterateState:
    x: np.ndarray
    x_prev: np.ndarray
    k: int = 0
    y: np.ndarray | None = None
    y_prev: np.ndarray | None = None

    @classmethod
    def start(cls, x0: np.ndarray, m: int | None = None) -> IterateState:
        x0 = np.array(x0, dtype=float)
        if m is None:
            return cls(x0.copy(), x0.copy())
        return cls(x0.copy(), x0.copy(), 0, np.zeros(m), np.zeros(m))


# -- single steps -------------------------------------------------------------


def _newton_direction(
    system: LinearSystem, metric: MetricSpec, s: SketchSample, x: np.ndarray
) -> np.ndarray:
    """B-pseudoinverse of the sketched Hessian applied to the gradient."""
    sk = _sketch(system, metric, s)
    Z = sk.AtS @ sk.G_pinv @ sk.AtS.T
    grad = sk.BinvAtS @ (sk.G_pinv @ s.sketch_vector(system.residual(x)))
    if metric.is_identity:
        return pinv_psd(0.5 * (Z + Z.T), rel_tol=1e-8) @ grad
    W_S = metric.inv_sqrt @ Z @ metric.inv_sqrt
    W_S_pinv = pinv_psd(0.5 * (W_S + W_S.T), rel_tol=1e-8)
    return metric.inv_sqrt @ (W_S_pinv @ (metric.sqrt @ grad))


def _prox_point(
    system: LinearSystem,
    metric: MetricSpec,
    s: SketchSample,
    x: np.ndarray,
    omega: float,
) -> np.ndarray:
    """argmin f_S(z) + (1 - omega) / (2 omega) ||z - x||_B^2."""
    if omega == 1.0:
        # B-projection onto {z : S^T A z = S^T b} in whitened coordinates
        M = (system.A.T @ s.matrix(system.m)).T
        M = np.asarray(M)
        Mw = M @ metric.inv_sqrt
        u = metric.sqrt @ x
        rhs = s.sketch_vector(system.b)
        u_new = u - np.linalg.pinv(Mw, rcond=1e-10) @ (Mw @ u - rhs)
        return metric.inv_sqrt @ u_new
    sk = _sketch(system, metric, s)
    Z = sk.AtS @ sk.G_pinv @ sk.AtS.T
    Zxbar = sk.AtS @ (sk.G_pinv @ s.sketch_vector(system.b))
    c = (1.0 - omega) / omega
    lhs = Z + c * metric.B
    rhs = Zxbar + c * (metric.B @ x)
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConfigError("singular proximal system") from exc


def _base_point(
    cfg: SolverConfig,
    system: LinearSystem,
    metric: MetricSpec,
    s: SketchSample,
    x: np.ndarray,
) -> np.ndarray:
    if cfg.method == "sgd":
        return x - cfg.omega * stoch_grad(system, metric, s, x)
    if cfg.method == "newton":
        return x - cfg.omega * _newton_direction(system, metric, s, x)
    if cfg.method == "prox":
        return _prox_point(system, metric, s, x, cfg.omega)
    raise ConfigError(f"{cfg.method!r} is not a primal method")


def step_primal(
    cfg: SolverConfig,
    system: LinearSystem,
    metric: MetricSpec,
    s: SketchSample,
    state: IterateState,
) -> IterateState:
    """One heavy-ball step: base step plus beta * (x_k - x_{k-1})."""
    x_new = _base_point(cfg, system, metric, s, state.x)
    beta = cfg.effective_beta(system.n)
    if beta:
        x_new = x_new + beta * (state.x - state.x_prev)
    return IterateState(x_new, state.x, state.k + 1)


def step_stochastic_momentum(
    cfg: SolverConfig,
    system: LinearSystem,
    s: SketchSample,
    coord: int,
    state: IterateState,
    metric: MetricSpec | None = None,
) -> IterateState:
    """One step with momentum applied to a single coordinate ``coord``."""
    if metric is None:
        metric = MetricSpec.identity(system.n)
    elif not metric.is_identity:
        raise ConfigError("stochastic momentum requires B = I")
    x_new = _base_point(cfg, system, metric, s, state.x)
    beta = cfg.effective_beta(system.n)
    x_new[coord] += beta * (state.x[coord] - state.x_prev[coord])
    return IterateState(x_new, state.x, state.k + 1)


def phi_map(
    x0: np.ndarray, metric: MetricSpec, system: LinearSystem, y: np.ndarray
) -> np.ndarray:
    """x0 + B^{-1} A^T y."""
    y = np.asarray(y, dtype=float)
    if y.shape != (system.m,):
        raise ValueError(f"y has shape {y.shape}, expected ({system.m},)")
    return np.asarray(x0, dtype=float) + metric.solve(system.rmatvec(y))


def dual_value(
    system: LinearSystem, metric: MetricSpec, x0: np.ndarray, y: np.ndarray
) -> float:
    """D(y) = (b - A x0)^T y - 1/2 ||A^T y||^2_{B^{-1}}."""
    y = np.asarray(y, dtype=float)
    if y.shape != (system.m,):
        raise ValueError(f"y has shape {y.shape}, expected ({system.m},)")
    Aty = system.rmatvec(y)
    return float((system.b - system.matvec(x0)) @ y - 0.5 * Aty @ metric.solve(Aty))


def step_dual(
    cfg: SolverConfig,
    system: LinearSystem,
    metric: MetricSpec,
    s: SketchSample,
    x0: np.ndarray,
    state: IterateState,
) -> IterateState:
    """SDSA with momentum: y <- y + omega S lambda + beta (y - y_prev)."""
    sk = _sketch(system, metric, s)
    x = phi_map(x0, metric, system, state.y)
    lam = sk.G_pinv @ s.sketch_vector(system.b - system.matvec(x))
    y_new = state.y.copy()
    if s.kind == "row":
        y_new[s.index] += cfg.omega * lam[0]
    elif s.kind == "block":
        y_new[s.indices] += cfg.omega * lam
    else:
        y_new += cfg.omega * lam[0] * s.vector
    beta = cfg.effective_beta(system.n)
    if beta:
        y_new += beta * (state.y - state.y_prev)
    x_new = phi_map(x0, metric, system, y_new)
    return IterateState(x_new, x, state.k + 1, y_new, state.y)


def cesaro_average(iterates) -> np.ndarray:
    """Arithmetic mean of x_1, ..., x_k (rows of ``iterates``)."""
    X = np.asarray(iterates, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise ValueError("empty iterate sequence")
    return X.mean(axis=0)


# -- population objective ----------------------------------------------------


def population_objective(system: LinearSystem, metric: MetricSpec, sketcher: Sketcher):
    """Return f(X) = E[f_S] evaluated row-wise on X, or None if not available.

    Exact for categorical sketchers (rows or matrix columns); block and
    Gaussian sketches have no cheap closed form.
    """
    A = system.dense
    if sketcher.kind == "row":
        C = None
        BinvAt = metric.solve(A.T)
        d = np.einsum("ij,ji->i", A, BinvAt)
    elif sketcher.kind == "column":
        C = sketcher.columns
        CtA = C.T @ A
        d = np.einsum("ij,ji->i", CtA, metric.solve(CtA.T))
    else:
        return None
    with np.errstate(divide="ignore"):
        w = np.where(d > 0, sketcher.probs / np.where(d > 0, d, 1.0), 0.0)

    def f(X: np.ndarray) -> np.ndarray:
        R = np.atleast_2d(X) @ A.T - system.b
        if C is not None:
            R = R @ C
        return 0.5 * (R * R) @ w

    return f


# -- traces -------------------------------------------------------------------


@dataclass
class IterateTrace:
    """Checkpointed history of one run."""

    k: np.ndarray
    rel_err_B: np.ndarray
    f_val: np.ndarray
    op_count: np.ndarray
    wall_ns: np.ndarray
    x_final: np.ndarray
    x_star: np.ndarray
    converged: bool
    metadata: dict = field(default_factory=dict)
    iterates: np.ndarray | None = None
    err_l2: np.ndarray | None = None
    cesaro_f: np.ndarray | None = None
    cesaro_x: np.ndarray | None = None
    y_final: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return int(self.k[-1])

    @property
    def total_ops(self) -> int:
        return int(self.op_count[-1])

    @property
    def checkpoints(self) -> list[dict]:
        return [
            {
                "k": int(k),
                "rel_err_B": float(e),
                "f_val": float(f),
                "op_count": int(o),
                "wall_ns": int(w),
            }
            for k, e, f, o, w in zip(
                self.k, self.rel_err_B, self.f_val, self.op_count, self.wall_ns
            )
        ]


# -- driver ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Prepared:
    """Per-(system, metric, sketcher, x0) quantities shared across runs."""

    x0: np.ndarray
    x_star: np.ndarray
    dist0: float
    f: object
    step_cost: np.ndarray
    BinvAt: np.ndarray | None
    dinv: np.ndarray | None
    fingerprint: str


def prepare(
    system: LinearSystem,
    metric: MetricSpec,
    sketcher: Sketcher,
    x0: np.ndarray | None = None,
) -> Prepared:
    x0 = np.zeros(system.n) if x0 is None else np.array(x0, dtype=float)
    x_star = project_onto_solution_set(system, metric, x0)
    e0 = x0 - x_star
    dist0 = metric.norm_sq(e0)
    BinvAt = dinv = None
    if sketcher.kind == "row":
        step_cost = 4 * system.row_nnz.astype(np.int64)
        BinvAt = np.ascontiguousarray(metric.solve(system.dense.T))
        d = np.einsum("ij,ji->i", system.dense, BinvAt)
        dinv = np.where(d > 1e-30, 1.0 / np.where(d > 1e-30, d, 1.0), 0.0)
    elif sketcher.kind == "block":
        step_cost = 4 * system.row_nnz.astype(np.int64)
    else:
        step_cost = np.full(max(system.m, 1), 4 * int(system.row_nnz.sum()))
    return Prepared(
        x0=x0,
        x_star=x_star,
        dist0=dist0,
        f=population_objective(system, metric, sketcher),
        step_cost=step_cost,
        BinvAt=BinvAt,
        dinv=dinv,
        fingerprint=system.fingerprint(),
    )


def _extra_cost(cfg: SolverConfig, n: int) -> int:
    return {"basic": 0, "momentum": 3 * n, "stochastic_momentum": 1}[cfg.cost_class]


def _sample_cost(prep: Prepared, s: SketchSample) -> int:
    if s.kind == "row":
        return int(prep.step_cost[s.index])
    if s.kind == "block":
        return int(prep.step_cost[s.indices].sum())
    return int(prep.step_cost[0])


def _is_stopped(cfg: SolverConfig, metric: MetricSpec, prep: Prepared, x) -> bool:
    if cfg.tol is None:
        return False
    e = x - prep.x_star
    if cfg.stop_rule == "absolute_l2":
        return float(np.linalg.norm(e)) < cfg.tol
    return metric.norm_sq(e) <= cfg.tol * prep.dist0


def _coord(u: float, n: int) -> int:
    return min(int(u * n), n - 1)


def run(
    cfg: SolverConfig,
    system: LinearSystem,
    metric: MetricSpec,
    sketcher: Sketcher,
    x0: np.ndarray | None = None,
    *,
    trial: int = 0,
    prepared: Prepared | None = None,
) -> IterateTrace:
    """Iterate a method from x0 until the stop rule or ``max_iters``.

    Sketches come from the stream (cfg.seed, trial, SKETCH_STREAM) and
    stochastic-momentum coordinates from (cfg.seed, trial, COORD_STREAM), so
    configurations sharing a seed see the same sketch sequence.
    """
    cfg.validate(metric)
    if metric.n != system.n:
        raise ValueError("metric and system dimensions differ")
    prep = prepared if prepared is not None else prepare(system, metric, sketcher, x0)
    stride = cfg.checkpoint_stride or max(system.m, 1)
    srng = make_rng(cfg.seed, trial, SKETCH_STREAM)
    crng = make_rng(cfg.seed, trial, COORD_STREAM)

    use_kernel = (
        cfg.engine == "auto"
        and sketcher.kind == "row"
        and cfg.method == "sgd"
    )
    t0 = time.perf_counter_ns()
    if use_kernel:
        out = _run_kernel(cfg, system, metric, sketcher, prep, stride, srng, crng, t0)
    else:
        out = _run_python(cfg, system, metric, sketcher, prep, stride, srng, crng, t0)
    ks, xs, ops, walls, ces, converged, y_final = out

    X = np.asarray(xs)
    E = X - prep.x_star
    if metric.is_identity:
        err_sq = np.einsum("ij,ij->i", E, E)
    else:
        err_sq = np.einsum("ij,ij->i", E @ metric.B, E)
    rel = err_sq / err_sq[0] if err_sq[0] > 0 else np.zeros(len(ks))
    fvals = prep.f(X) if prep.f is not None else np.full(len(ks), np.nan)
    ces_f = None
    ces_x = None
    if cfg.track_cesaro:
        C = np.asarray(ces)
        ces_x = C[-1]
        ces_f = np.full(len(ks), np.nan)
        if prep.f is not None and len(ks) > 1:
            ces_f[1:] = prep.f(C[1:])
    if not converged and cfg.tol is not None:
        log.info("no convergence within %d iterations", cfg.max_iters)
    return IterateTrace(
        k=np.asarray(ks, dtype=np.int64),
        rel_err_B=rel,
        f_val=fvals,
        op_count=np.asarray(ops, dtype=np.int64),
        wall_ns=np.asarray(walls, dtype=np.int64),
        x_final=X[-1].copy(),
        x_star=prep.x_star,
        converged=converged,
        metadata={
            "config": asdict(cfg),
            "system": prep.fingerprint,
            "seed": cfg.seed,
            "trial": trial,
            "x_star_norm": float(np.linalg.norm(prep.x_star)),
        },
        iterates=X if cfg.keep_iterates else None,
        err_l2=np.sqrt(np.einsum("ij,ij->i", E, E)),
        cesaro_f=ces_f,
        cesaro_x=ces_x,
        y_final=y_final,
    )


def _run_python(cfg, system, metric, sketcher, prep, stride, srng, crng, t0):
    n = system.n
    dual = cfg.method == "dual"
    state = IterateState.start(prep.x0, system.m if dual else None)
    extra = _extra_cost(cfg, n)
    ks, xs, ops, walls, ces = [0], [state.x.copy()], [0], [0], [prep.x0 * np.nan]
    ces_sum = np.zeros(n)
    total = 0
    converged = _is_stopped(cfg, metric, prep, state.x) or prep.dist0 == 0.0
    while not converged and state.k < cfg.max_iters:
        s = sample(sketcher, srng)
        ces_sum += state.x
        if dual:
            state = step_dual(cfg, system, metric, s, prep.x0, state)
        elif cfg.momentum == "stochastic":
            coord = _coord(crng.random(), n)
            state = step_stochastic_momentum(cfg, system, s, coord, state, metric)
        else:
            state = step_primal(cfg, system, metric, s, state)
        total += _sample_cost(prep, s) + extra
        converged = _is_stopped(cfg, metric, prep, state.x)
        if state.k % stride == 0 or converged or state.k == cfg.max_iters:
            ks.append(state.k)
            xs.append(state.x.copy())
            ops.append(total)
            walls.append(time.perf_counter_ns() - t0)
            ces.append(ces_sum / state.k)
    return ks, xs, ops, walls, ces, converged, state.y


def _run_kernel(cfg, system, metric, sketcher, prep, stride, srng, crng, t0):
    n = system.n
    A = np.ascontiguousarray(system.dense)
    x = prep.x0.copy()
    xprev = prep.x0.copy()
    mode = {
        "none": _kernels.MODE_NONE,
        "heavy_ball": _kernels.MODE_HEAVY_BALL,
        "stochastic": _kernels.MODE_STOCHASTIC,
    }[cfg.momentum]
    beta = cfg.effective_beta(n)
    if beta == 0.0:
        mode = _kernels.MODE_NONE
    stop_kind = _kernels.STOP_NONE
    if cfg.tol is not None:
        stop_kind = (
            _kernels.STOP_ABS_L2
            if cfg.stop_rule == "absolute_l2"
            else _kernels.STOP_REL_B
        )
    extra = _extra_cost(cfg, n)
    ces_sum = np.zeros(n)
    ks, xs, ops, walls, ces = [0], [x.copy()], [0], [0], [x * np.nan]
    k = 0
    total = 0
    converged = _is_stopped(cfg, metric, prep, x) or prep.dist0 == 0.0
    chunk_len = max(stride, (_CHUNK // stride) * stride)
    while not converged and k < cfg.max_iters:
        chunk = min(chunk_len, cfg.max_iters - k)
        idx = sketcher.sample_indices(srng, chunk)
        if cfg.momentum == "stochastic":
            coords = np.minimum((crng.random(chunk) * n).astype(np.int64), n - 1)
        else:
            coords = np.zeros(1, dtype=np.int64)
        cap = chunk // stride + 2
        snaps = np.empty((cap, n))
        snap_k = np.empty(cap, dtype=np.int64)
        snap_ops = np.empty(cap, dtype=np.int64)
        ces_snaps = np.empty((cap, n)) if cfg.track_cesaro else np.empty((1, n))
        steps, nsnap, total, converged = _kernels.row_steps(
            A, prep.BinvAt, prep.dinv, system.b, idx, coords, x, xprev,
            cfg.omega, beta, mode, stop_kind,
            cfg.tol if cfg.tol is not None else 0.0,
            prep.x_star, metric.B, metric.is_identity, prep.dist0,
            prep.step_cost, extra, k, stride, total,
            cfg.track_cesaro, ces_sum, snaps, snap_k, snap_ops, ces_snaps,
        )
        k += steps
        now = time.perf_counter_ns() - t0
        ks.extend(snap_k[:nsnap].tolist())
        xs.extend(snaps[:nsnap])
        ops.extend(snap_ops[:nsnap].tolist())
        walls.extend([now] * nsnap)
        if cfg.track_cesaro:
            ces.extend(ces_snaps[:nsnap])
    if ks[-1] != k:
        ks.append(k)
        xs.append(x.copy())
        ops.append(total)
        walls.append(time.perf_counter_ns() - t0)
        ces.append(ces_sum / max(k, 1))
    return ks, xs, ops, walls, ces, bool(converged), None


def with_seed(cfg: SolverConfig, seed: int) -> SolverConfig:
    return replace(cfg, seed=seed)
