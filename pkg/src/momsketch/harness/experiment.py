"""Config-driven experiment grids, CSV output and the complexity-ratio study."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ..consensus import GraphSpec, build_graph, incidence_matrix
from ..linalg import LinearSystem, MetricSpec, estimate_EZ_monte_carlo, spectrum_W
from ..rates import ComplexityModel, rate_constants, sm_rate_constants
from ..rng import DATA_STREAM, make_rng
from ..sketch import Sketcher, expected_Z_closed
from ..solvers import ConfigError, IterateTrace, SolverConfig, prepare, run
from .generators import (
    gen_gaussian_system,
    gen_pd_system,
    gen_sparse_rows_system,
    system_from_matrix,
)
from .libsvm import parse_libsvm

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("k", "rel_err_B", "f_val", "bound", "op_count", "wall_ns")
PROBLEM_TYPES = ("gaussian", "pd_gram", "sparse_rows", "libsvm", "consensus")
SKETCHES = ("kaczmarz", "coordinate_descent", "uniform_rows", "block", "gaussian", "column")
METRICS = ("identity", "system", "gram")
EZ_MONTE_CARLO_SAMPLES = 20000


@dataclass(frozen=True)
class CostLedger:
    """Operation counts per iteration class for rows with g nonzeros."""

    n: int
    g: float

    def per_iteration(self, cost_class: str) -> float:
        model = ComplexityModel(self.n, self.g)
        return getattr(model, cost_class)

    def total(self, cost_class: str, iterations: int) -> float:
        return self.per_iteration(cost_class) * iterations


@dataclass
class ExperimentConfig:
    problem: dict
    solvers: list[dict]
    trials: int = 1
    seed: int = 0
    output_dir: str = "out"
    sketch: str = "kaczmarz"
    block_size: int = 1
    metric: str = "identity"
    x0: str = "zeros"
    rate_check: bool = True
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def solver_configs(self) -> list[tuple[str, SolverConfig]]:
        out = []
        for i, spec in enumerate(self.solvers):
            spec = dict(spec)
            name = spec.pop("name", f"solver{i}")
            spec.setdefault("seed", self.seed)
            try:
                out.append((name, SolverConfig(**spec)))
            except TypeError as exc:
                raise ConfigError(f"solver {name!r}: {exc}") from None
        return out

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.solvers:
            raise ConfigError("solver grid is empty")
        if self.problem.get("type") not in PROBLEM_TYPES:
            raise ConfigError(f"problem.type must be one of {PROBLEM_TYPES}")
        if self.sketch not in SKETCHES:
            raise ConfigError(f"sketch must be one of {SKETCHES}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if self.x0 not in ("zeros", "uniform"):
            raise ConfigError("x0 must be 'zeros' or 'uniform'")
        names = [name for name, _ in self.solver_configs()]
        if len(set(names)) != len(names):
            raise ConfigError("solver names must be unique")
        for name, sc in self.solver_configs():
            try:
                sc.validate()
            except ConfigError as exc:
                raise ConfigError(f"solver {name!r}: {exc}") from None


def build_problem(problem: dict, seed: int) -> LinearSystem:
    kind = problem["type"]
    if kind == "gaussian":
        return gen_gaussian_system(problem["m"], problem["n"], seed)
    if kind == "pd_gram":
        return gen_pd_system(problem["m"], problem["n"], seed)
    if kind == "sparse_rows":
        return gen_sparse_rows_system(problem["m"], problem["n"], problem["g"], seed)
    if kind == "libsvm":
        return system_from_matrix(parse_libsvm(problem["path"]), seed)
    if kind == "consensus":
        spec = GraphSpec(
            problem["topology"], problem["n"], problem.get("radius"), seed=seed
        )
        return incidence_matrix(build_graph(spec, make_rng(seed, DATA_STREAM, 3)))
    raise ConfigError(f"unknown problem type {kind!r}")


def build_sketcher(name: str, system: LinearSystem, block_size: int = 1) -> Sketcher:
    if name == "kaczmarz":
        return Sketcher.kaczmarz(system)
    if name == "coordinate_descent":
        return Sketcher.coordinate_descent(system)
    if name == "uniform_rows":
        return Sketcher.uniform_rows(system.m)
    if name == "block":
        return Sketcher.block(system.m, block_size)
    if name == "gaussian":
        return Sketcher.gaussian(system.m)
    if name == "column":
        return Sketcher.column_coordinate(system)
    raise ConfigError(f"unknown sketch {name!r}")


def build_metric(name: str, system: LinearSystem) -> MetricSpec:
    if name == "identity":
        return MetricSpec.identity(system.n)
    if name == "system":
        return MetricSpec.system_matrix(system)
    if name == "gram":
        return MetricSpec.gram(system)
    raise ConfigError(f"unknown metric {name!r}")


def problem_spectrum(system, metric, sketcher, sketch_name: str, seed: int):
    """W spectrum from the closed form when one exists, else Monte Carlo."""
    if sketch_name == "kaczmarz" and metric.is_identity:
        ez = expected_Z_closed(system, metric, "mRK")
    elif sketch_name == "coordinate_descent" and metric.kind == "system":
        ez = expected_Z_closed(system, metric, "mRCD")
    else:
        ez = estimate_EZ_monte_carlo(
            sketcher, system, metric, EZ_MONTE_CARLO_SAMPLES, seed
        )
    return spectrum_W(system, metric, ez)


def bound_report(cfg: SolverConfig, spectrum, n: int):
    """RateReport for the configured method, or None when not applicable."""
    lmin, lmax = spectrum.lambda_min_plus, min(spectrum.lambda_max, 1.0)
    beta = cfg.effective_beta(n)
    if not 0.0 < cfg.omega < 2.0:
        return None
    if cfg.momentum == "stochastic":
        rep = sm_rate_constants(cfg.omega, beta, n, lmin, lmax)
    else:
        rep = rate_constants(cfg.omega, beta, lmin, lmax)
    return rep if rep.admissible else None


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    return repr(float(v))


def write_trace_csv(path: Path, trace: IterateTrace, bound: np.ndarray | None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for j in range(len(trace.k)):
            w.writerow(
                [
                    _fmt(trace.k[j]),
                    _fmt(trace.rel_err_B[j]),
                    _fmt(trace.f_val[j]),
                    _fmt(None if bound is None else bound[j]),
                    _fmt(trace.op_count[j]),
                    _fmt(trace.wall_ns[j]),
                ]
            )


def aggregate(traces: list[IterateTrace]) -> dict[str, np.ndarray]:
    """Mean over trials at every checkpoint k reached by at least one trial."""
    ks = np.unique(np.concatenate([t.k for t in traces]))
    cols = {c: np.zeros(len(ks)) for c in ("rel_err_B", "f_val", "op_count", "wall_ns")}
    count = np.zeros(len(ks), dtype=np.int64)
    pos = {k: i for i, k in enumerate(ks.tolist())}
    for t in traces:
        rows = np.array([pos[k] for k in t.k.tolist()])
        count[rows] += 1
        cols["rel_err_B"][rows] += t.rel_err_B
        cols["f_val"][rows] += t.f_val
        cols["op_count"][rows] += t.op_count
        cols["wall_ns"][rows] += t.wall_ns
    out = {"k": ks, "trials": count}
    for c, v in cols.items():
        out[c] = v / count
    return out


def _run_one(args):
    cfg, system, metric, sketcher, x0, trial, prep = args
    return run(cfg, system, metric, sketcher, x0, trial=trial, prepared=prep)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> list[Path]:
    """Run every (solver, trial) pair and write per-trial and aggregate CSVs."""
    cfg.validate()
    out = Path(out_dir or cfg.output_dir)
    solver_cfgs = cfg.solver_configs()
    system = build_problem(cfg.problem, cfg.seed)
    metric = build_metric(cfg.metric, system)
    sketcher = build_sketcher(cfg.sketch, system, cfg.block_size)
    for name, sc in solver_cfgs:
        try:
            sc.validate(metric)
        except ConfigError as exc:
            raise ConfigError(f"solver {name!r}: {exc}") from None

    spectrum = None
    if cfg.rate_check:
        spectrum = problem_spectrum(system, metric, sketcher, cfg.sketch, cfg.seed)

    if cfg.x0 == "uniform":
        x0 = make_rng(cfg.seed, DATA_STREAM, 5).random(system.n)
    else:
        x0 = np.zeros(system.n)
    prep = prepare(system, metric, sketcher, x0)

    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, sc in solver_cfgs:
        jobs = [(sc, system, metric, sketcher, x0, t, prep) for t in range(cfg.trials)]
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                traces = list(pool.map(_run_one, jobs))
        else:
            traces = [_run_one(j) for j in jobs]
        rep = bound_report(sc, spectrum, system.n) if spectrum is not None else None
        for t, tr in enumerate(traces):
            path = out / f"trace_{name}_t{t}.csv"
            write_trace_csv(path, tr, None if rep is None else rep.bound(tr.k))
            written.append(path)
        agg = aggregate(traces)
        bound = None if rep is None else rep.bound(agg["k"])
        path = out / f"aggregate_{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS + ("trials",))
            for j in range(len(agg["k"])):
                w.writerow(
                    [_fmt(agg["k"][j]), _fmt(agg["rel_err_B"][j]), _fmt(agg["f_val"][j]),
                     _fmt(None if bound is None else bound[j]),
                     _fmt(agg["op_count"][j]), _fmt(agg["wall_ns"][j]),
                     _fmt(agg["trials"][j])]
                )
        written.append(path)
        log.info("%s: %d trials written", name, cfg.trials)
    if spectrum is not None:
        path = out / "spectrum.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("lambda_min_plus", "lambda_max", "inv_lambda_min_plus", "exact"))
            w.writerow((_fmt(spectrum.lambda_min_plus), _fmt(spectrum.lambda_max),
                        _fmt(1.0 / spectrum.lambda_min_plus), int(spectrum.exact)))
        written.append(path)
    return written


def measure_complexity_ratio(
    m: int,
    n: int,
    g_list,
    beta: float = 1e-4,
    eps: float = 1e-3,
    trials: int = 10,
    seed: int = 0,
    max_iters: int = 5_000_000,
) -> list[dict]:
    """Measured C_mSGD(beta) / C_smSGD(beta n) on systems with g nonzeros per row.

    Both methods use unit stepsize, start at 0 and stop once
    ||x_k - x*||_2 < eps; the cost of a run is its iteration count times the
    per-iteration operation count (4g + 3n for heavy ball, 4g + 1 for
    stochastic momentum).
    """
    rows = []
    for g in g_list:
        system = gen_sparse_rows_system(m, n, g, seed)
        metric = MetricSpec.identity(n)
        sketcher = Sketcher.kaczmarz(system)
        prep = prepare(system, metric, sketcher)
        common = dict(omega=1.0, beta=beta, max_iters=max_iters, tol=eps,
                      stop_rule="absolute_l2", checkpoint_stride=max_iters, seed=seed)
        heavy = SolverConfig(momentum="heavy_ball", **common)
        stoch = SolverConfig(momentum="stochastic", momentum_scale="equivalent", **common)
        ratios, it_m, it_s = [], [], []
        for t in range(trials):
            tm = run(heavy, system, metric, sketcher, trial=t, prepared=prep)
            ts = run(stoch, system, metric, sketcher, trial=t, prepared=prep)
            if not (tm.converged and ts.converged):
                raise RuntimeError(
                    f"g={g} trial {t}: no convergence within {max_iters} iterations"
                )
            ratios.append(tm.total_ops / ts.total_ops)
            it_m.append(tm.iterations)
            it_s.append(ts.iterations)
        rows.append(
            {
                "g": g,
                "ratio_measured": float(np.mean(ratios)),
                "ratio_theory": 1.0 + n / g,
                "ratio_cost_model": (4 * g + 3 * n) / (4 * g + 1),
                "iters_mSGD": float(np.mean(it_m)),
                "iters_smSGD": float(np.mean(it_s)),
            }
        )
    return rows
