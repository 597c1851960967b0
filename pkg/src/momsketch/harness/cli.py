"""Command-line entry point: ``momsketch <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from ..consensus import (
    GraphSpec,
    algebraic_connectivity,
    build_graph,
    gossip_lambda_min_plus,
    read_edge_list,
    run_gossip,
    write_edge_list,
)
from ..rates import beta_max, rate_constants, sm_rate_constants
from ..rng import DATA_STREAM, make_rng
from ..solvers import ConfigError, SolverConfig, run
from .experiment import (
    ExperimentConfig,
    build_metric,
    build_problem,
    build_sketcher,
    bound_report,
    measure_complexity_ratio,
    problem_spectrum,
    run_experiment,
    write_trace_csv,
)

log = logging.getLogger("momsketch")


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def _writer(out: Path | None, name: str):
    if out is None:
        return sys.stdout, False
    out.mkdir(parents=True, exist_ok=True)
    return open(out / name, "w", newline="", encoding="utf-8"), True


def _emit(rows: list[dict], out: Path | None, name: str) -> None:
    fh, close = _writer(out, name)
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if close:
            fh.close()


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", default="sgd", choices=["sgd", "newton", "prox", "dual"])
    p.add_argument("--momentum", default="heavy_ball",
                   choices=["none", "heavy_ball", "stochastic"])
    p.add_argument("--scale", default="raw", choices=["raw", "equivalent"],
                   help="stochastic momentum scaling")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--stride", type=int, default=None, help="checkpoint stride (default m)")
    p.add_argument("--tol", type=float, default=None, help="relative B-error target")


def _solver_config(args, **over) -> SolverConfig:
    kw = dict(
        method=args.method,
        momentum=args.momentum,
        momentum_scale=args.scale,
        omega=args.omega,
        beta=args.beta,
        max_iters=args.max_iters,
        checkpoint_stride=args.stride,
        tol=args.tol,
        seed=args.seed,
    )
    kw.update(over)
    return SolverConfig(**kw)


def cmd_solve(args) -> int:
    if args.libsvm:
        problem = {"type": "libsvm", "path": args.libsvm}
    elif args.problem == "sparse_rows":
        problem = {"type": "sparse_rows", "m": args.m, "n": args.n, "g": args.g}
    else:
        problem = {"type": args.problem, "m": args.m, "n": args.n}
    system = build_problem(problem, args.seed)
    metric = build_metric(args.metric, system)
    sketcher = build_sketcher(args.sketch, system, args.block_size)
    cfg = _solver_config(args)
    cfg.validate(metric)
    spectrum = problem_spectrum(system, metric, sketcher, args.sketch, args.seed)
    trace = run(cfg, system, metric, sketcher)
    rep = bound_report(cfg, spectrum, system.n)
    bound = None if rep is None else rep.bound(trace.k)
    if args.out is None:
        _write_trace_stream(sys.stdout, trace, bound)
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        write_trace_csv(args.out / "trace.csv", trace, bound)
    log.info(
        "m=%d n=%d 1/lambda_min+=%.6g iterations=%d final rel_err=%.3e",
        system.m, system.n, 1.0 / spectrum.lambda_min_plus,
        trace.iterations, trace.rel_err_B[-1],
    )
    return 0


def _write_trace_stream(fh, trace, bound) -> None:
    from .experiment import TRACE_COLUMNS, _fmt

    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for j in range(len(trace.k)):
        w.writerow([_fmt(trace.k[j]), _fmt(trace.rel_err_B[j]), _fmt(trace.f_val[j]),
                    _fmt(None if bound is None else bound[j]), _fmt(trace.op_count[j]),
                    _fmt(trace.wall_ns[j])])


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    paths = run_experiment(cfg, args.out)
    for p in paths:
        print(p)
    return 0


def cmd_rates(args) -> int:
    betas = _float_list(args.beta) if args.beta else None
    if betas is None:
        bmax = beta_max(args.omega, args.lmin, args.lmax)
        betas = list(np.linspace(0.0, bmax, args.sweep, endpoint=False))
    rows = []
    for b in betas:
        if args.n:
            rep = sm_rate_constants(args.omega, b, args.n, args.lmin, args.lmax)
        else:
            rep = rate_constants(args.omega, b, args.lmin, args.lmax)
        rows.append({
            "beta": repr(float(b)), "a1": repr(rep.a1), "a2": repr(rep.a2),
            "q": repr(rep.q), "delta": repr(rep.delta), "admissible": int(rep.admissible),
        })
    _emit(rows, args.out, "rates.csv")
    log.info("beta_max = %.12g", beta_max(args.omega, args.lmin, args.lmax))
    return 0


def cmd_consensus(args) -> int:
    if args.edges:
        graph = read_edge_list(args.edges)
    else:
        spec = GraphSpec(args.topology, args.nodes, args.radius, seed=args.seed)
        graph = build_graph(spec, make_rng(args.seed, DATA_STREAM, 3))
    if args.write_edges:
        write_edge_list(graph, args.write_edges)
    lam = algebraic_connectivity(graph)
    rows = []
    for beta in _float_list(args.betas):
        cfg = SolverConfig(
            omega=args.omega, beta=beta, max_iters=args.max_iters,
            checkpoint_stride=args.stride, tol=args.tol, seed=args.seed,
        )
        for t in range(args.trials):
            c = make_rng(args.seed, DATA_STREAM, 4, t).random(graph.n)
            tr = run_gossip(graph, c, cfg, trial=t)
            if args.out is not None:
                args.out.mkdir(parents=True, exist_ok=True)
                write_trace_csv(args.out / f"gossip_b{beta:g}_t{t}.csv", tr, None)
            rows.append({
                "beta": beta, "trial": t, "iterations": tr.iterations,
                "converged": int(tr.converged), "rel_err_B": repr(float(tr.rel_err_B[-1])),
            })
    _emit(rows, args.out, "consensus_summary.csv")
    log.info("n=%d m=%d algebraic connectivity %.6g (1/lambda=%.1f), lambda_min+(W)=%.6g",
             graph.n, graph.m, lam, 1 / lam, gossip_lambda_min_plus(graph))
    return 0


def cmd_complexity(args) -> int:
    rows = measure_complexity_ratio(
        args.m, args.n, _int_list(args.g), beta=args.beta, eps=args.eps,
        trials=args.trials, seed=args.seed, max_iters=args.max_iters,
    )
    _emit(rows, args.out, "complexity.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="momsketch", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=0):
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--format", default="csv", choices=["csv"])
        sp.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    s = sub.add_parser("solve", help="single run on a generated or LIBSVM system")
    common(s)
    s.add_argument("--problem", default="gaussian", choices=["gaussian", "pd_gram", "sparse_rows"])
    s.add_argument("--libsvm", default=None, help="LIBSVM file (labels ignored)")
    s.add_argument("--m", type=int, default=300)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--g", type=int, default=10)
    s.add_argument("--sketch", default="kaczmarz",
                   choices=["kaczmarz", "coordinate_descent", "uniform_rows", "block",
                            "gaussian", "column"])
    s.add_argument("--block-size", type=int, default=1)
    s.add_argument("--metric", default="identity", choices=["identity", "system", "gram"])
    _solver_args(s)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", help="config-driven solver grid")
    common(e, seed_default=None)
    e.add_argument("--config", required=True, type=Path)
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("rates", help="evaluate rate constants")
    common(r)
    r.add_argument("--omega", type=float, default=1.0)
    r.add_argument("--lmin", type=float, required=True)
    r.add_argument("--lmax", type=float, required=True)
    r.add_argument("--beta", default=None, help="comma-separated momentum values")
    r.add_argument("--sweep", type=int, default=10, help="grid size over [0, beta_max)")
    r.add_argument("--n", type=int, default=0, help="use stochastic momentum on n coords")
    r.set_defaults(func=cmd_rates)

    c = sub.add_parser("consensus", help="gossip runs on a graph")
    common(c)
    c.add_argument("--topology", default="cycle", choices=["line", "cycle", "rgg"])
    c.add_argument("--nodes", type=int, default=100)
    c.add_argument("--radius", type=float, default=None)
    c.add_argument("--edges", type=Path, default=None, help="read graph from edge list")
    c.add_argument("--write-edges", type=Path, default=None)
    c.add_argument("--betas", default="0,0.4")
    c.add_argument("--omega", type=float, default=1.0)
    c.add_argument("--max-iters", type=int, default=2_000_000)
    c.add_argument("--stride", type=int, default=None)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--trials", type=int, default=1)
    c.set_defaults(func=cmd_consensus)

    x = sub.add_parser("complexity", help="measured vs predicted cost ratio")
    common(x)
    x.add_argument("--m", type=int, default=200)
    x.add_argument("--n", type=int, default=100)
    x.add_argument("--g", default="5,20,50")
    x.add_argument("--beta", type=float, default=1e-4)
    x.add_argument("--eps", type=float, default=1e-3)
    x.add_argument("--trials", type=int, default=10)
    x.add_argument("--max-iters", type=int, default=5_000_000)
    x.set_defaults(func=cmd_complexity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"momsketch: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
