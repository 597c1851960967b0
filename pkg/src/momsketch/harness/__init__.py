from .experiment import (
    CostLedger,
    ExperimentConfig,
    measure_complexity_ratio,
    run_experiment,
)
from .generators import gen_gaussian_system, gen_pd_system, gen_sparse_rows_system
from .libsvm import parse_libsvm, write_libsvm

__all__ = [
    "CostLedger",
    "ExperimentConfig",
    "gen_gaussian_system",
    "gen_pd_system",
    "gen_sparse_rows_system",
    "measure_complexity_ratio",
    "parse_libsvm",
    "run_experiment",
    "write_libsvm",
]
