"""Randomized sketch-and-project solvers with heavy-ball and stochastic momentum."""

from .linalg import (
    LinearSystem,
    MetricSpec,
    SpectrumReport,
    b_inner,
    estimate_EZ_monte_carlo,
    pinv_psd,
    project_onto_solution_set,
    spectrum_W,
)
from .sketch import Sketcher, SketchSample, f_S_value, f_value_closed, sample, stoch_grad
from .solvers import (
    IterateState,
    IterateTrace,
    SolverConfig,
    cesaro_average,
    dual_value,
    phi_map,
    run,
    step_dual,
    step_primal,
    step_stochastic_momentum,
)

__version__ = "0.1.0"

__all__ = [
    "IterateState",
    "IterateTrace",
    "LinearSystem",
    "MetricSpec",
    "SketchSample",
    "Sketcher",
    "SolverConfig",
    "SpectrumReport",
    "b_inner",
    "cesaro_average",
    "dual_value",
    "estimate_EZ_monte_carlo",
    "f_S_value",
    "f_value_closed",
    "phi_map",
    "pinv_psd",
    "project_onto_solution_set",
    "run",
    "sample",
    "spectrum_W",
    "step_dual",
    "step_primal",
    "step_stochastic_momentum",
    "stoch_grad",
]
