"""
socopredict - smoothed online tracking under colored prediction noise.

Online LASSO with switching costs: at each step choose x_t to track y_t
through K, paying beta ||x_t - x_{t-1}||_1 for every change, while y_t is
only known through predictions whose errors follow a colored-noise model.

Policies: FHC, AFHC (averaging fixed horizon control), RHC, OPEN, and the
offline references OPT and STA. Bounds: V, B, alpha1, alpha2, the g1/g2
decomposition, concentration tails and the optimal lookahead window.

Quick usage:
    from socopredict import build_spec, iid_impulse, make_noise, realize, run_afhc

    spec = build_spec([[1.0]], beta=1.0, horizon=120)
    f = iid_impulse()
    noise = make_noise("gaussian", [[1.0]])
    r = realize(f, noise, [0.0] * 120, seed=7)
    run_afhc(4, r, spec, f).cost.total
"""

__version__ = "1.0.0"

from .core import ProblemSpec, Trajectory, CostBreakdown, build_spec, eval_cost
from .errors import SocoError, ConfigError
from .prediction import (
    ImpulseResponse, NoiseSpec, Realization, impulse_from_taps, iid_impulse, wiener_impulse,
    kalman_impulse, make_noise, realize, predict_at, fw_norm_sq, big_F,
)
from .solver import SolverSettings, WindowProblem, SolveResult, solve_window, solve_opt, static_optimum
from .algorithms import AlgorithmRun, run_fhc, run_afhc, run_rhc, run_open, run_opt, run_sta
from .analysis import BoundReport, bound_report, bound_V, optimal_window, decompose_g1_g2, expected_g2

__all__ = [
    "ProblemSpec",
    "Trajectory",
    "CostBreakdown",
    "build_spec",
    "eval_cost",
    "SocoError",
    "ConfigError",
    "ImpulseResponse",
    "NoiseSpec",
    "Realization",
    "impulse_from_taps",
    "iid_impulse",
    "wiener_impulse",
    "kalman_impulse",
    "make_noise",
    "realize",
    "predict_at",
    "fw_norm_sq",
    "big_F",
    "SolverSettings",
    "WindowProblem",
    "SolveResult",
    "solve_window",
    "solve_opt",
    "static_optimum",
    "AlgorithmRun",
    "run_fhc",
    "run_afhc",
    "run_rhc",
    "run_open",
    "run_opt",
    "run_sta",
    "BoundReport",
    "bound_report",
    "bound_V",
    "optimal_window",
    "decompose_g1_g2",
    "expected_g2",
]
