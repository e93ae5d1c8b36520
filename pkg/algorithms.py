"""
socopredict algorithms
Online and offline policies, each producing an AlgorithmRun against one
Realization:

    FHC(k)  fixed horizon control; windows of w+1 steps start at
            t = k+1, k+1+(w+1), ...; for k >= 1 a truncated window 1..k
            runs first on the time-zero predictions
    AFHC    pointwise average of FHC(0..w)
    OPEN    one solve against the time-zero predictions
    OPT     offline dynamic optimum on the realized targets
    STA     offline best constant action
    RHC     receding horizon baseline: re-solve every step, commit the first action

Every window started at tau uses only the predictions y_{.|tau-1}.

Usage:
    run = run_afhc(3, realization, spec, impulse)
    run.cost.total
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import List, Optional, Tuple
import logging

import numpy as np

from .core import CostBreakdown, ProblemSpec, Trajectory, eval_cost
from .errors import DimensionError, SocoError, WindowSolveError
from .prediction import ImpulseResponse, Realization, predict_window
from .solver import (
    DEFAULT_SETTINGS, SolverSettings, WindowProblem, solve_opt, solve_with, static_optimum,
)

logger = logging.getLogger(__name__)

FHC = "FHC"
AFHC = "AFHC"
OPEN = "OPEN"
OPT = "OPT"
STA = "STA"
RHC = "RHC"
ALGORITHMS = [FHC, AFHC, OPEN, OPT, STA, RHC]
ONLINE = [FHC, AFHC, RHC]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AlgorithmRun:
    name: str
    trajectory: Trajectory
    cost: CostBreakdown
    realization: Realization
    w: Optional[int] = None
    k: Optional[int] = None
    components: Tuple["AlgorithmRun", ...] = ()

    @property
    def label(self) -> str:
        return f"{FHC}({self.k})" if self.name == FHC else self.name

    @property
    def actions(self) -> np.ndarray:
        return self.trajectory.actions


@dataclass(frozen=True)
class Window:
    """Steps start..end (1-based, inclusive), planned from predictions at start - 1."""
    start: int
    end: int

    @property
    def pred_time(self) -> int:
        return self.start - 1

    def __len__(self) -> int:
        return self.end - self.start + 1


def fhc_windows(k: int, w: int, T: int) -> List[Window]:
    """Windows of FHC(k): a partition of 1..T."""
    if w < 0:
        raise ValueError(f"w must be >= 0, got {w}")
    if not 0 <= k <= w:
        raise ValueError(f"k must satisfy 0 <= k <= w={w}, got {k}")
    windows = []
    if k >= 1:
        windows.append(Window(1, min(k, T)))
    start = k + 1
    while start <= T:
        windows.append(Window(start, min(start + w, T)))
        start += w + 1
    return windows


def _check_horizon(r: Realization, spec: ProblemSpec):
    if r.horizon != spec.horizon:
        raise DimensionError(f"realization has horizon {r.horizon}, problem {spec.horizon}")


def _make_run(name: str, actions: np.ndarray, r: Realization, spec: ProblemSpec, **extra) -> AlgorithmRun:
    return AlgorithmRun(name, Trajectory(actions), eval_cost(spec, r.y, actions), r, **extra)


def _solve_window(spec: ProblemSpec, targets: np.ndarray, x_prev: np.ndarray, start: int,
                  settings: SolverSettings, warm_start: Optional[np.ndarray]):
    try:
        return solve_with(WindowProblem(targets, x_prev, spec), settings, warm_start)
    except SocoError as e:
        raise WindowSolveError(start, e) from e


# ---------------------------------------------------------------------------
# Online policies
# ---------------------------------------------------------------------------

def run_fhc(k: int, w: int, r: Realization, spec: ProblemSpec, f: ImpulseResponse,
            settings: SolverSettings = DEFAULT_SETTINGS) -> AlgorithmRun:
    _check_horizon(r, spec)
    T = r.horizon
    actions = np.zeros((T, spec.n))
    previous = None
    for win in fhc_windows(k, w, T):
        targets = predict_window(r, f, win.pred_time, win.end)
        x_prev = actions[win.start - 2] if win.start > 1 else spec.x0
        warm = None if previous is None else np.tile(previous[-1], (len(win), 1))
        res = _solve_window(spec, targets, x_prev, win.start, settings, warm)
        actions[win.start - 1:win.end] = res.actions
        previous = res.actions
    return _make_run(FHC, actions, r, spec, w=w, k=k)


def average_runs(runs: List[AlgorithmRun], r: Realization, spec: ProblemSpec, w: int) -> AlgorithmRun:
    """AFHC from its w+1 FHC copies: actions are averaged, cost is re-evaluated."""
    if len(runs) != w + 1:
        raise ValueError(f"AFHC needs {w + 1} FHC runs, got {len(runs)}")
    actions = np.mean(np.stack([run.actions for run in runs]), axis=0)
    return _make_run(AFHC, actions, r, spec, w=w, components=tuple(runs))


def run_afhc(w: int, r: Realization, spec: ProblemSpec, f: ImpulseResponse,
             settings: SolverSettings = DEFAULT_SETTINGS) -> AlgorithmRun:
    if w < 0:
        raise ValueError(f"w must be >= 0, got {w}")
    runs = [run_fhc(k, w, r, spec, f, settings) for k in range(w + 1)]
    return average_runs(runs, r, spec, w)


def run_rhc(w: int, r: Realization, spec: ProblemSpec, f: ImpulseResponse,
            settings: SolverSettings = DEFAULT_SETTINGS) -> AlgorithmRun:
    if w < 0:
        raise ValueError(f"w must be >= 0, got {w}")
    _check_horizon(r, spec)
    T = r.horizon
    actions = np.zeros((T, spec.n))
    plan = None
    for t in range(1, T + 1):
        end = min(t + w, T)
        targets = predict_window(r, f, t - 1, end)
        x_prev = actions[t - 2] if t > 1 else spec.x0
        warm = None
        if plan is not None:
            warm = np.vstack([plan[1:], plan[-1:]])[:end - t + 1]
            if warm.shape[0] < end - t + 1:
                warm = None
        res = _solve_window(spec, targets, x_prev, t, settings, warm)
        actions[t - 1] = res.actions[0]
        plan = res.actions
    return _make_run(RHC, actions, r, spec, w=w)


# ---------------------------------------------------------------------------
# Offline references
# ---------------------------------------------------------------------------

def run_open(r: Realization, spec: ProblemSpec, f: ImpulseResponse,
             settings: SolverSettings = DEFAULT_SETTINGS) -> AlgorithmRun:
    _check_horizon(r, spec)
    targets = predict_window(r, f, 0, r.horizon)
    res = _solve_window(spec, targets, spec.x0, 1, settings, None)
    return _make_run(OPEN, res.actions, r, spec)


def run_opt(r: Realization, spec: ProblemSpec,
            settings: SolverSettings = DEFAULT_SETTINGS) -> AlgorithmRun:
    _check_horizon(r, spec)
    try:
        res = solve_opt(spec, r.y, settings.tol, settings.max_iter, settings.method)
    except SocoError as e:
        raise WindowSolveError(1, e) from e
    return _make_run(OPT, res.actions, r, spec)


def run_sta(r: Realization, spec: ProblemSpec,
            settings: SolverSettings = DEFAULT_SETTINGS) -> AlgorithmRun:
    _check_horizon(r, spec)
    static = static_optimum(spec, r.y, settings.tol, settings.max_iter)
    if not static.closed_form:
        logger.info("static optimum for seed %d used the numeric fallback", r.seed)
    return _make_run(STA, np.tile(static.x, (r.horizon, 1)), r, spec)


def run_algorithm(name: str, r: Realization, spec: ProblemSpec, f: ImpulseResponse,
                  w: Optional[int] = None, k: Optional[int] = None,
                  settings: SolverSettings = DEFAULT_SETTINGS) -> AlgorithmRun:
    """Dispatch by algorithm name."""
    if name == FHC:
        return run_fhc(k or 0, w or 0, r, spec, f, settings)
    if name == AFHC:
        return run_afhc(w or 0, r, spec, f, settings)
    if name == RHC:
        return run_rhc(w or 0, r, spec, f, settings)
    if name == OPEN:
        return run_open(r, spec, f, settings)
    if name == OPT:
        return run_opt(r, spec, settings)
    if name == STA:
        return run_sta(r, spec, settings)
    raise ValueError(f"unknown algorithm '{name}'")
