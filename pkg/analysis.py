"""
socopredict analysis
Theoretical bounds and empirical metrics for AFHC under the colored-noise
prediction model.

    V       per-step bound on the expected competitive difference of AFHC
    B       scale of the static/dynamic switching gap
    alpha1  4V + 8B^2          alpha2  1/2 tr(KK^dagger R_e)
    g1, g2  switching and prediction-error parts of
            cost(AFHC) - cost(OPT) <= g1 + g2
    A       T x T matrix with g2 = 1/2 ||A e||^2 (scalar case)

Usage:
    report = bound_report(spec, impulse, noise, w=4)
    report.V, report.alpha1
    two_term, simplified = conc_tail_bound(report, spec.horizon, 4, u=10.0)
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from .algorithms import AlgorithmRun, fhc_windows
from .core import ArrayLike, ProblemSpec, as_sequence, induced_one_norm, proj_seminorm_sq_rows
from .errors import (
    ConvergenceError, DimensionError, RealizationMismatchError, UnboundedNoiseError,
)
from .prediction import (
    ImpulseResponse, NoiseSpec, Realization, big_F, fw_norm_sq, mix_seed, predict_window, realize,
)

logger = logging.getLogger(__name__)

NORMS = ["l1", "l2"]
POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000


# ---------------------------------------------------------------------------
# Bound report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    w: int
    fw_norm: float
    F_w: float
    V: float
    B: float
    alpha1: float
    alpha2: float
    V1: float
    V2: float
    lambda_bound: Optional[float]
    bern_a: Optional[float]
    bern_b: Optional[float]
    epsilon: Optional[float]
    # reported alongside
    T: int = 0
    beta: float = 0.0
    sigma2: Optional[float] = None
    V_l2: float = 0.0
    alpha1_regret: float = 0.0
    g2_expected: float = 0.0

    def to_dict(self) -> Dict[str, object]:
        keys = ["w", "fw_norm", "F_w", "V", "B", "alpha1", "alpha2", "V1", "V2",
                "lambda_bound", "bern_a", "bern_b", "epsilon"]
        return {k: getattr(self, k) for k in keys}

    def extras(self) -> Dict[str, object]:
        return {"T": self.T, "beta": self.beta, "sigma2": self.sigma2,
                "V_l2": self.V_l2, "alpha1_regret": self.alpha1_regret,
                "g2_expected": self.g2_expected}

    @property
    def fw_sq_normalized(self) -> Optional[float]:
        """||f_w||^2 / sigma^2 (scalar case)."""
        if not self.sigma2:
            return None
        return self.fw_norm ** 2 / self.sigma2


def _check_w(w: int):
    if w < 0:
        raise ValueError(f"w must be >= 0, got {w}")


def _gram_ones_norm(spec: ProblemSpec, norm: str) -> float:
    v = spec.ops.gram_inv @ np.ones(spec.n)
    if norm == "l1":
        return float(np.abs(v).sum())
    if norm == "l2":
        return float(np.linalg.norm(v))
    raise ValueError(f"norm must be one of {NORMS}, got '{norm}'")


def _switching_part(spec: ProblemSpec, f: ImpulseResponse, noise: NoiseSpec, w: int,
                    norm: str) -> float:
    beta = spec.beta
    fw = math.sqrt(fw_norm_sq(f, noise, w))
    return beta * induced_one_norm(spec.ops.k_pinv) * fw + 3.0 * beta * beta * _gram_ones_norm(spec, norm)


def bound_V(spec: ProblemSpec, f: ImpulseResponse, noise: NoiseSpec, w: int,
            norm: str = "l1") -> float:
    """(beta ||K^dagger||_1 ||f_w|| + 3 beta^2 ||(K^T K)^-1 1|| + F(w)/2) / (w+1)."""
    _check_w(w)
    F = big_F(f, noise, spec.ops, w)
    return (_switching_part(spec, f, noise, w, norm) + 0.5 * F) / (w + 1)


def bound_B(spec: ProblemSpec) -> float:
    return spec.beta * float(np.linalg.norm(spec.ops.kt_pinv @ np.ones(spec.n)))


def alpha1(V: float, B: float) -> float:
    return 4.0 * V + 8.0 * B * B


def alpha1_regret(V: float, B: float) -> float:
    """Constant of the sublinear-regret condition, (8V + 16B^2)."""
    return 8.0 * V + 16.0 * B * B


def alpha2(spec: ProblemSpec, noise: NoiseSpec) -> float:
    """1/2 tr(KK^dagger R_e)."""
    return 0.5 * float(np.trace(spec.ops.proj_range @ noise.innovation_covariance))


def bound_report(spec: ProblemSpec, f: ImpulseResponse, noise: NoiseSpec, w: int,
                 T: Optional[int] = None) -> BoundReport:
    _check_w(w)
    T = spec.horizon if T is None else T
    beta = spec.beta
    fw_sq = fw_norm_sq(f, noise, w)
    F = big_F(f, noise, spec.ops, w)
    V = bound_V(spec, f, noise, w, "l1")
    B = bound_B(spec)

    sigma2 = lam = a = b = None
    if f.m == 1:
        sigma2 = noise.sigma2
        if sigma2 > 0:
            lam = F / sigma2
    if lam is not None and noise.epsilon is not None:
        eps2 = noise.epsilon ** 2
        a = 8.0 * eps2 * (T / (w + 1)) * max(beta * beta * fw_sq / sigma2, 4.0 * lam * F)
        b = 16.0 * eps2 * lam

    return BoundReport(
        w=w, fw_norm=math.sqrt(fw_sq), F_w=F, V=V, B=B,
        alpha1=alpha1(V, B), alpha2=alpha2(spec, noise),
        V1=T * _switching_part(spec, f, noise, w, "l1") / (w + 1),
        V2=T * F / (2.0 * (w + 1)),
        lambda_bound=lam, bern_a=a, bern_b=b, epsilon=noise.epsilon,
        T=T, beta=beta, sigma2=sigma2,
        V_l2=bound_V(spec, f, noise, w, "l2"), alpha1_regret=alpha1_regret(V, B),
        g2_expected=expected_g2(spec, f, noise, w, T),
    )


def expected_g2(spec: ProblemSpec, f: ImpulseResponse, noise: NoiseSpec, w: int,
                T: Optional[int] = None) -> float:
    """E[g2] over the FHC windows actually tiled on a horizon of T steps.

    Step j of a window contributes 1/2 tr(R_e sum_{s<=j} f(s)^T KK^dagger f(s)).
    Shorter windows at the horizon edges make this at most V2, with equality
    for i.i.d. noise.
    """
    _check_w(w)
    T = spec.horizon if T is None else T
    taps = f.window(w)
    per_lag = np.einsum("sji,jl,slk->sik", taps, spec.ops.proj_range, taps)
    step = 0.5 * np.cumsum(np.einsum("ik,ski->s", noise.innovation_covariance, per_lag))
    # window_sum[L] = sum of the first L steps of a window
    window_sum = np.concatenate([[0.0], np.cumsum(step)])
    total = sum(window_sum[len(win)] for k in range(w + 1) for win in fhc_windows(k, w, T))
    return float(total) / (w + 1)


def optimal_window(spec: ProblemSpec, f: ImpulseResponse, noise: NoiseSpec, w_max: int,
                   norm: str = "l1") -> int:
    """argmin_{0 <= w <= w_max} V(w); ties go to the smaller w."""
    if not 0 <= w_max <= spec.horizon - 1:
        raise ValueError(f"w_max must satisfy 0 <= w_max <= T-1={spec.horizon - 1}, got {w_max}")
    best_w, best_v = 0, math.inf
    for w in range(w_max + 1):
        v = bound_V(spec, f, noise, w, norm)
        if v < best_v:
            best_w, best_v = w, v
    return best_w


# ---------------------------------------------------------------------------
# Tail bounds
# ---------------------------------------------------------------------------

def _exp_tail(u: float, denom: float) -> float:
    if u < 0:
        raise ValueError(f"u must be >= 0, got {u}")
    if denom <= 0.0:
        return 0.0 if u > 0 else 1.0
    return math.exp(-u * u / denom)


def as_probability(p: float) -> float:
    return min(1.0, max(0.0, p))


def g1_tail_bound(T: int, w: int, beta: float, eps: float, fw_sq: float, sigma2: float,
                  u: float) -> float:
    """exp(-u^2 / (2 eps^2 beta^2 (T/((w+1) sigma^2)) ||f_w||^2))."""
    return _exp_tail(u, 2.0 * eps * eps * beta * beta * (T / ((w + 1) * sigma2)) * fw_sq)


def g2_tail_bound(T: int, w: int, eps: float, lam: float, F_w: float, u: float) -> float:
    """exp(-u^2 / (8 eps^2 lambda (T F(w)/(w+1) + u)))."""
    return _exp_tail(u, 8.0 * eps * eps * lam * (T * F_w / (w + 1) + u))


def _require_tail_inputs(report: BoundReport):
    if report.epsilon is None:
        raise UnboundedNoiseError("tail bounds need bounded noise (epsilon)")
    if report.lambda_bound is None or report.sigma2 is None:
        raise DimensionError("tail bounds are defined for scalar instances with nonzero noise")


def tail_denominators(report: BoundReport, T: int, w: int, u: float) -> Tuple[float, float, float]:
    """Exponent denominators of the two-term bound and a + b u."""
    _require_tail_inputs(report)
    eps2 = report.epsilon ** 2
    lam = report.lambda_bound
    d1 = 8.0 * eps2 * (report.beta ** 2 * T / (w + 1)) * report.fw_sq_normalized
    d2 = 16.0 * eps2 * lam * (2.0 * T * report.F_w / (w + 1) + u)
    return d1, d2, report.bern_a + report.bern_b * u


def conc_tail_bound(report: BoundReport, T: int, w: int, u: float) -> Tuple[float, float]:
    """(two_term, simplified) bounds on P(comp_diff > VT + u).

    two_term is g1_tail(u/2) + g2_tail(u/2); simplified is 2 exp(-u^2/(a + b u)).
    Neither is clamped.
    """
    _require_tail_inputs(report)
    eps = report.epsilon
    two_term = (
        g1_tail_bound(T, w, report.beta, eps, report.fw_norm ** 2, report.sigma2, u / 2.0)
        + g2_tail_bound(T, w, eps, report.lambda_bound, report.F_w, u / 2.0)
    )
    simplified = 2.0 * _exp_tail(u, report.bern_a + report.bern_b * u)
    return two_term, simplified


# ---------------------------------------------------------------------------
# Per-realization metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class G1G2:
    g1: float
    g2: float

    def __iter__(self) -> Iterator[float]:
        return iter((self.g1, self.g2))


@dataclass(frozen=True)
class MetricRecord:
    algorithm: str
    w: Optional[int]
    cost_total: float
    cost_tracking: float
    cost_switching: float
    cost_opt: float
    cost_sta: float
    seed: int
    g1: Optional[float] = None
    g2: Optional[float] = None

    @property
    def regret(self) -> float:
        return self.cost_total - self.cost_sta

    @property
    def comp_diff(self) -> float:
        return self.cost_total - self.cost_opt


def metric_record(run: AlgorithmRun, opt_run: AlgorithmRun, sta_run: AlgorithmRun,
                  g: Optional[G1G2] = None) -> MetricRecord:
    return MetricRecord(
        algorithm=run.label, w=run.w,
        cost_total=run.cost.total, cost_tracking=run.cost.tracking,
        cost_switching=run.cost.switching,
        cost_opt=opt_run.cost.total, cost_sta=sta_run.cost.total,
        seed=run.realization.seed,
        g1=None if g is None else g.g1, g2=None if g is None else g.g2,
    )


def same_realization(a: Realization, b: Realization) -> bool:
    return a is b or (a.seed == b.seed and np.array_equal(a.y, b.y))


def _check_same(r: Realization, runs: Sequence[AlgorithmRun]):
    for run in runs:
        if not same_realization(run.realization, r):
            raise RealizationMismatchError(
                f"{run.label} was run on realization seed {run.realization.seed}, expected {r.seed}"
            )


def decompose_g1_g2(afhc_run: AlgorithmRun, fhc_runs: Sequence[AlgorithmRun],
                    opt_run: AlgorithmRun, r: Realization, f: ImpulseResponse,
                    spec: ProblemSpec, w: int) -> G1G2:
    """Switching (g1) and prediction-error (g2) parts of cost(AFHC) - cost(OPT)."""
    _check_same(r, [afhc_run, opt_run, *fhc_runs])
    if len(fhc_runs) != w + 1:
        raise ValueError(f"expected {w + 1} FHC runs, got {len(fhc_runs)}")
    T = r.horizon
    x_opt = opt_run.actions
    g1 = 0.0
    g2 = 0.0
    for run in sorted(fhc_runs, key=lambda run: run.k):
        x_k = run.actions
        for win in fhc_windows(run.k, w, T):
            if win.start > 1:
                g1 += spec.beta * float(np.abs(x_opt[win.start - 2] - x_k[win.start - 2]).sum())
            pred = predict_window(r, f, win.pred_time, win.end)
            err = r.y[win.start - 1:win.end] - pred
            g2 += 0.5 * float(proj_seminorm_sq_rows(spec.ops, err).sum())
    return G1G2(g1 / (w + 1), g2 / (w + 1))


def open_cd_bound(r: Realization, spec: ProblemSpec) -> float:
    """sum_t 1/2 ||yhat_t - y_t||^2_{KK^dagger}, a bound on cost(OPEN) - cost(OPT)."""
    return 0.5 * float(proj_seminorm_sq_rows(spec.ops, r.y_hat - r.y).sum())


def jensen_gap(afhc_run: AlgorithmRun, fhc_runs: Optional[Sequence[AlgorithmRun]] = None) -> float:
    """mean_k cost(FHC(k)) - cost(AFHC); nonnegative by convexity."""
    runs = afhc_run.components if fhc_runs is None else fhc_runs
    return float(np.mean([run.cost.total for run in runs])) - afhc_run.cost.total


# ---------------------------------------------------------------------------
# A-matrix machinery (scalar)
# ---------------------------------------------------------------------------

def _require_scalar(f: ImpulseResponse):
    if f.m != 1:
        raise DimensionError("the A-matrix construction is defined for scalar instances")


def build_A_matrix(f: ImpulseResponse, w: int, T: int, k: int) -> np.ndarray:
    """Block-diagonal A_k with lower-triangular Toeplitz blocks, one per FHC(k) window.

    Row t of a window started at tau holds f(t - s) for tau <= s <= t, so the
    window's rows of A_k e are y_t - y_{t|tau-1}.
    """
    _require_scalar(f)
    taps = f.scalar_taps(T)
    A = np.zeros((T, T))
    for win in fhc_windows(k, w, T):
        n = len(win)
        lag = np.subtract.outer(np.arange(n), np.arange(n))
        block = np.where(lag >= 0, taps[np.clip(lag, 0, None)], 0.0)
        s = win.start - 1
        A[s:s + n, s:s + n] = block
    return A


def combine_A(f: ImpulseResponse, w: int, T: int) -> np.ndarray:
    """Symmetric square root of (1/(w+1)) sum_k A_k^T A_k."""
    _require_scalar(f)
    _check_w(w)
    gram = np.zeros((T, T))
    for k in range(w + 1):
        A_k = build_A_matrix(f, w, T, k)
        gram += A_k.T @ A_k
    gram /= w + 1
    vals, vecs = np.linalg.eigh(0.5 * (gram + gram.T))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def g2_from_A(A: np.ndarray, innovations: ArrayLike) -> float:
    e = as_sequence(innovations, 1, "innovations")[:, 0]
    v = A @ e
    return 0.5 * float(v @ v)


def power_iteration(M: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Largest eigenvalue of a symmetric PSD matrix (Rayleigh-quotient stopping)."""
    v = np.ones(M.shape[0]) / math.sqrt(M.shape[0])
    lam = float(v @ M @ v)
    for _ in range(max_iter):
        mv = M @ v
        norm = float(np.linalg.norm(mv))
        if norm == 0.0:
            return 0.0
        v = mv / norm
        nxt = float(v @ M @ v)
        if abs(nxt - lam) <= tol * max(1.0, abs(nxt)):
            return nxt
        lam = nxt
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations",
                           best=lam)


def spectral_bound_check(A: np.ndarray, f: ImpulseResponse, noise: NoiseSpec, w: int) -> Tuple[float, float]:
    """(lambda_max(A A^T), F(w)/sigma^2)."""
    _require_scalar(f)
    lam = power_iteration(A @ A.T)
    taps = f.scalar_taps(w)
    bound = float(np.sum((w + 1 - np.arange(w + 1)) * taps * taps))
    if noise.sigma2 > 0:
        bound = big_F(f, noise, None, w) / noise.sigma2
    return lam, bound


# ---------------------------------------------------------------------------
# Regret diagnostics
# ---------------------------------------------------------------------------

def sta_gap_lower_bound(spec: ProblemSpec, y: ArrayLike) -> float:
    """Lower bound on cost(STA) - cost(OPT) for one target sequence."""
    y = as_sequence(y, spec.m, "targets")
    T = y.shape[0]
    variation = float(proj_seminorm_sq_rows(spec.ops, y - y.mean(axis=0)).sum())
    B = bound_B(spec)
    C = spec.beta ** 2 * float(np.ones(spec.n) @ spec.ops.gram_inv @ np.ones(spec.n)) / (2.0 * T)
    inner = max(0.0, math.sqrt(variation) - 2.0 * B * math.sqrt(T))
    return 0.5 * inner * inner - 2.0 * B * B * T - C


@dataclass(frozen=True)
class RegretCondition:
    holds: bool
    threshold: float
    variations: List[float] = field(default_factory=list)

    @property
    def infimum(self) -> float:
        return min(self.variations) if self.variations else math.inf

    def __bool__(self) -> bool:
        return self.holds


def regret_condition_check(spec: ProblemSpec, f: ImpulseResponse, noise: NoiseSpec,
                           y_hat_family: Sequence[ArrayLike], w: int, samples: int = 200,
                           seed: int = 0) -> RegretCondition:
    """Does inf over the family of E sum_t ||KK^dagger (y_t - ybar)||^2 exceed (8V + 16B^2)T?"""
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    V = bound_V(spec, f, noise, w)
    threshold = alpha1_regret(V, bound_B(spec)) * spec.horizon
    variations = []
    for j, y_hat in enumerate(y_hat_family):
        total = 0.0
        for i in range(samples):
            r = realize(f, noise, y_hat, mix_seed(seed, j * samples + i))
            total += float(proj_seminorm_sq_rows(spec.ops, r.y - r.y.mean(axis=0)).sum())
        variations.append(total / samples)
    holds = bool(variations) and min(variations) > threshold
    logger.info("regret condition: inf variation %.6g vs threshold %.6g",
                min(variations) if variations else math.nan, threshold)
    return RegretCondition(holds, threshold, variations)
