"""
socopredict solver
The window subproblem shared by FHC windows, OPEN and OPT:

    min_x  sum_t 1/2 ||y_t - K x_t||^2 + beta ||x_t - x_{t-1}||_1,   x_0 = x_prev

Paths:
    admm   operator splitting on z_t = x_t - x_{t-1}; the quadratic block is a
           banded (block-tridiagonal) system factored with scipy's banded
           Cholesky, z is soft-thresholded, rho follows residual balancing.
           The iterate is periodically polished by solving the equality
           system implied by its sign pattern.
    dp     exact derivative-message dynamic program for n == 1.
    lstsq  beta == 0, no coupling.

Duals are recovered from the quadratic block's stationarity condition:
lambda_t = sum_{s >= t} K^T (y_s - K x_s).

Usage:
    spec = build_spec([[1.0]], beta=10.0, horizon=2)
    res = solve_window(WindowProblem([[1.0], [1.0]], [0.0], spec))
    res.actions      # [[0.], [0.]]
    res.objective    # 1.0
"""

from __future__ import annotations
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional
import logging
import math

import numpy as np
import scipy.linalg as la

from .core import (
    ArrayLike, ProblemSpec, as_sequence, as_vector, eval_cost, switching_increments,
)
from .errors import (
    ConvergenceError, DimensionError, InstanceTooLargeError, SocoError, WindowSolveError,
)

logger = logging.getLogger(__name__)

METHODS = ["auto", "admm", "dp"]
POLISH_EVERY = 25
BALANCE_RATIO = 10.0
DUAL_IDENTITY_RTOL = 1e-6
MAX_GRID_STATES = 4_000_000


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverSettings:
    """Solver limits, passed down unchanged through every algorithm."""
    tol: float = 1e-8
    max_iter: int = 50_000
    method: str = "auto"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got '{self.method}'")


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True, eq=False)
class WindowProblem:
    targets: np.ndarray  # (W, m)
    x_prev: np.ndarray   # (n,)
    spec: ProblemSpec

    def __post_init__(self):
        targets = as_sequence(self.targets, self.spec.m, "targets")
        if targets.shape[0] < 1:
            raise DimensionError("window must contain at least one target")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "x_prev", as_vector(self.x_prev, self.spec.n, "x_prev"))

    @property
    def window_len(self) -> int:
        return self.targets.shape[0]


@dataclass(frozen=True, eq=False)
class SolveResult:
    actions: np.ndarray  # (W, n)
    objective: float
    duals: np.ndarray    # (W, n)
    iterations: int
    primal_residual: float
    dual_residual: float
    method: str
    kkt: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class StaticOptimum:
    x: np.ndarray
    cost: float
    closed_form: bool

    def __iter__(self) -> Iterator:
        return iter((self.x, self.cost))


# ---------------------------------------------------------------------------
# Objective, duals, KKT
# ---------------------------------------------------------------------------

def window_objective(spec: ProblemSpec, targets: np.ndarray, x_prev: np.ndarray,
                     actions: np.ndarray) -> float:
    resid = targets - actions @ spec.K.T
    tracking = math.fsum(0.5 * np.einsum("ij,ij->i", resid, resid))
    return tracking + spec.beta * math.fsum(switching_increments(actions, x_prev))


def recover_duals(spec: ProblemSpec, targets: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """lambda_t = sum_{s >= t} K^T (y_s - K x_s)."""
    step = (targets - actions @ spec.K.T) @ spec.K
    return np.cumsum(step[::-1], axis=0)[::-1]


def kkt_residuals(spec: ProblemSpec, targets: ArrayLike, x_prev: ArrayLike,
                  actions: ArrayLike, duals: Optional[ArrayLike] = None) -> Dict[str, float]:
    """Stationarity, dual box and complementary-slackness residuals.

    Complementary slackness is measured as max |beta |z| - lambda z| over
    z_t = x_t - x_{t-1}.
    """
    targets = as_sequence(targets, spec.m, "targets")
    actions = as_sequence(actions, spec.n, "actions")
    x_prev = as_vector(x_prev, spec.n, "x_prev")
    lam = recover_duals(spec, targets, actions) if duals is None else as_sequence(duals, spec.n, "duals")

    lam_next = np.vstack([lam[1:], np.zeros((1, spec.n))])
    gram = spec.K.T @ spec.K
    station = actions @ gram - targets @ spec.K + (lam - lam_next)
    z = np.diff(np.vstack([x_prev.reshape(1, -1), actions]), axis=0)
    return {
        "stationarity": float(np.max(np.abs(station))),
        "box": float(max(0.0, np.max(np.abs(lam)) - spec.beta)),
        "slackness": float(np.max(np.abs(spec.beta * np.abs(z) - lam * z))),
    }


def _kkt_ok(kkt: Dict[str, float], limit: float) -> bool:
    return all(v <= limit for v in kkt.values())


def _finish(p: WindowProblem, actions: np.ndarray, iterations: int, r_p: float, r_d: float,
            method: str) -> SolveResult:
    spec = p.spec
    duals = recover_duals(spec, p.targets, actions)
    kkt = kkt_residuals(spec, p.targets, p.x_prev, actions, duals)
    obj = window_objective(spec, p.targets, p.x_prev, actions)
    return SolveResult(actions, obj, duals, iterations, r_p, r_d, method, kkt)


# ---------------------------------------------------------------------------
# Least squares (beta == 0)
# ---------------------------------------------------------------------------

def _solve_lstsq(p: WindowProblem) -> SolveResult:
    actions = p.targets @ p.spec.ops.k_pinv.T
    return _finish(p, actions, 0, 0.0, 0.0, "lstsq")


# ---------------------------------------------------------------------------
# Exact scalar dynamic program
# ---------------------------------------------------------------------------

def _solve_scalar_dp(p: WindowProblem) -> SolveResult:
    """Derivative messages for n == 1.

    The message derivative is piecewise linear and nondecreasing, stored as
    knots (position, slope jump, intercept jump) between a left piece
    s0 x + c0 and a right piece sR x + cR. Each step adds a (x - d_t) and,
    before the last step, clips the derivative to [-beta, beta], recording
    the clip points. Backtracking clips x_{t+1} into [lo_t, hi_t].
    """
    spec = p.spec
    beta = spec.beta
    a = float(spec.K[:, 0] @ spec.K[:, 0])
    d = (p.targets @ spec.ops.k_pinv.T)[:, 0]
    W = d.shape[0]

    knots = deque([(float(p.x_prev[0]), 0.0, 2.0 * beta)])
    s0, c0, sR, cR = 0.0, -beta, 0.0, beta
    lo = np.empty(W)
    hi = np.empty(W)

    for t in range(W):
        s0 += a
        c0 -= a * d[t]
        sR += a
        cR -= a * d[t]
        if t == W - 1:
            break

        # left clip at -beta
        s, c = s0, c0
        x_lo = None
        while knots:
            pos, ds, dc = knots[0]
            if s * pos + c > -beta:
                x_lo = (-beta - c) / s
                break
            knots.popleft()
            s += ds
            c += dc
            if s * pos + c >= -beta:
                x_lo = pos
                break
        if x_lo is None:
            x_lo = (-beta - c) / s
        knots.appendleft((x_lo, s, c + beta))
        s0, c0 = 0.0, -beta

        # right clip at +beta
        s, c = sR, cR
        x_hi = None
        while knots:
            pos, ds, dc = knots[-1]
            if s * pos + c < beta:
                x_hi = (beta - c) / s
                break
            knots.pop()
            s -= ds
            c -= dc
            if s * pos + c <= beta:
                x_hi = pos
                break
        if x_hi is None:
            x_hi = (beta - c) / s
        knots.append((x_hi, -s, beta - c))
        sR, cR = 0.0, beta

        lo[t], hi[t] = x_lo, x_hi

    # root of the last derivative
    s, c = s0, c0
    root = None
    for pos, ds, dc in knots:
        if s * pos + c > 0.0:
            root = -c / s
            break
        s += ds
        c += dc
        if s * pos + c >= 0.0:
            root = pos
            break
    if root is None:
        root = -c / s

    x = np.empty(W)
    x[W - 1] = root
    for t in range(W - 2, -1, -1):
        x[t] = min(max(x[t + 1], lo[t]), hi[t])
    return _finish(p, x.reshape(-1, 1), W, 0.0, 0.0, "dp")


# ---------------------------------------------------------------------------
# ADMM
# ---------------------------------------------------------------------------

def _banded_system(gram: np.ndarray, rho: float, W: int) -> np.ndarray:
    """Upper banded form of I_W (x) K^T K + rho D^T D (x) I_n, bandwidth n."""
    n = gram.shape[0]
    N = W * n
    ab = np.zeros((n + 1, N))
    dtd = np.full(W, 2.0)
    dtd[-1] = 1.0
    for k in range(n):
        diag = np.zeros(N - k)
        for i in range(n - k):
            diag[i::n] = gram[i, i + k]
        if k == 0:
            diag += np.repeat(rho * dtd, n)
        ab[n - k, k:] = diag
    if W > 1:
        ab[0, n:] = -rho
    return ab


def _d_transpose(v: np.ndarray) -> np.ndarray:
    """(D^T v)_t = v_t - v_{t+1}, v_{W+1} = 0."""
    out = np.array(v)
    out[:-1] -= v[1:]
    return out


def _soft_threshold(v: np.ndarray, k: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - k, 0.0)


def _polish(p: WindowProblem, z: np.ndarray) -> Optional[np.ndarray]:
    """Exact minimizer on the fusion pattern and signs of z, or None.

    Coordinates with z_{t,i} == 0 are fused to the previous step (or x_prev);
    the rest carry their sign into a linear switching term. The KKT system is
    ordered step by step as [x_t, lambda_t], which makes it banded with
    half-bandwidth 3n.
    """
    spec = p.spec
    W, n = z.shape
    gram = spec.K.T @ spec.K
    sigma = np.sign(z)
    fused = z == 0.0
    lin = p.targets @ spec.K - spec.beta * _d_transpose(sigma)

    bw = 3 * n
    ab = np.zeros((2 * bw + 1, 2 * n * W))
    rhs = np.zeros(2 * n * W)

    def put(row: int, col: int, value: float):
        ab[bw + row - col, col] = value

    for t in range(W):
        xo, lo = 2 * n * t, 2 * n * t + n
        for i in range(n):
            for j in range(n):
                put(xo + i, xo + j, gram[i, j])
            rhs[xo + i] = lin[t, i]
            if fused[t, i]:
                # x_{t,i} - x_{t-1,i} = 0
                put(xo + i, lo + i, 1.0)
                put(lo + i, xo + i, 1.0)
                if t > 0:
                    put(lo + i, xo - 2 * n + i, -1.0)
                else:
                    rhs[lo + i] = p.x_prev[i]
            else:
                put(lo + i, lo + i, 1.0)
            if t + 1 < W and fused[t + 1, i]:
                put(xo + i, lo + 2 * n + i, -1.0)

    try:
        sol = la.solve_banded((bw, bw), ab, rhs)
    except (np.linalg.LinAlgError, ValueError):
        return None
    x = sol.reshape(W, 2 * n)[:, :n]
    if not np.all(np.isfinite(x)):
        return None

    z_new = np.diff(np.vstack([p.x_prev.reshape(1, -1), x]), axis=0)
    if np.any(z_new * sigma < 0):
        return None
    return x


def _solve_admm(p: WindowProblem, tol: float, max_iter: int,
                warm_start: Optional[np.ndarray]) -> SolveResult:
    spec = p.spec
    W, n = p.window_len, spec.n
    gram = spec.K.T @ spec.K
    b = p.targets @ spec.K
    scale = 1.0 + float(np.linalg.norm(p.targets))
    limit = tol * scale

    x = np.tile(p.x_prev, (W, 1)) if warm_start is None else as_sequence(warm_start, n, "warm_start").copy()
    if x.shape[0] != W:
        raise DimensionError(f"warm start has length {x.shape[0]}, expected {W}")
    z = np.diff(np.vstack([p.x_prev.reshape(1, -1), x]), axis=0)
    u = np.zeros_like(z)

    rho = spec.beta
    factor = la.cholesky_banded(_banded_system(gram, rho, W))
    r_p = r_d = math.inf
    best, best_p, best_d = x, math.inf, math.inf

    for it in range(1, max_iter + 1):
        rhs = b + rho * _d_transpose(z - u)
        rhs[0] += rho * p.x_prev
        x = la.cho_solve_banded((factor, False), rhs.reshape(-1)).reshape(W, n)

        dx = np.diff(np.vstack([p.x_prev.reshape(1, -1), x]), axis=0)
        z_old = z
        z = _soft_threshold(dx + u, spec.beta / rho)
        u = u + dx - z

        r_p = float(np.linalg.norm(dx - z))
        r_d = float(rho * np.linalg.norm(_d_transpose(z - z_old)))
        if max(r_p, r_d) < max(best_p, best_d):
            best, best_p, best_d = x, r_p, r_d
        converged = r_p <= limit and r_d <= limit
        if converged or it % POLISH_EVERY == 0:
            polished = _polish(p, z)
            if polished is not None:
                res = _finish(p, polished, it, r_p, r_d, "admm+polish")
                if _kkt_ok(res.kkt, limit):
                    logger.debug("admm polished: W=%d iterations=%d", W, it)
                    return res
        if converged:
            logger.debug("admm converged: W=%d iterations=%d rho=%.3g", W, it, rho)
            return _finish(p, x, it, r_p, r_d, "admm")

        if r_p > BALANCE_RATIO * r_d:
            rho *= 2.0
            u /= 2.0
            factor = la.cholesky_banded(_banded_system(gram, rho, W))
        elif r_d > BALANCE_RATIO * r_p:
            rho /= 2.0
            u *= 2.0
            factor = la.cholesky_banded(_banded_system(gram, rho, W))

    raise ConvergenceError(
        f"window solve did not converge in {max_iter} iterations "
        f"(best primal {best_p:.3g}, dual {best_d:.3g}, target {limit:.3g})",
        best=best, residuals={"primal": best_p, "dual": best_d},
    )


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def solve_window(p: WindowProblem, tol: float = DEFAULT_SETTINGS.tol,
                 max_iter: int = DEFAULT_SETTINGS.max_iter, method: str = "auto",
                 warm_start: Optional[ArrayLike] = None) -> SolveResult:
    """Minimize the window objective. Deterministic given its inputs."""
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got '{method}'")

    if p.spec.beta == 0.0:
        return _solve_lstsq(p)
    if method == "dp" or (method == "auto" and p.spec.n == 1):
        if p.spec.n != 1:
            raise DimensionError("the dp method requires a single action coordinate")
        return _solve_scalar_dp(p)
    return _solve_admm(p, tol, max_iter, warm_start)


def solve_with(p: WindowProblem, settings: SolverSettings,
               warm_start: Optional[ArrayLike] = None) -> SolveResult:
    return solve_window(p, settings.tol, settings.max_iter, settings.method, warm_start)


def opt_dual_cost(spec: ProblemSpec, y: ArrayLike, duals: ArrayLike) -> float:
    """sum_t 1/2 ||y_t||^2 - 1/2 ||KK^dagger y_t - (K^T)^dagger s_t||^2, s_t = lambda_t - lambda_{t+1}."""
    y = as_sequence(y, spec.m, "targets")
    lam = as_sequence(duals, spec.n, "duals")
    if lam.shape[0] != y.shape[0]:
        raise DimensionError(f"duals have length {lam.shape[0]}, targets {y.shape[0]}")
    s = lam - np.vstack([lam[1:], np.zeros((1, spec.n))])
    inner = y @ spec.ops.proj_range.T - s @ spec.ops.kt_pinv.T
    return math.fsum(0.5 * np.einsum("ij,ij->i", y, y)) - math.fsum(
        0.5 * np.einsum("ij,ij->i", inner, inner))


def solve_opt(spec: ProblemSpec, y: ArrayLike, tol: float = DEFAULT_SETTINGS.tol,
              max_iter: int = DEFAULT_SETTINGS.max_iter, method: str = "auto") -> SolveResult:
    """Offline dynamic optimum over the full target sequence, from x_0 = 0."""
    p = WindowProblem(as_sequence(y, spec.m, "targets"), spec.x0, spec)
    res = solve_window(p, tol, max_iter, method)
    dual = opt_dual_cost(spec, p.targets, res.duals)
    if abs(dual - res.objective) > DUAL_IDENTITY_RTOL * (1.0 + abs(res.objective)):
        logger.warning("dual cost %.12g disagrees with primal objective %.12g",
                       dual, res.objective)
    return res


def static_optimum(spec: ProblemSpec, y: ArrayLike, tol: float = DEFAULT_SETTINGS.tol,
                   max_iter: int = DEFAULT_SETTINGS.max_iter) -> StaticOptimum:
    """Best constant action in hindsight and its cost.

    Uses x = K^dagger ybar - (beta/T)(K^T K)^-1 1 when every coordinate is
    nonnegative; otherwise minimizes 1/2 ||ybar - Kx||^2 + (beta/T)||x||_1
    numerically (closed_form=False).
    """
    y = as_sequence(y, spec.m, "targets")
    T = y.shape[0]
    if T < 1:
        raise DimensionError("targets must be nonempty")
    ybar = y.mean(axis=0)
    ops = spec.ops
    x = ops.k_pinv @ ybar - (spec.beta / T) * ops.gram_inv @ np.ones(spec.n)
    closed = bool(np.all(x >= 0.0))
    if not closed:
        logger.info("static optimum leaves the nonnegative orthant; using numeric fallback")
        sub = spec.with_beta(spec.beta / T, horizon=1)
        x = solve_window(WindowProblem(ybar.reshape(1, -1), spec.x0, sub), tol, max_iter).actions[0]
    cost = eval_cost(spec, y, np.tile(x, (T, 1))).total
    return StaticOptimum(np.array(x), cost, closed)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def _l1_transform(values: np.ndarray, args: np.ndarray, step: float, axis: int):
    """In-place min_z v(z) + step * |i - j| along one axis, carrying argmins."""
    vals = np.moveaxis(values, axis, 0)
    arg = np.moveaxis(args, axis, 0)
    for i in range(1, vals.shape[0]):
        cand = vals[i - 1:i] + step
        better = cand < vals[i:i + 1]
        vals[i:i + 1][better] = cand[better]
        arg[i:i + 1][better] = arg[i - 1:i][better]
    for i in range(vals.shape[0] - 2, -1, -1):
        cand = vals[i + 1:i + 2] + step
        better = cand < vals[i:i + 1]
        vals[i:i + 1][better] = cand[better]
        arg[i:i + 1][better] = arg[i + 1:i + 2][better]


def _grid_axes(spec: ProblemSpec, y: np.ndarray, x_prev: np.ndarray, res: float):
    ls = y @ spec.ops.k_pinv.T
    pts = np.vstack([ls, x_prev.reshape(1, -1), np.zeros((1, spec.n))])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    margin = np.maximum(hi - lo, 1.0)
    axes = []
    for i in range(spec.n):
        k0 = math.floor((lo[i] - margin[i]) / res)
        k1 = math.ceil((hi[i] + margin[i]) / res)
        axes.append(res * np.arange(k0, k1 + 1))
    return axes


def _oracle_grid(spec: ProblemSpec, y: np.ndarray, x_prev: np.ndarray, res: float) -> np.ndarray:
    axes = _grid_axes(spec, y, x_prev, res)
    shape = tuple(len(a) for a in axes)
    states = int(np.prod(shape))
    if states > MAX_GRID_STATES:
        raise InstanceTooLargeError(
            f"grid oracle needs {states} states (limit {MAX_GRID_STATES}); raise grid_resolution"
        )
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.n)
    fitted = mesh @ spec.K.T
    T = y.shape[0]

    def stage(t):
        r = y[t] - fitted
        return 0.5 * np.einsum("ij,ij->i", r, r)

    value = stage(0) + spec.beta * np.abs(mesh - x_prev).sum(axis=1)
    back = []
    for t in range(1, T):
        v = value.reshape(shape).copy()
        arg = np.arange(states).reshape(shape)
        for axis in range(spec.n):
            _l1_transform(v, arg, spec.beta * res, axis)
        back.append(arg.reshape(-1))
        value = stage(t) + v.reshape(-1)

    path = [int(np.argmin(value))]
    for arg in reversed(back):
        path.append(int(arg[path[-1]]))
    return mesh[path[::-1]]


def _oracle_subgradient(spec: ProblemSpec, y: np.ndarray, x_prev: np.ndarray,
                        iterations: int) -> np.ndarray:
    gram = spec.K.T @ spec.K
    b = y @ spec.K
    step0 = 1.0 / float(np.linalg.eigvalsh(gram).max())
    x = y @ spec.ops.k_pinv.T
    best = x.copy()
    best_obj = window_objective(spec, y, x_prev, x)
    for k in range(iterations):
        sg = np.sign(np.diff(np.vstack([x_prev.reshape(1, -1), x]), axis=0))
        g = x @ gram - b + spec.beta * _d_transpose(sg)
        x = x - step0 / math.sqrt(k + 1.0) * g
        obj = window_objective(spec, y, x_prev, x)
        if obj < best_obj:
            best_obj = obj
            best = x.copy()
    return best


def brute_force_oracle(spec: ProblemSpec, y: ArrayLike, grid_resolution: float = 1e-3,
                       x_prev: Optional[ArrayLike] = None,
                       iterations: int = 10 ** 6) -> SolveResult:
    """Exhaustive grid search for n*T <= 6, long-run subgradient descent otherwise."""
    if not grid_resolution > 0:
        raise ValueError(f"grid_resolution must be > 0, got {grid_resolution}")
    p = WindowProblem(as_sequence(y, spec.m, "targets"),
                      spec.x0 if x_prev is None else x_prev, spec)
    if spec.n * p.window_len <= 6:
        actions = _oracle_grid(spec, p.targets, p.x_prev, grid_resolution)
        return _finish(p, actions, p.window_len, 0.0, 0.0, "grid")
    actions = _oracle_subgradient(spec, p.targets, p.x_prev, iterations)
    return _finish(p, actions, iterations, 0.0, 0.0, "subgradient")


def describe_failure(err: SocoError) -> str:
    """Error message, with the residuals of a non-converged solve appended."""
    cause = err.cause if isinstance(err, WindowSolveError) else err
    if isinstance(cause, ConvergenceError) and cause.residuals:
        parts = ", ".join(f"{k}={v:.3g}" for k, v in sorted(cause.residuals.items()))
        return f"{err.message} [{parts}]"
    return err.message
