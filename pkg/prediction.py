"""
socopredict prediction-error model

Targets are a colored-noise deviation around the time-zero predictions:

    y_t = yhat_t + sum_{s=1}^{t} f(t - s) e(s)

and the prediction of y_t made at time tau keeps only the innovations
already observed:

    y_{t|tau} = yhat_t + sum_{s=1}^{tau} f(t - s) e(s)

Innovations are drawn from a counter-based generator (Philox keyed by the
seed, counter block keyed by t), so e(t) depends only on (seed, t).

Provides: impulse responses (explicit, i.i.d., Wiener, steady-state Kalman),
noise families, realization, prediction queries, the correlation metrics
||f_w||^2 and F(w), and a Monte Carlo oracle for them.
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Optional
import logging
import math

import numpy as np
import scipy.linalg as la
from scipy.stats import truncnorm

from .core import ArrayLike, DerivedOperators, as_sequence
from .errors import (
    ConvergenceError, DimensionError, InconsistentImpulseError, NoiseSpecError,
)

logger = logging.getLogger(__name__)

TAP_DECAY_TOL = 1e-12
MAX_TAPS = 10_000
MASK64 = (1 << 64) - 1

GAUSSIAN = "gaussian"
UNIFORM = "uniform-bounded"
TRUNCATED = "truncated-gaussian"
ZERO = "zero"
NOISE_FAMILIES = [GAUSSIAN, UNIFORM, TRUNCATED, ZERO]


# ---------------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------------

def splitmix64(x: int) -> int:
    """SplitMix64 finalizer (Steele, Lea, Flood constants)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix_seed(seed: int, index: int) -> int:
    """Derive the seed of sample `index` from an experiment seed."""
    return splitmix64((int(seed) & MASK64) ^ splitmix64(int(index) & MASK64))


def _stream(seed: int, t: int) -> np.random.Generator:
    # counter word 1 holds t; draws advance word 0, so streams never overlap
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64, counter=int(t) << 64))


# ---------------------------------------------------------------------------
# Impulse responses
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ImpulseResponse:
    """Taps f(0..L); f(0) = I and f(s) = 0 outside 0..L."""
    taps: np.ndarray  # (L + 1, m, m)

    @property
    def length(self) -> int:
        return self.taps.shape[0] - 1

    @property
    def m(self) -> int:
        return self.taps.shape[1]

    def tap(self, s: int) -> np.ndarray:
        if s < 0 or s > self.length:
            return np.zeros((self.m, self.m))
        return self.taps[s]

    def window(self, w: int) -> np.ndarray:
        """Taps f(0..w), zero-padded past L."""
        out = np.zeros((w + 1, self.m, self.m))
        k = min(w, self.length) + 1
        out[:k] = self.taps[:k]
        return out

    def scalar_taps(self, w: int) -> np.ndarray:
        if self.m != 1:
            raise DimensionError("scalar taps requested from a vector impulse response")
        return self.window(w)[:, 0, 0]

    def to_list(self) -> list:
        return self.taps.tolist()


def _coerce_taps(taps: ArrayLike, m: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(taps, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1, 1)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2] or arr.shape[0] == 0:
        raise InconsistentImpulseError(f"taps must have shape (L+1, m, m), got {arr.shape}")
    if m is not None and arr.shape[1] != m:
        raise DimensionError(f"taps are {arr.shape[1]}x{arr.shape[1]}, expected {m}x{m}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def impulse_from_taps(taps: ArrayLike) -> ImpulseResponse:
    """Explicit impulse response; f(0) must be the identity exactly."""
    arr = _coerce_taps(taps)
    if not np.array_equal(arr[0], np.eye(arr.shape[1])):
        raise InconsistentImpulseError("f(0) must be the identity matrix")
    return ImpulseResponse(_freeze(arr))


def iid_impulse(m: int = 1) -> ImpulseResponse:
    return ImpulseResponse(_freeze(np.eye(m).reshape(1, m, m)))


def _trim_decayed(arr: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(arr.reshape(arr.shape[0], -1), axis=1)
    keep = 1
    for s in range(1, arr.shape[0]):
        if norms[s] < TAP_DECAY_TOL:
            break
        keep = s + 1
    return arr[:keep]


def wiener_impulse(R_y: ArrayLike, R_e: ArrayLike, L: Optional[int] = None) -> ImpulseResponse:
    """Taps f(s) = R_y(s) R_e^-1 of a Wiener predictor's innovation model."""
    Ry = _coerce_taps(R_y)
    m = Ry.shape[1]
    Re = np.atleast_2d(np.asarray(R_e, dtype=float))
    if Re.shape != (m, m):
        raise DimensionError(f"R_e must be {m}x{m}, got {Re.shape}")
    try:
        np.linalg.cholesky(0.5 * (Ry[0] + Ry[0].T))
    except np.linalg.LinAlgError:
        raise InconsistentImpulseError("R_y(0) must be positive definite")

    taps = Ry @ np.linalg.inv(Re)
    if np.max(np.abs(taps[0] - np.eye(m))) > 1e-8:
        raise InconsistentImpulseError(
            "R_y(0) R_e^-1 is not the identity; the inputs are inconsistent with f(0) = I"
        )
    taps[0] = np.eye(m)

    if L is None:
        taps = _trim_decayed(taps)
    else:
        if L < 0:
            raise ValueError(f"L must be >= 0, got {L}")
        padded = np.zeros((L + 1, m, m))
        k = min(L + 1, taps.shape[0])
        padded[:k] = taps[:k]
        taps = padded
    return ImpulseResponse(_freeze(taps))


@dataclass(frozen=True, eq=False)
class KalmanSolution:
    P: np.ndarray
    gain: np.ndarray
    R_e: np.ndarray
    iterations: int


def solve_kalman_riccati(A, B, C, Q, R, S, tol: float = 1e-10,
                         max_iter: int = 100_000) -> KalmanSolution:
    """Steady-state predictor Riccati equation by fixed-point iteration.

        R_e = R + C P C*,  K_p = (A P C* + B S) R_e^-1
        P   = A P A* + B Q B* - K_p R_e K_p*
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    n, p = A.shape[0], C.shape[0]
    if A.shape != (n, n) or C.shape[1] != n or B.shape[0] != n:
        raise DimensionError("inconsistent state-space dimensions")
    if Q.shape != (B.shape[1], B.shape[1]) or R.shape != (p, p) or S.shape != (B.shape[1], p):
        raise DimensionError("inconsistent noise covariance dimensions")

    radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    if radius >= 1.0:
        raise ConvergenceError(f"A is not stable (spectral radius {radius:.4g}); "
                               "the Riccati recursion has no stationary fixed point")

    BQB = B @ Q @ B.T
    P = la.solve_discrete_lyapunov(A, BQB)
    diff = math.inf
    for it in range(1, max_iter + 1):
        Re = R + C @ P @ C.T
        try:
            gain = (A @ P @ C.T + B @ S) @ np.linalg.inv(Re)
        except np.linalg.LinAlgError:
            raise ConvergenceError("R + C P C* is singular; system is mis-specified", best=P)
        P_next = A @ P @ A.T + BQB - gain @ Re @ gain.T
        P_next = 0.5 * (P_next + P_next.T)
        diff = float(np.linalg.norm(P_next - P))
        P = P_next
        if not math.isfinite(diff):
            break
        if diff <= tol * max(1.0, float(np.linalg.norm(P))):
            Re = R + C @ P @ C.T
            try:
                np.linalg.cholesky(Re)
            except np.linalg.LinAlgError:
                raise ConvergenceError("innovation covariance R + C P C* is not positive definite",
                                       best=P)
            gain = (A @ P @ C.T + B @ S) @ np.linalg.inv(Re)
            logger.debug("Riccati converged in %d iterations", it)
            return KalmanSolution(P, gain, Re, it)

    raise ConvergenceError(f"Riccati iteration did not converge in {max_iter} iterations",
                           best=P, residuals={"step": diff})


def kalman_impulse(A, B, C, Q, R, S, L: Optional[int] = None, tol: float = 1e-10,
                   max_iter: int = 100_000):
    """Impulse response f(s) = C A^{s-1} K_p of a steady-state Kalman predictor.

    Returns (ImpulseResponse, R_e).
    """
    sol = solve_kalman_riccati(A, B, C, Q, R, S, tol=tol, max_iter=max_iter)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    p = C.shape[0]

    cap = MAX_TAPS if L is None else L
    taps = [np.eye(p)]
    power = np.eye(A.shape[0])
    for s in range(1, cap + 1):
        tap = C @ power @ sol.gain
        if L is None and np.linalg.norm(tap) < TAP_DECAY_TOL:
            break
        taps.append(tap)
        power = power @ A
    return ImpulseResponse(_freeze(np.array(taps))), sol.R_e


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Innovation distribution.

    For truncated-gaussian, `covariance` is the parent normal's covariance and
    `innovation_covariance` the covariance of the truncated draws.
    """
    family: str
    covariance: np.ndarray
    epsilon: Optional[float] = None

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        object.__setattr__(self, "covariance", _freeze(cov))
        m = cov.shape[0]
        if cov.shape != (m, m):
            raise NoiseSpecError(f"covariance must be square, got {cov.shape}")
        if self.family not in NOISE_FAMILIES:
            raise NoiseSpecError(f"unknown noise family '{self.family}'")

        if self.family == ZERO:
            object.__setattr__(self, "_chol", np.zeros((m, m)))
            object.__setattr__(self, "_innovation_cov", _freeze(np.zeros((m, m))))
            return

        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise NoiseSpecError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NoiseSpecError("covariance must be positive definite")
        object.__setattr__(self, "_chol", chol)

        if self.family == GAUSSIAN:
            object.__setattr__(self, "_innovation_cov", cov)
            return

        eps = self.epsilon
        if eps is None or not (eps > 0):
            raise NoiseSpecError(f"family '{self.family}' requires a positive epsilon")
        object.__setattr__(self, "epsilon", float(eps))
        if np.count_nonzero(cov - np.diag(np.diag(cov))):
            raise NoiseSpecError(f"family '{self.family}' requires a diagonal covariance")

        if self.family == UNIFORM:
            if not np.allclose(np.diag(cov), eps * eps / 3.0, rtol=1e-9, atol=0):
                raise NoiseSpecError(
                    f"uniform(-eps, eps) has variance eps^2/3 = {eps * eps / 3.0:.6g}; "
                    f"covariance diagonal is {np.diag(cov).tolist()}"
                )
            object.__setattr__(self, "_innovation_cov", cov)
        else:
            sd = np.sqrt(np.diag(cov))
            var = np.array([truncnorm(-eps / s, eps / s, scale=s).var() for s in sd])
            object.__setattr__(self, "_innovation_cov", _freeze(np.diag(var)))

    @property
    def m(self) -> int:
        return self.covariance.shape[0]

    @property
    def innovation_covariance(self) -> np.ndarray:
        return self._innovation_cov

    @property
    def sigma2(self) -> float:
        """Scalar innovation variance (m == 1)."""
        if self.m != 1:
            raise DimensionError("sigma2 is defined for scalar noise only")
        return float(self._innovation_cov[0, 0])

    @property
    def bounded(self) -> bool:
        return self.family in (UNIFORM, TRUNCATED)

    def draw(self, gen: np.random.Generator, count: int) -> np.ndarray:
        """(count, m) innovations from `gen`, plus the number of rejected draws."""
        return self._draw(gen, count)[0]

    def _draw(self, gen: np.random.Generator, count: int):
        m = self.m
        if self.family == ZERO:
            return np.zeros((count, m)), 0
        if self.family == GAUSSIAN:
            return gen.standard_normal((count, m)) @ self._chol.T, 0
        eps = self.epsilon
        if self.family == UNIFORM:
            out = gen.uniform(-eps, eps, (count, m))
            bad = np.abs(out) >= eps
            while bad.any():
                out[bad] = gen.uniform(-eps, eps, int(bad.sum()))
                bad = np.abs(out) >= eps
            return out, 0
        scale = np.sqrt(np.diag(self.covariance))
        out = gen.standard_normal((count, m)) * scale
        bad = np.abs(out) >= eps
        rejected = 0
        while bad.any():
            rejected += int(bad.sum())
            idx = np.nonzero(bad)
            out[idx] = gen.standard_normal(len(idx[0])) * scale[idx[1]]
            bad = np.abs(out) >= eps
        return out, rejected


def make_noise(family: str, covariance: ArrayLike, epsilon: Optional[float] = None) -> NoiseSpec:
    return NoiseSpec(family, np.asarray(covariance, dtype=float), epsilon)


# ---------------------------------------------------------------------------
# Realization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Realization:
    y_hat: np.ndarray        # (T, m) time-zero predictions
    innovations: np.ndarray  # (T, m) e(1..T)
    y: np.ndarray            # (T, m) realized targets
    seed: int
    acceptance_rate: float = 1.0

    @property
    def horizon(self) -> int:
        return self.y.shape[0]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "y_hat": self.y_hat.tolist(),
            "innovations": self.innovations.tolist(),
            "y": self.y.tolist(),
            "acceptance_rate": self.acceptance_rate,
        }


def sample_innovations(noise: NoiseSpec, seed: int, T: int):
    """e(1..T) with e(t) drawn from the stream keyed by (seed, t).

    Returns (innovations, acceptance_rate).
    """
    out = np.empty((T, noise.m))
    rejected = 0
    for t in range(1, T + 1):
        row, rej = noise._draw(_stream(seed, t), 1)
        out[t - 1] = row[0]
        rejected += rej
    total = T * noise.m
    rate = total / (total + rejected) if total else 1.0
    return out, rate


def convolve_innovations(f: ImpulseResponse, e: np.ndarray) -> np.ndarray:
    """Row t (0-based) is sum_{s <= t} f(t - s) e(s)."""
    T = e.shape[0]
    dev = np.zeros_like(e)
    for lag in range(min(f.length, T - 1) + 1):
        dev[lag:] += e[:T - lag] @ f.taps[lag].T
    return dev


def realize(f: ImpulseResponse, noise: NoiseSpec, y_hat: ArrayLike, seed: int,
            innovations: Optional[ArrayLike] = None) -> Realization:
    """Sample one world: innovations e(1..T) and targets y(1..T).

    `innovations` overrides sampling (used to inject a known sequence).
    """
    m = f.m
    if noise.m != m:
        raise DimensionError(f"noise is {noise.m}-dimensional, impulse response {m}-dimensional")
    y_hat = as_sequence(y_hat, m, "y_hat")
    T = y_hat.shape[0]
    if T < 1:
        raise DimensionError("y_hat must contain at least one prediction")

    rate = 1.0
    if innovations is None:
        e, rate = sample_innovations(noise, seed, T)
        if noise.family == TRUNCATED and rate < 0.5:
            logger.warning("truncated-gaussian acceptance rate %.3f", rate)
    else:
        e = as_sequence(innovations, m, "innovations")
        if e.shape[0] != T:
            raise DimensionError(f"innovations have length {e.shape[0]}, expected {T}")

    y = y_hat + convolve_innovations(f, e)
    return Realization(_freeze(y_hat), _freeze(e), _freeze(y), int(seed), rate)


# ---------------------------------------------------------------------------
# Predictions
# ---------------------------------------------------------------------------

def predict_window(r: Realization, f: ImpulseResponse, tau: int, t_end: int,
                   route: str = "forward") -> np.ndarray:
    """Predictions y_{t|tau} for t = tau+1 .. t_end (1-based), shape (t_end - tau, m).

    route="forward" adds observed innovations to yhat; route="backward"
    removes unobserved innovations from y.
    """
    T = r.horizon
    if not 0 <= tau < T:
        raise ValueError(f"tau must satisfy 0 <= tau < T={T}, got {tau}")
    t_end = min(t_end, T)
    if t_end <= tau:
        return np.zeros((0, f.m))
    e = r.innovations

    if route == "forward":
        out = np.array(r.y_hat[tau:t_end])
        # rows i (0-based t-1) in [tau, t_end), innovations j in [0, tau)
        for lag in range(1, f.length + 1):
            lo, hi = max(tau, lag), min(t_end - 1, tau - 1 + lag)
            if lo > hi:
                continue
            out[lo - tau:hi - tau + 1] += e[lo - lag:hi - lag + 1] @ f.taps[lag].T
        return out

    if route == "backward":
        out = np.array(r.y[tau:t_end])
        # innovations j in [tau, i]
        for lag in range(0, f.length + 1):
            lo = tau + lag
            if lo > t_end - 1:
                break
            out[lo - tau:] -= e[lo - lag:t_end - lag] @ f.taps[lag].T
        return out

    raise ValueError(f"route must be 'forward' or 'backward', got '{route}'")


def predict_at(r: Realization, f: ImpulseResponse, tau: int, route: str = "forward") -> np.ndarray:
    """{y_{t|tau} : t = tau+1..T} as a (T - tau, m) array."""
    return predict_window(r, f, tau, r.horizon, route)


# ---------------------------------------------------------------------------
# Correlation metrics
# ---------------------------------------------------------------------------

def _check_w(w: int) -> int:
    if int(w) < 0:
        raise ValueError(f"w must be >= 0, got {w}")
    return int(w)


def fw_norm_sq(f: ImpulseResponse, noise: NoiseSpec, w: int) -> float:
    """||f_w||^2 = tr(R_e sum_{s=0}^{w} f(s)^T f(s))."""
    taps = f.window(_check_w(w))
    gram = np.einsum("sji,sjk->ik", taps, taps)
    return float(np.trace(noise.innovation_covariance @ gram))


def fw_unweighted_sq(f: ImpulseResponse, w: int) -> float:
    """sum_{s=0}^{w} ||f(s)||_F^2 (no covariance weighting)."""
    taps = f.window(_check_w(w))
    return float(np.sum(taps * taps))


def big_F(f: ImpulseResponse, noise: NoiseSpec, ops: Optional[DerivedOperators], w: int) -> float:
    """F(w) = tr(R_e sum_{s=0}^{w} (w - s + 1) f(s)^T KK^dagger f(s)).

    ops=None uses the identity in place of KK^dagger.
    """
    w = _check_w(w)
    taps = f.window(w)
    P = np.eye(f.m) if ops is None else ops.proj_range
    weights = (w + 1 - np.arange(w + 1)).astype(float)
    gram = np.einsum("s,sji,jl,slk->ik", weights, taps, P, taps)
    return float(np.trace(noise.innovation_covariance @ gram))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    samples: int


def mc_error_covariance(f: ImpulseResponse, noise: NoiseSpec, w: int, samples: int, seed: int,
                        ops: Optional[DerivedOperators] = None) -> McEstimate:
    """Monte Carlo mean of ||delta y_w||^2, delta y_w = sum_{s=0}^{w} f(w - s) e(s).

    With ops, the squared norm is taken after projecting by KK^dagger.
    """
    w = _check_w(w)
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    gen = np.random.Generator(np.random.Philox(key=int(seed) & MASK64))
    taps = f.window(w)
    e = noise.draw(gen, samples * (w + 1)).reshape(samples, w + 1, f.m)
    # delta[i] = sum_s f(w - s) e_i(s)
    delta = np.einsum("sjk,isk->ij", taps[::-1], e)
    if ops is not None:
        delta = delta @ ops.proj_range.T
    vals = np.einsum("ij,ij->i", delta, delta)
    sd = float(np.std(vals, ddof=1)) if samples > 1 else 0.0
    return McEstimate(float(np.mean(vals)), sd / math.sqrt(samples), samples)
