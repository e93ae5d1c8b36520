"""
socopredict core
Problem definition, cost evaluation, and the linear algebra every other
module consumes.

The tracking problem over a horizon T:

    cost(x) = sum_t 1/2 ||y_t - K x_t||^2 + beta ||x_t - x_{t-1}||_1,   x_0 = 0

Usage:
    spec = build_spec([[1.0]], beta=0.5, horizon=4)
    cost = eval_cost(spec, [1, 0, 1, 0], [0.375] * 4)
    cost.total   # 0.71875
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Dict, Sequence, Union
import math

import numpy as np

from .errors import DimensionError, SingularGramError

GRAM_CONDITION_LIMIT = 1e12
PINV_RCOND = 1e-12

ArrayLike = Union[np.ndarray, Sequence, float]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DerivedOperators:
    """Pseudoinverse-derived matrices of K, computed once per spec."""
    k_pinv: np.ndarray      # n x m, K^dagger
    proj_range: np.ndarray  # m x m, KK^dagger
    gram_inv: np.ndarray    # n x n, (K^T K)^-1
    kt_pinv: np.ndarray     # m x n, (K^T)^dagger


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    K: np.ndarray
    beta: float
    horizon: int
    ops: DerivedOperators

    @property
    def m(self) -> int:
        return self.K.shape[0]

    @property
    def n(self) -> int:
        return self.K.shape[1]

    @property
    def x0(self) -> np.ndarray:
        return np.zeros(self.n)

    def with_beta(self, beta: float, horizon: int = 0) -> ProblemSpec:
        """Same tracking map, different switching weight (and optionally horizon)."""
        return ProblemSpec(self.K, float(beta), horizon or self.horizon, self.ops)


@dataclass(frozen=True, eq=False)
class Trajectory:
    actions: np.ndarray  # T x n

    def __len__(self) -> int:
        return self.actions.shape[0]


@dataclass(frozen=True)
class CostBreakdown:
    tracking: float
    switching: float

    @property
    def total(self) -> float:
        return self.tracking + self.switching

    def to_dict(self) -> dict:
        return {"tracking": self.tracking, "switching": self.switching, "total": self.total}


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def as_matrix(K: ArrayLike) -> np.ndarray:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.ndim != 2 or K.size == 0:
        raise DimensionError("K must be a nonempty matrix")
    return K


def build_spec(K: ArrayLike, beta: float, horizon: int) -> ProblemSpec:
    """Validate the tracking instance and compute its derived operators."""
    K = as_matrix(K)
    beta = float(beta)
    if not math.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be a finite nonnegative number, got {beta}")
    if int(horizon) < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")

    gram = K.T @ K
    cond = np.linalg.cond(gram)
    if not math.isfinite(cond) or cond > GRAM_CONDITION_LIMIT:
        raise SingularGramError(
            f"K^T K is singular or ill-conditioned (condition number {cond:.3g})"
        )

    k_pinv = np.linalg.pinv(K, rcond=PINV_RCOND)
    ops = DerivedOperators(
        k_pinv=_frozen(k_pinv),
        proj_range=_frozen(K @ k_pinv),
        gram_inv=_frozen(np.linalg.inv(gram)),
        kt_pinv=_frozen(np.linalg.pinv(K.T, rcond=PINV_RCOND)),
    )
    return ProblemSpec(_frozen(K), beta, int(horizon), ops)


def identity_residuals(spec: ProblemSpec) -> Dict[str, float]:
    """Relative Frobenius residuals of the pseudoinverse/projector identities."""
    K, ops = spec.K, spec.ops
    P, Kp = ops.proj_range, ops.k_pinv
    fro = np.linalg.norm

    def rel(a, b):
        return float(fro(a - b) / max(fro(b), 1e-300))

    return {
        "idempotent": rel(P @ P, P),
        "symmetric": rel(P.T, P),
        "pinv_pinv": rel(Kp @ K @ Kp, Kp),
        "k_pinv_k": rel(K @ Kp @ K, K),
    }


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------

def as_sequence(values: ArrayLike, dim: int, name: str = "sequence") -> np.ndarray:
    """Coerce a sequence of `dim`-vectors to a (T, dim) float array.

    A flat sequence is accepted for dim == 1.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1 and dim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionError(f"{name} must have shape (T, {dim}), got {arr.shape}")
    return arr


def as_vector(v: ArrayLike, dim: int, name: str = "vector") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float)).reshape(-1)
    if arr.shape[0] != dim:
        raise DimensionError(f"{name} must have dimension {dim}, got {arr.shape[0]}")
    return arr


def actions_of(x) -> np.ndarray:
    return x.actions if isinstance(x, Trajectory) else x


# ---------------------------------------------------------------------------
# Cost
# ---------------------------------------------------------------------------

def switching_increments(actions: np.ndarray, x_prev: np.ndarray) -> np.ndarray:
    """Per-step one-norm of x_t - x_{t-1}, starting from x_prev."""
    full = np.vstack([x_prev.reshape(1, -1), actions])
    return np.abs(np.diff(full, axis=0)).sum(axis=1)


def eval_cost(spec: ProblemSpec, y: ArrayLike, x) -> CostBreakdown:
    """Tracking and switching cost of trajectory x against targets y."""
    y = as_sequence(y, spec.m, "targets")
    x = as_sequence(actions_of(x), spec.n, "actions")
    if y.shape[0] != x.shape[0]:
        raise DimensionError(f"targets have length {y.shape[0]}, actions {x.shape[0]}")

    resid = y - x @ spec.K.T
    tracking = math.fsum(0.5 * np.einsum("ij,ij->i", resid, resid))
    switching = spec.beta * math.fsum(switching_increments(x, spec.x0))
    return CostBreakdown(tracking, switching)


def proj_seminorm_sq(ops: DerivedOperators, v: ArrayLike) -> float:
    """v^T (KK^dagger) v, evaluated as ||KK^dagger v||^2."""
    m = ops.proj_range.shape[0]
    v = as_vector(v, m, "v")
    pv = ops.proj_range @ v
    return float(pv @ pv)


def proj_seminorm_sq_rows(ops: DerivedOperators, rows: np.ndarray) -> np.ndarray:
    """proj_seminorm_sq applied to every row of a (T, m) array."""
    pv = rows @ ops.proj_range.T
    return np.einsum("ij,ij->i", pv, pv)


def induced_one_norm(M: np.ndarray) -> float:
    """Induced 1-norm: maximum absolute column sum."""
    return float(np.linalg.norm(np.atleast_2d(M), 1))
