"""
socopredict statistics
Descriptive statistics for Monte Carlo aggregation.

Sums use math.fsum over samples in index order, so a summary does not
depend on how the samples were partitioned across workers.

Usage:
    costs = [85.0, 92.0, 78.0, 95.0]
    mean(costs)             # 87.5
    standard_error(costs)   # sd / sqrt(n)
    summarize(costs)        # {n: 4, mean: 87.5, sd: ..., se: ..., min: 78.0, ...}
"""

from typing import Dict, Optional, Sequence
import math

ACCEPTANCE_SE = 3.0


def _numbers(xs: Sequence[float]) -> list:
    """Drop missing (None) entries."""
    return [float(x) for x in xs if x is not None]


# ---------------------------------------------------------------------------
# Descriptive Statistics
# ---------------------------------------------------------------------------

def mean(xs: Sequence[float]) -> Optional[float]:
    """mean(xs): arithmetic mean, None when empty."""
    nums = _numbers(xs)
    if not nums:
        return None
    return math.fsum(nums) / len(nums)


def variance(xs: Sequence[float]) -> Optional[float]:
    """variance(xs): sample variance (n-1 denominator)."""
    nums = _numbers(xs)
    if len(nums) < 2:
        return None
    m = math.fsum(nums) / len(nums)
    return math.fsum((x - m) ** 2 for x in nums) / (len(nums) - 1)


def sd(xs: Sequence[float]) -> Optional[float]:
    """sd(xs): sample standard deviation."""
    v = variance(xs)
    return None if v is None else math.sqrt(v)


def standard_error(xs: Sequence[float]) -> Optional[float]:
    """standard_error(xs): sd / sqrt(n); 0 for a single sample."""
    nums = _numbers(xs)
    if not nums:
        return None
    if len(nums) == 1:
        return 0.0
    return sd(nums) / math.sqrt(len(nums))


def binomial_se(p: float, n: int) -> float:
    """Standard error of an empirical frequency p over n trials."""
    if n < 1:
        raise ValueError("binomial_se expects n >= 1")
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def quantile(xs: Sequence[float], p: float) -> Optional[float]:
    """quantile(xs, p): p-th quantile with linear interpolation."""
    nums = sorted(_numbers(xs))
    if not nums:
        return None
    if p < 0 or p > 1:
        raise ValueError("Quantile p must be between 0 and 1")
    idx = p * (len(nums) - 1)
    lo = int(math.floor(idx))
    hi = int(math.ceil(idx))
    frac = idx - lo
    return nums[lo] * (1 - frac) + nums[hi] * frac


def summarize(xs: Sequence[float]) -> Dict[str, Optional[float]]:
    """count, mean, sd, se, min, median, max."""
    nums = _numbers(xs)
    if not nums:
        return {"n": 0, "mean": None, "sd": None, "se": None,
                "min": None, "median": None, "max": None}
    return {
        "n": len(nums),
        "mean": mean(nums),
        "sd": sd(nums),
        "se": standard_error(nums),
        "min": min(nums),
        "median": quantile(nums, 0.5),
        "max": max(nums),
    }


def exceedance(xs: Sequence[float], threshold: float) -> float:
    """Fraction of samples strictly above threshold."""
    nums = _numbers(xs)
    if not nums:
        raise ValueError("exceedance expects at least one sample")
    return sum(1 for x in nums if x > threshold) / len(nums)


# ---------------------------------------------------------------------------
# Acceptance
# ---------------------------------------------------------------------------

def within_standard_errors(value: float, target: float, se: float,
                           k: float = ACCEPTANCE_SE) -> bool:
    """|value - target| <= k * se."""
    return abs(value - target) <= k * se


def at_most(value: float, bound: float, se: float, k: float = ACCEPTANCE_SE) -> bool:
    """value <= bound + k * se."""
    return value <= bound + k * se


def at_least(value: float, bound: float, se: float, k: float = ACCEPTANCE_SE) -> bool:
    """value >= bound - k * se."""
    return value >= bound - k * se
