"""
socopredict errors

One base exception, SocoError, and a small family of specific errors.
Configuration errors carry a dotted field path and, for unknown names,
a "Did you mean?" suggestion (Levenshtein distance).
"""

from typing import Any, Dict, List, Optional


# ---------------------------------------------------------------------------
# Edit distance (Levenshtein)
# ---------------------------------------------------------------------------

def _edit_distance(a: str, b: str) -> int:
    """Compute Levenshtein edit distance between two strings."""
    if len(a) < len(b):
        return _edit_distance(b, a)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a):
        curr = [i + 1]
        for j, cb in enumerate(b):
            cost = 0 if ca == cb else 1
            curr.append(min(curr[j] + 1, prev[j + 1] + 1, prev[j] + cost))
        prev = curr
    return prev[-1]


def find_closest(name: str, candidates: List[str], max_distance: int = 2) -> Optional[str]:
    """Find the closest match to `name` from a list of candidates."""
    if not candidates:
        return None
    best = None
    best_dist = max_distance + 1
    for c in candidates:
        d = _edit_distance(name.lower(), c.lower())
        if d < best_dist:
            best_dist = d
            best = c
    return best if best_dist <= max_distance else None


def unknown_name_hint(what: str, name: str, candidates: List[str]) -> str:
    """Build an error message for an unknown kind/family/algorithm name."""
    msg = f"Unknown {what} '{name}'"
    suggestion = find_closest(name, candidates)
    if suggestion:
        msg += f". Did you mean '{suggestion}'?"
    else:
        msg += f". Expected one of: {', '.join(candidates)}"
    return msg


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class SocoError(Exception):
    def __init__(self, message: str):
        self.message = message
        super().__init__(message)


class DimensionError(SocoError):
    pass


class SingularGramError(SocoError):
    pass


class ConvergenceError(SocoError):
    """An iterative method hit its iteration cap.

    `best` is the best iterate seen, `residuals` the residuals at that iterate.
    """

    def __init__(self, message: str, best: Any = None, residuals: Optional[Dict[str, float]] = None):
        self.best = best
        self.residuals = residuals or {}
        super().__init__(message)


class WindowSolveError(SocoError):
    def __init__(self, window_start: int, cause: SocoError):
        self.window_start = window_start
        self.cause = cause
        super().__init__(f"Window starting at t={window_start}: {cause.message}")


class InconsistentImpulseError(SocoError):
    pass


class NoiseSpecError(SocoError):
    pass


class RealizationMismatchError(SocoError):
    pass


class InstanceTooLargeError(SocoError):
    pass


class UnboundedNoiseError(SocoError):
    pass


class AcceptanceError(SocoError):
    def __init__(self, failures: List[str]):
        self.failures = failures
        super().__init__("Acceptance checks failed: " + "; ".join(failures))


class ConfigError(SocoError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
