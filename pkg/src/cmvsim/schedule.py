"""Optimal parameter coupling and the convergence-rate bound evaluator.

The theory's error bound for k marginals of an n-particle run is

    C sqrt(k) * ( exp(C / (h^d eps^2)) / (sqrt(n h^d) eps) + h + eps^(r/2) )

for any r < 1, with an unknown constant C.  Choosing

    eps = h^(2/r) sqrt(C),   h = (log(n) / 4)^(-r / (d r + 4))

collapses it to C sqrt(k) / (log n)^(r / (d r + 4)).  The constant is a
required user input (default 1) and every report prints the value used; it
appears both inside the exponential and as the prefactor, treated as a
single knob.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

__all__ = ["SchedulePoint", "schedule", "rate_bound", "optimize_rate", "rate_exponent"]


@dataclass(frozen=True)
class SchedulePoint:
    n: int
    d: int
    r: float
    C: float
    h: float
    epsilon: float
    k: int = 1

    @property
    def log_rate(self):
        """The headline decay (log n)^(-r/(d r + 4)) times sqrt(k)."""
        return math.sqrt(self.k) * math.log(self.n) ** (-self.r / (self.d * self.r + 4.0))


def rate_exponent(d, r):
    return r / (d * r + 4.0)


def _validate(r, C):
    if not 0.0 < r < 1.0:
        raise InvalidParameterError(f"r must lie in (0, 1), got {r}")
    if not C > 0:
        raise InvalidParameterError(f"C must be positive, got {C}")


def schedule(n, d, r, C, k=1):
    """Derive (h, epsilon) from the particle count via the printed coupling."""
    _validate(r, C)
    if n <= 1:
        raise InvalidParameterError(f"n must exceed 1 so log n > 0, got {n}")
    if d < 1:
        raise InvalidParameterError("d must be a positive integer")
    h = (0.25 * math.log(n)) ** (-r / (d * r + 4.0))
    eps = h ** (2.0 / r) * math.sqrt(C)
    return SchedulePoint(n=n, d=d, r=r, C=C, h=h, epsilon=eps, k=k)


def rate_bound(h, epsilon, n, d, k, r, C):
    """Evaluate the error bound; overflow in the exponential returns +inf."""
    _validate(r, C)
    if h <= 0 or epsilon <= 0 or n < 1 or k < 1:
        raise InvalidParameterError("h, epsilon must be positive and n, k >= 1")
    hd = h**d
    arg = C / (hd * epsilon * epsilon)
    if arg > 700.0:
        return math.inf
    first = math.exp(arg) / (math.sqrt(n * hd) * epsilon)
    return C * math.sqrt(k) * (first + h + epsilon ** (r / 2.0))


def optimize_rate(n, d, k, r, C, h_grid, eps_grid):
    """Exhaustive grid minimization of :func:`rate_bound`.

    The expression has an exponential cliff in (h, eps), so grid search is
    the trivially correct optimizer.  Returns (h*, eps*, value, interior)
    where ``interior`` is False when the argmin sits on the grid boundary.
    """
    h_grid = np.asarray(h_grid, dtype=np.float64)
    eps_grid = np.asarray(eps_grid, dtype=np.float64)
    if h_grid.size == 0 or eps_grid.size == 0:
        raise InvalidParameterError("grids must be nonempty")
    best = (math.inf, None, None)
    for i, h in enumerate(h_grid):
        for j, eps in enumerate(eps_grid):
            v = rate_bound(h, eps, n, d, k, r, C)
            if v < best[0]:
                best = (v, i, j)
    value, i, j = best
    if i is None:
        return float(h_grid[0]), float(eps_grid[0]), math.inf, False
    interior = 0 < i < h_grid.size - 1 and 0 < j < eps_grid.size - 1
    return float(h_grid[i]), float(eps_grid[j]), value, interior
