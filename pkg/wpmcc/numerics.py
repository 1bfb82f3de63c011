"""
Numerical Helpers
=================

Special functions and root finders shared by the policy solvers.

    - lambert_w0: principal branch of the Lambert W function
    - bisect_monotone: bisection for monotone scalar functions
    - expand_upper_bracket: grow a bracket until the function changes sign

Usage:
    from wpmcc.numerics import lambert_w0, bisect_monotone, expand_upper_bracket

    lambert_w0(1.0)                                     # 0.5671432904097838
    bracket = expand_upper_bracket(lambda x: x - 5.0, 0.0)
    bisect_monotone(lambda x: x - 5.0, bracket)          # 5.0
"""

from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass
from typing import Callable, Literal

logger = logging.getLogger(__name__)

__all__ = [
    "DomainError",
    "BracketError",
    "ConvergenceError",
    "RootBracket",
    "lambert_w0",
    "bisect_monotone",
    "expand_upper_bracket",
]

INV_E = math.exp(-1.0)
BRANCH_SLACK = 1e-12
SERIES_WINDOW = 1e-6
HALLEY_TOL = 4.0 * sys.float_info.epsilon

DEFAULT_TOL_ABS = 1e-12
DEFAULT_TOL_REL = 1e-10
DEFAULT_MAX_ITER = 200
BRACKET_CEILING = 1e30


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class BracketError(ValueError):
    """The bracket does not contain a sign change."""


class ConvergenceError(RuntimeError):
    """An iteration ran out of steps before meeting its tolerance."""


# ---------------------------------------------------------------------------
# Lambert W
# ---------------------------------------------------------------------------

def lambert_w0(x: float) -> float:
    """
    Principal branch W0 of the Lambert W function, w * exp(w) = x.

    Seeds Halley's iteration with the branch-point series near -1/e and with
    log(x) - log(log(x)) for large x.

    Args:
        x: Real argument, x >= -1/e. Values within 1e-12 below -1/e are
           clamped to the branch point.

    Returns:
        w >= -1 with |w e^w - x| <= 1e-12 * max(1, |x|).

    Raises:
        DomainError: If x < -1/e - 1e-12 or x is not finite.

    Examples:
        >>> lambert_w0(0.0)
        0.0
        >>> round(lambert_w0(math.e), 12)
        1.0
    """
    if math.isnan(x) or math.isinf(x):
        raise DomainError(f"lambert_w0 needs a finite argument, got {x}")
    if x < -INV_E - BRANCH_SLACK:
        raise DomainError(f"lambert_w0 is real only for x >= -1/e, got {x!r}")
    if x <= -INV_E + BRANCH_SLACK:
        return -1.0
    if x == 0.0:
        return 0.0

    if x + INV_E < SERIES_WINDOW:
        # Halley stalls where w + 1 -> 0; the series is exact to O(p^7) here
        return max(_branch_series(x), -1.0)
    if x < -0.25:
        w = _branch_series(x)
    elif x < 3.0:
        w = math.log1p(x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)

    best_w, best_res = w, math.inf
    for _ in range(DEFAULT_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) >= best_res:
            break
        best_w, best_res = w, abs(f)
        wp1 = w + 1.0
        if wp1 <= 0.0:
            break
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= HALLEY_TOL * (1.0 + abs(w)):
            best_w = w
            break
    else:
        logger.debug("lambert_w0 hit the iteration cap at x=%r, residual %.3g", x, best_res)

    return max(best_w, -1.0)


def _branch_series(x: float) -> float:
    """W0 expanded in p = sqrt(2(ex + 1)) around the branch point."""
    p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * (769.0 / 17280.0 + p * (-221.0 / 8505.0))))))


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RootBracket:
    """Search interval and stopping rule for bisect_monotone."""

    lo: float
    hi: float
    tol_abs: float = DEFAULT_TOL_ABS
    tol_rel: float = DEFAULT_TOL_REL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"RootBracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.tol_abs <= 0 or self.tol_rel <= 0:
            raise ValueError("RootBracket tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError(f"RootBracket max_iter must be >= 1, got {self.max_iter}")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _straddles(f_lo: float, f_hi: float, direction: str) -> bool:
    if direction == "increasing":
        return f_lo <= 0.0 <= f_hi
    return f_lo >= 0.0 >= f_hi


def bisect_monotone(
    f: Callable[[float], float],
    bracket: RootBracket,
    direction: Literal["increasing", "decreasing"] = "increasing",
) -> float:
    """
    Find the root of a monotone function by bisection.

    Args:
        f:         Scalar evaluator, monotone on the bracket.
        bracket:   Interval plus tolerances.
        direction: "increasing" if f(lo) <= 0 <= f(hi), "decreasing" otherwise.

    Returns:
        x with |f(x)| <= tol_abs, or the midpoint once the bracket width is
        below tol_abs + tol_rel * |x|.

    Raises:
        BracketError:     If f does not change sign over the bracket.
        ConvergenceError: If max_iter halvings are not enough.
    """
    if direction not in ("increasing", "decreasing"):
        raise ValueError(f"Invalid direction '{direction}'")

    lo, hi = bracket.lo, bracket.hi
    f_lo, f_hi = f(lo), f(hi)
    if not _straddles(f_lo, f_hi, direction):
        raise BracketError(
            f"No sign change on [{lo:.6g}, {hi:.6g}]: f(lo)={f_lo:.6g}, f(hi)={f_hi:.6g} ({direction})"
        )
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi

    sign = 1.0 if direction == "increasing" else -1.0
    for _ in range(bracket.max_iter):
        mid = lo + 0.5 * (hi - lo)
        f_mid = f(mid)
        if abs(f_mid) <= bracket.tol_abs:
            return mid
        if sign * f_mid < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= bracket.tol_abs + bracket.tol_rel * abs(mid):
            return lo + 0.5 * (hi - lo)

    raise ConvergenceError(
        f"bisect_monotone did not converge in {bracket.max_iter} steps; last bracket [{lo:.6g}, {hi:.6g}]"
    )


def expand_upper_bracket(f: Callable[[float], float], lo: float, **tolerances) -> RootBracket:
    """
    Double the upper end of a bracket, starting at lo + 1, until f changes sign.

    Args:
        f:           Scalar evaluator, monotone past lo.
        lo:          Fixed lower end.
        **tolerances: tol_abs / tol_rel / max_iter for the returned bracket.

    Returns:
        A RootBracket [lo, hi] with f(lo) and f(hi) of opposite sign (or f(hi) == 0).

    Raises:
        BracketError: If no sign change appears before hi exceeds 1e30, which
                      callers treat as "no root in reachable range".
    """
    f_lo = f(lo)
    step = 1.0
    hi = lo + step
    while True:
        f_hi = f(hi)
        if f_hi == 0.0 or (f_lo < 0.0) != (f_hi < 0.0) or f_lo == 0.0:
            logger.debug("Bracket [%g, %g] found: f(lo)=%g f(hi)=%g", lo, hi, f_lo, f_hi)
            return RootBracket(lo=lo, hi=hi, **tolerances)
        step *= 2.0
        hi = lo + step
        if hi > BRACKET_CEILING:
            raise BracketError(f"No sign change of f in [{lo:.6g}, {BRACKET_CEILING:.0e}]")
