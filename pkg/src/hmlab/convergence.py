"""Order-of-accuracy fits for grid-refinement studies."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MIN_SLOPE = 1.9
# residuals already this small at the coarsest spacing are at rounding level
BYPASS = 1e-11


def fit_slope(spacings, errors) -> float:
    """Least-squares slope of log(error) against log(spacing)."""
    s = np.asarray(spacings, dtype=float)
    e = np.asarray(errors, dtype=float)
    if s.size < 2 or s.size != e.size:
        raise ValueError("need at least two (spacing, error) pairs")
    if np.any(e <= 0):
        return float("nan")
    return float(np.polyfit(np.log(s), np.log(e), 1)[0])


@dataclass(frozen=True)
class RefinementResult:
    name: str
    spacings: tuple[float, ...]
    errors: tuple[float, ...]
    slope: float
    bypassed: bool
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "spacings": list(self.spacings),
            "errors": list(self.errors),
            "slope": self.slope,
            "bypassed": self.bypassed,
            "passed": self.passed,
        }


def refinement_order(
    name: str, spacings, errors, min_slope: float = MIN_SLOPE, bypass: float = BYPASS
) -> RefinementResult:
    """Pass iff the fitted slope is at least ``min_slope`` or the coarsest error is below ``bypass``."""
    order = np.argsort(spacings)[::-1]
    s = tuple(float(spacings[k]) for k in order)
    e = tuple(float(errors[k]) for k in order)
    bypassed = bool(e[0] < bypass)
    slope = fit_slope(s, e) if not bypassed else float("nan")
    passed = bypassed or bool(np.isfinite(slope) and slope >= min_slope)
    return RefinementResult(name, s, e, slope, bypassed, passed)


def parse_spacing(text: str) -> float:
    """'0.015625' or '1/64'."""
    return float(Fraction(text.strip()))


def check_halving(spacings, rtol: float = 1e-9) -> list[float]:
    """Sort descending and require each spacing to be half the previous one."""
    s = sorted((float(v) for v in spacings), reverse=True)
    if len(s) < 3:
        raise ValueError("refinement needs at least three spacings")
    for a, b in zip(s, s[1:]):
        if abs(a / b - 2.0) > rtol * 2.0:
            raise ValueError(f"spacings must halve: {a:g} -> {b:g}")
    return s


def nodes_for(length: float, s: float, rtol: float = 1e-9) -> int:
    """Node count n with (n - 1) s = length."""
    n = length / s
    k = round(n)
    if abs(n - k) > rtol * max(1.0, n):
        raise ValueError(f"length {length:g} is not a multiple of spacing {s:g}")
    return int(k) + 1
