"""Conformal metric densities rho(w)|dw| on planar domains.

Curvature follows K = -2 Δ(log rho) / rho**2 throughout.  Under this
normalisation the density 2/(1+|w|^2) has K = +2 and 2/(1-|w|^2) has K = -2.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .grid import RealField

Array = np.ndarray
ComplexFn = Callable[[Array], Array]

KINDS = ("euclidean", "spherical", "hyperbolic", "radial", "tabulated")


class DomainGuardError(ValueError):
    """A metric was evaluated outside the region where it is defined."""

    def __init__(self, metric_name: str, w, index=None):
        self.metric_name = metric_name
        self.w = complex(w)
        self.index = index
        where = f" at node {index}" if index is not None else ""
        super().__init__(
            f"domain_guard violated for metric {metric_name!r}: w = {self.w:.6g}{where}"
        )


class RadialSingularityError(ValueError):
    pass


@dataclass(frozen=True)
class RadialProfile:
    """rho(r) with its first two derivatives on the interval lo <= r < hi."""

    name: str
    rho: Callable[[Array], Array]
    drho: Callable[[Array], Array]
    ddrho: Callable[[Array], Array]
    lo: float = 0.0
    hi: float = np.inf

    def contains(self, r) -> Array:
        r = np.asarray(r, dtype=float)
        return np.isfinite(r) & (r >= self.lo) & (r < self.hi)

    def curvature(self, r) -> Array:
        """K = -2 (rho rho'' - rho'^2 + rho rho'/r) / rho^4, with the r -> 0 limit."""
        r = np.asarray(r, dtype=float)
        p, dp, ddp = self.rho(r), self.drho(r), self.ddrho(r)
        p, dp, ddp = np.broadcast_arrays(p, dp, ddp)
        at0 = r == 0
        if np.any(at0 & (dp != 0)):
            raise RadialSingularityError(f"radial singularity: rho'(0) != 0 for profile {self.name!r}")
        with np.errstate(divide="ignore", invalid="ignore"):
            dp_over_r = np.where(at0, ddp, dp / np.where(at0, 1.0, r))
        return -2.0 * (p * ddp - dp**2 + p * dp_over_r) / p**4

    def consistency(self, r, eps: float = 1e-4) -> float:
        """Max FD mismatch of drho and ddrho against rho (Richardson-extrapolated)."""
        r = np.asarray(r, dtype=float)

        def d(f, h):
            return (f(r + h) - f(r - h)) / (2 * h)

        def rich(f):
            return (4 * d(f, eps / 2) - d(f, eps)) / 3

        e1 = np.max(np.abs(rich(self.rho) - self.drho(r)))
        e2 = np.max(np.abs(rich(self.drho) - self.ddrho(r)))
        return float(max(e1, e2))


def _const(c):
    return lambda r: np.full(np.shape(r), c, dtype=float)


PROFILES: dict[str, RadialProfile] = {
    "euclidean": RadialProfile("euclidean", _const(1.0), _const(0.0), _const(0.0)),
    "spherical": RadialProfile(
        "spherical",
        lambda r: 2.0 / (1.0 + r**2),
        lambda r: -4.0 * r / (1.0 + r**2) ** 2,
        lambda r: (12.0 * r**2 - 4.0) / (1.0 + r**2) ** 3,
    ),
    "hyperbolic": RadialProfile(
        "hyperbolic",
        lambda r: 2.0 / (1.0 - r**2),
        lambda r: 4.0 * r / (1.0 - r**2) ** 2,
        lambda r: (4.0 + 12.0 * r**2) / (1.0 - r**2) ** 3,
        hi=1.0,
    ),
    # flat cylinder |dw|/|w|
    "cylinder": RadialProfile(
        "cylinder", lambda r: 1.0 / r, lambda r: -1.0 / r**2, lambda r: 2.0 / r**3, lo=0.1, hi=10.0
    ),
}


@dataclass(frozen=True)
class ConformalMetric:
    """A density rho(w) with exact (log rho^2)_w and curvature evaluators.

    ``scale`` multiplies rho; it leaves (log rho^2)_w untouched and divides the
    curvature by ``scale**2``.
    """

    kind: str
    name: str
    _rho: ComplexFn
    _log_rho2_w: ComplexFn
    _curvature: ComplexFn
    _guard: Callable[[Array], Array]
    profile: RadialProfile | None = None
    scale: float = 1.0
    box: tuple[float, float, float, float] | None = None

    def domain_guard(self, w) -> Array:
        w = np.asarray(w, dtype=complex)
        return np.isfinite(w) & self._guard(w)

    def check(self, w, mask: Array | None = None) -> None:
        """Raise :class:`DomainGuardError` naming the first offending point."""
        w = np.asarray(w, dtype=complex)
        bad = ~self.domain_guard(w)
        if mask is not None:
            bad &= mask
        if np.any(bad):
            idx = tuple(int(k) for k in np.argwhere(bad)[0]) if w.ndim else None
            raise DomainGuardError(self.name, w[idx] if idx is not None else w, idx)

    def rho(self, w) -> Array:
        self.check(w)
        return self.scale * self._rho(np.asarray(w, dtype=complex))

    def log_rho2_w(self, w) -> Array:
        self.check(w)
        return self._log_rho2_w(np.asarray(w, dtype=complex))

    def curvature(self, w) -> Array:
        self.check(w)
        return self._curvature(np.asarray(w, dtype=complex)) / self.scale**2

    def scaled(self, c: float) -> "ConformalMetric":
        if not c > 0:
            raise ValueError("scale factor must be positive")
        return replace(self, scale=self.scale * c, name=f"{self.name}*{c:g}")


def _abs2(w):
    return w.real * w.real + w.imag * w.imag


def _everywhere(w):
    return np.ones(np.shape(w), dtype=bool)


def builtin_metric(kind: str) -> ConformalMetric:
    if kind == "euclidean":
        return ConformalMetric(
            "euclidean",
            "euclidean",
            lambda w: np.ones(np.shape(w)),
            lambda w: np.zeros(np.shape(w), dtype=complex),
            lambda w: np.zeros(np.shape(w)),
            _everywhere,
            profile=PROFILES["euclidean"],
        )
    if kind == "spherical":
        return ConformalMetric(
            "spherical",
            "spherical",
            lambda w: 2.0 / (1.0 + _abs2(w)),
            lambda w: -2.0 * np.conj(w) / (1.0 + _abs2(w)),
            lambda w: np.full(np.shape(w), 2.0),
            _everywhere,
            profile=PROFILES["spherical"],
        )
    if kind == "hyperbolic":
        return ConformalMetric(
            "hyperbolic",
            "hyperbolic",
            lambda w: 2.0 / (1.0 - _abs2(w)),
            lambda w: 2.0 * np.conj(w) / (1.0 - _abs2(w)),
            lambda w: np.full(np.shape(w), -2.0),
            lambda w: np.abs(w) < 1.0,
            profile=PROFILES["hyperbolic"],
        )
    raise ValueError(f"unknown builtin metric {kind!r}; expected euclidean, spherical or hyperbolic")


def radial_metric(profile: RadialProfile) -> ConformalMetric:
    """Rotationally symmetric metric rho(|w|) with curvature from the radial formula."""

    def log_rho2_w(w):
        r = np.abs(w)
        dp = profile.drho(r)
        at0 = r == 0
        if np.any(at0 & (dp != 0)):
            raise RadialSingularityError(f"radial singularity at w = 0 for profile {profile.name!r}")
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (dp / profile.rho(r)) * np.conj(w) / np.where(at0, 1.0, r)
        return np.where(at0, 0.0, out)

    return ConformalMetric(
        "radial",
        f"radial:{profile.name}",
        lambda w: profile.rho(np.abs(w)),
        log_rho2_w,
        lambda w: profile.curvature(np.abs(w)),
        lambda w: profile.contains(np.abs(w)),
        profile=profile,
    )


def tabulated_metric(samples: RealField, name: str = "tabulated") -> ConformalMetric:
    """Metric interpolated from grid samples of rho by a bicubic spline of log rho.

    Derivatives come from the spline, so accuracy is limited by the sampling
    density rather than by closed forms.
    """
    g = samples.grid
    if not samples.mask.all():
        raise ValueError("tabulated metric needs rho at every grid node")
    if np.any(samples.values <= 0):
        raise ValueError("tabulated rho must be positive")
    spl = RectBivariateSpline(g.x, g.y, np.log(samples.values), kx=3, ky=3)
    x1, y1 = g.x[-1], g.y[-1]

    def ev(w, dx=0, dy=0):
        return spl.ev(w.real, w.imag, dx=dx, dy=dy)

    def guard(w):
        return (w.real >= g.x0) & (w.real <= x1) & (w.imag >= g.y0) & (w.imag <= y1)

    return ConformalMetric(
        "tabulated",
        name,
        lambda w: np.exp(ev(w)),
        lambda w: ev(w, 1, 0) - 1j * ev(w, 0, 1),
        lambda w: -2.0 * (ev(w, 2, 0) + ev(w, 0, 2)) / np.exp(2 * ev(w)),
        guard,
        box=(g.x0, x1, g.y0, y1),
    )


def _fd_step(m: ConformalMetric, w: complex, eps: float) -> float:
    """Largest step <= eps keeping the +-eps cross stencil inside the guard."""
    while eps > 1e-8:
        pts = w + eps * np.array([1, -1, 1j, -1j])
        if np.all(m.domain_guard(pts)):
            return eps
        eps /= 2
    raise DomainGuardError(m.name, w)


def fd_log_rho_derivatives(m: ConformalMetric, w: complex, eps: float) -> tuple[complex, float]:
    """Richardson-extrapolated ((log rho^2)_w, Δ log rho) at one point."""

    def L(p):
        return float(np.log(m.rho(p)))

    def at(h):
        lx = (L(w + h) - L(w - h)) / (2 * h)
        ly = (L(w + 1j * h) - L(w - 1j * h)) / (2 * h)
        lap = (L(w + h) + L(w - h) + L(w + 1j * h) + L(w - 1j * h) - 4 * L(w)) / (h * h)
        return lx - 1j * ly, lap

    d1, l1 = at(eps)
    d2, l2 = at(eps / 2)
    # (log rho^2)_w = 2 * (l_x - i l_y)/2
    return (4 * d2 - d1) / 3, (4 * l2 - l1) / 3


def verify_metric_consistency(m: ConformalMetric, samples, eps: float = 1e-3) -> float:
    """Max deviation of the closed-form (log rho^2)_w and K from finite differences.

    K_fd = -2 Δ(log rho)/rho^2 with Richardson-extrapolated central differences.
    Samples must lie inside the metric's domain guard.
    """
    worst = 0.0
    for w in np.atleast_1d(np.asarray(samples, dtype=complex)):
        m.check(w)
        step = eps
        if m.profile is not None and m.profile.lo > 0:
            # profile singular at the origin: stencil scales with |w|
            step *= abs(w)
        h = _fd_step(m, complex(w), step)
        d_fd, lap_fd = fd_log_rho_derivatives(m, complex(w), h)
        k_fd = -2.0 * lap_fd / float(m.rho(w)) ** 2
        worst = max(worst, abs(complex(m.log_rho2_w(w)) - d_fd), abs(float(m.curvature(w)) - k_fd))
    return worst


def default_samples(m: ConformalMetric, n: int = 100, seed: int = 0) -> np.ndarray:
    """Deterministic in-domain sample points used by metric-check."""
    rng = np.random.default_rng(seed)
    if m.box is not None:
        x0, x1, y0, y1 = m.box
        dx, dy = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
        return rng.uniform(x0 + dx, x1 - dx, n) + 1j * rng.uniform(y0 + dy, y1 - dy, n)
    lo, hi = (m.profile.lo, m.profile.hi) if m.profile is not None else (0.0, np.inf)
    hi = 2.0 if not np.isfinite(hi) else lo + 0.9 * (hi - lo)
    lo = lo + 0.01 * (hi - lo) if lo > 0 else 0.0
    r = np.sqrt(rng.uniform(lo**2, hi**2, n))
    return r * np.exp(2j * np.pi * rng.uniform(size=n))
