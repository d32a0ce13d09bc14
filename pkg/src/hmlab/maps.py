"""Closed-form polynomial test maps with exact Wirtinger derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

from .grid import ComplexField, Grid

Fn = Callable[[np.ndarray], np.ndarray]

FAMILIES = ("holomorphic_poly", "euclidean_harmonic", "custom")
DERIVATIVES = ("hz", "hzb", "hzz", "hzzb", "hzbzb")


@dataclass(frozen=True)
class AnalyticMap:
    """h and its Wirtinger derivatives h_z, h_zbar, h_zz, h_zzbar, h_zbarzbar."""

    h: Fn
    hz: Fn
    hzb: Fn
    hzz: Fn
    hzzb: Fn
    hzbzb: Fn
    family: str = "custom"
    label: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown map family {self.family!r}")

    def __call__(self, z):
        return self.h(np.asarray(z, dtype=complex))

    def derivative(self, name: str, z) -> np.ndarray:
        return getattr(self, name)(np.asarray(z, dtype=complex))


def _coeffs(c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=complex))
    if c.size == 0:
        raise ValueError("coefficient list must be nonempty")
    return c


def _poly(c: np.ndarray) -> tuple[Fn, Fn, Fn]:
    d1, d2 = P.polyder(c, 1), P.polyder(c, 2)
    return (
        lambda z: P.polyval(z, c) + 0j * z,
        lambda z: P.polyval(z, d1) + 0j * z,
        lambda z: P.polyval(z, d2) + 0j * z,
    )


def _zero(z):
    return np.zeros(np.shape(z), dtype=complex)


def euclidean_harmonic(g_coeffs, k_coeffs) -> AnalyticMap:
    """h = g(z) + conj(k(z)) for polynomials g, k (coefficients in ascending order)."""
    g, k = _coeffs(g_coeffs), _coeffs(k_coeffs)
    G, G1, G2 = _poly(g)
    K, K1, K2 = _poly(k)
    label = f"ehpoly:g={_fmt(g)};k={_fmt(k)}"
    if not np.any(k[1:]):
        # conj(k) is constant, so h is holomorphic
        return AnalyticMap(
            lambda z: G(z) + np.conj(K(z)), G1, _zero, G2, _zero, _zero, "holomorphic_poly", label
        )
    return AnalyticMap(
        lambda z: G(z) + np.conj(K(z)),
        G1,
        lambda z: np.conj(K1(z)),
        G2,
        _zero,
        lambda z: np.conj(K2(z)),
        "euclidean_harmonic",
        label,
    )


def holomorphic_map(coeffs) -> AnalyticMap:
    c = _coeffs(coeffs)
    H, H1, H2 = _poly(c)
    return AnalyticMap(H, H1, _zero, H2, _zero, _zero, "holomorphic_poly", f"holo:{_fmt(c)}")


def affine_map(c: complex) -> AnalyticMap:
    """z + c*conj(z)."""
    m = euclidean_harmonic([0, 1], [0, np.conj(c)])
    return AnalyticMap(m.h, m.hz, m.hzb, m.hzz, m.hzzb, m.hzbzb, m.family, f"affine:c={c.real:g},{c.imag:g}")


def precompose_holomorphic(m: AnalyticMap, phi_coeffs) -> AnalyticMap:
    """h o phi for a polynomial phi, differentiated by the chain rule."""
    F, F1, F2 = _poly(_coeffs(phi_coeffs))

    def hz(z):
        return m.hz(F(z)) * F1(z)

    def hzb(z):
        return m.hzb(F(z)) * np.conj(F1(z))

    def hzz(z):
        return m.hzz(F(z)) * F1(z) ** 2 + m.hz(F(z)) * F2(z)

    def hzzb(z):
        return m.hzzb(F(z)) * np.abs(F1(z)) ** 2

    def hzbzb(z):
        return m.hzbzb(F(z)) * np.conj(F1(z)) ** 2 + m.hzb(F(z)) * np.conj(F2(z))

    return AnalyticMap(lambda z: m.h(F(z)), hz, hzb, hzz, hzzb, hzbzb, m.family, f"{m.label}o{_fmt(phi_coeffs)}")


def sample(m: AnalyticMap, grid: Grid, derivatives: bool = False):
    """Sample h on every node; with ``derivatives`` also return the exact derivative fields."""
    z = grid.z
    hf = ComplexField(grid, m.h(z))
    if not derivatives:
        return hf
    return hf, {name: ComplexField(grid, m.derivative(name, z)) for name in DERIVATIVES}


def _fmt(c) -> str:
    return ",".join(f"{complex(v).real:g},{complex(v).imag:g}" for v in np.atleast_1d(c))


def strip_map(k: float = 1.0, theta0: float = 1.0, dtheta0: float | None = None, half_width: float = 4.0) -> AnalyticMap:
    """Non-conformal harmonic map into the unit sphere in stereographic coordinates.

    h(x, y) = tan(theta(x)/2) exp(i k y), where theta'' = k^2 sin(theta) cos(theta),
    theta(0) = theta0 and theta'(0) = dtheta0.  With dtheta0 = k sin(theta0) this is
    the conformal map exp(k z) up to a dilation; larger values make it sense-preserving
    but not conformal.  theta is integrated once to 1e-13 relative accuracy on
    |x| <= half_width and evaluated from the dense interpolant.
    """
    from scipy.integrate import solve_ivp

    if dtheta0 is None:
        dtheta0 = 1.25 * k * np.sin(theta0)

    def rhs(_, u):
        return [u[1], k * k * np.sin(u[0]) * np.cos(u[0])]

    kw = dict(method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)
    fwd = solve_ivp(rhs, (0.0, half_width), [theta0, dtheta0], **kw).sol
    bwd = solve_ivp(rhs, (0.0, -half_width), [theta0, dtheta0], **kw).sol

    def state(z):
        x = np.real(z)
        if np.any(np.abs(x) > half_width):
            raise ValueError(f"strip map is tabulated on |x| <= {half_width}")
        flat = x.ravel()
        u = np.where(flat >= 0, fwd(np.maximum(flat, 0.0)), bwd(np.minimum(flat, 0.0)))
        th, dth = u[0].reshape(x.shape), u[1].reshape(x.shape)
        return th, dth, k * k * np.sin(th) * np.cos(th), np.exp(1j * k * np.imag(z))

    # with t = tan(theta/2): t' = theta' sec^2/2, t'' = theta'' sec^2/2 + theta'^2 t sec^2/2
    def parts(z):
        th, d1, d2, e = state(np.asarray(z, dtype=complex))
        t = np.tan(th / 2)
        sec2 = 1 + t * t
        t1 = d1 * sec2 / 2
        t2 = d2 * sec2 / 2 + d1 * d1 * t * sec2 / 2
        return t, t1, t2, e

    def h(z):
        t, _, _, e = parts(z)
        return t * e

    # h_x = t' e, h_y = i k t e; h_xx = t'' e, h_xy = i k t' e, h_yy = -k^2 t e
    def hz(z):
        t, t1, _, e = parts(z)
        return (t1 + k * t) * e / 2

    def hzb(z):
        t, t1, _, e = parts(z)
        return (t1 - k * t) * e / 2

    def hzz(z):
        t, t1, t2, e = parts(z)
        return (t2 + 2 * k * t1 + k * k * t) * e / 4

    def hzzb(z):
        t, _, t2, e = parts(z)
        return (t2 - k * k * t) * e / 4

    def hzbzb(z):
        t, t1, t2, e = parts(z)
        return (t2 - 2 * k * t1 + k * k * t) * e / 4

    label = f"strip:k={k:g},theta0={theta0:g},dtheta0={dtheta0:g}"
    return AnalyticMap(h, hz, hzb, hzz, hzzb, hzbzb, "custom", label)
