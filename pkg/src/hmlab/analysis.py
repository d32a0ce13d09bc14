"""Jacobian fields of a map into a conformally flat target and residuals of the identities they satisfy.

For h with target density rho the bundle holds

    dh = rho(h) h_z,  dbh = rho(h) h_zbar,
    J = |dh|^2 - |dbh|^2,  D = |dh|^2 + |dbh|^2,
    A = d_z |h_z|^2 = h_zz conj(h_z) + h_z conj(h_zzbar),
    B = d_z |h_zbar|^2 = h_zzbar conj(h_zbar) + h_zbar conj(h_zbarzbar),

and the checks compare both sides of each identity node by node.  Nodes
where |h_z| or |h_zbar| falls below ``floor * max`` are excluded, together
with every node whose stencil reads one of them.  A component that vanishes
at every node (conformal or anticonformal maps) is treated as identically
zero instead: its ratio terms are set to their limit 0 and nothing is
excluded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import (
    ComplexField,
    Field,
    Grid,
    RealField,
    grad_norm_sq,
    laplacian,
    log_laplacian_crosscheck,
    modulus_sq,
    second_derivatives,
    wirtinger_dz,
    wirtinger_dzbar,
)
from .maps import AnalyticMap, sample
from .metrics import ConformalMetric

DEGENERATE_FLOOR = 1e-8
# default residual tolerance C*s^2 + ABS_TOL
DEFAULT_C = 25.0
ABS_TOL = 1e-10
ALGEBRA_RTOL = 1e-12


class NotSensePreservingError(ValueError):
    def __init__(self, nodes: list[tuple[int, int]]):
        self.nodes = nodes
        shown = ", ".join(str(n) for n in nodes[:10])
        more = f" (+{len(nodes) - 10} more)" if len(nodes) > 10 else ""
        super().__init__(f"not sense-preserving on evaluated set: J <= 0 at {shown}{more}")


class HypothesisViolated(ValueError):
    """Target curvature is negative somewhere on the image."""


@dataclass(eq=False)
class IdentityReport:
    name: str
    linf: float
    l2: float
    evaluated_nodes: int
    excluded_nodes: int
    spacing: float
    passed: bool
    tolerance_used: float
    note: str = ""
    extras: dict = field(default_factory=dict)
    # per-node detail for CSV export
    grid: Grid | None = field(default=None, repr=False)
    lhs: np.ndarray | None = field(default=None, repr=False)
    rhs: np.ndarray | None = field(default=None, repr=False)
    interior: np.ndarray | None = field(default=None, repr=False)
    excluded: np.ndarray | None = field(default=None, repr=False)

    @property
    def empty(self) -> bool:
        return self.evaluated_nodes == 0

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "linf": self.linf,
            "l2": self.l2,
            "evaluated_nodes": self.evaluated_nodes,
            "excluded_nodes": self.excluded_nodes,
            "spacing": self.spacing,
            "passed": self.passed,
            "tolerance_used": self.tolerance_used,
        }
        if self.note:
            d["note"] = self.note
        if self.extras:
            d["extras"] = dict(self.extras)
        return d

    def csv_rows(self):
        """Rows ``i,j,x,y,lhs,rhs,residual,excluded`` over the interior nodes."""
        if self.grid is None or self.interior is None:
            return
        g = self.grid
        for i, j in zip(*np.nonzero(self.interior)):
            ex = bool(self.excluded[i, j])
            lhs, rhs = float(self.lhs[i, j]), float(self.rhs[i, j])
            res = float("nan") if ex else abs(lhs - rhs)
            yield int(i), int(j), g.x0 + i * g.s, g.y0 + j * g.s, lhs, rhs, res, int(ex)


def default_tolerance(s: float, c: float = DEFAULT_C, extra: float = 0.0) -> float:
    return c * s * s + ABS_TOL + extra


@dataclass(eq=False)
class JacobianBundle:
    h: ComplexField
    metric: ConformalMetric
    hz: ComplexField
    hzb: ComplexField
    hzz: ComplexField
    hzzb: ComplexField
    hzbzb: ComplexField
    rho: RealField
    K2: RealField
    dh: ComplexField
    dbh: ComplexField
    J: RealField
    D: RealField
    J0: RealField
    D0: RealField
    A: ComplexField
    B: ComplexField
    degenerate_mask: np.ndarray
    hz_degenerate: np.ndarray
    hzb_degenerate: np.ndarray
    hz_zero: bool
    hzb_zero: bool
    floor: float

    @property
    def grid(self) -> Grid:
        return self.h.grid

    @property
    def spacing(self) -> float:
        return self.grid.s


def _field(kind, grid, values, mask):
    return kind(grid, np.where(mask, values, np.nan), mask)


def jacobian_bundle(
    h: ComplexField | AnalyticMap,
    metric: ConformalMetric,
    floor: float = DEGENERATE_FLOOR,
    grid: Grid | None = None,
) -> JacobianBundle:
    """All first- and second-order Jacobian fields of ``h``.

    A sampled field is differentiated by finite differences (second derivatives
    lose two rings); an :class:`AnalyticMap` plus ``grid`` uses the exact
    derivatives at every node.
    """
    if isinstance(h, AnalyticMap):
        if grid is None:
            raise ValueError("an AnalyticMap needs a grid")
        hf, d = sample(h, grid, derivatives=True)
        hz, hzb, hzz, hzzb, hzbzb = (d[k] for k in ("hz", "hzb", "hzz", "hzzb", "hzbzb"))
    else:
        hf = h
        hz, hzb = wirtinger_dz(hf), wirtinger_dzbar(hf)
        hzz, hzzb, hzbzb = second_derivatives(hf)
    g = hf.grid
    metric.check(hf.values, hf.mask)
    m1 = hz.mask & hzb.mask
    w = np.where(m1, hf.values, 0.0)
    rho_v = np.where(m1, metric.rho(w), np.nan)
    K_v = np.where(m1, metric.curvature(w), np.nan)
    p = np.abs(hz.values) ** 2
    q = np.abs(hzb.values) ** 2
    rho = _field(RealField, g, rho_v, m1)
    K2 = _field(RealField, g, K_v, m1)
    dh = _field(ComplexField, g, rho_v * hz.values, m1)
    dbh = _field(ComplexField, g, rho_v * hzb.values, m1)
    J0 = _field(RealField, g, p - q, m1)
    D0 = _field(RealField, g, p + q, m1)
    J = _field(RealField, g, rho_v**2 * (p - q), m1)
    D = _field(RealField, g, rho_v**2 * (p + q), m1)
    m2 = m1 & hzz.mask & hzzb.mask & hzbzb.mask
    with np.errstate(invalid="ignore"):
        A = _field(ComplexField, g, hzz.values * np.conj(hz.values) + hz.values * np.conj(hzzb.values), m2)
        B = _field(ComplexField, g, hzzb.values * np.conj(hzb.values) + hzb.values * np.conj(hzbzb.values), m2)

    az, azb = np.sqrt(np.where(m1, p, 0.0)), np.sqrt(np.where(m1, q, 0.0))
    top_z, top_zb = az.max(), azb.max()
    scale = max(top_z, top_zb)
    hz_zero = bool(top_z <= floor * scale)
    hzb_zero = bool(top_zb <= floor * scale)
    hz_deg = m1 & (az < floor * top_z) if not hz_zero else np.zeros_like(m1)
    hzb_deg = m1 & (azb < floor * top_zb) if not hzb_zero else np.zeros_like(m1)
    return JacobianBundle(
        hf, metric, hz, hzb, hzz, hzzb, hzbzb, rho, K2, dh, dbh, J, D, J0, D0, A, B,
        hz_deg | hzb_deg, hz_deg, hzb_deg, hz_zero, hzb_zero, floor,
    )


def bracket_forms(A, B, alpha):
    """The three equal expressions for the bracket of the main identity.

    Returns (three_term, single_square, decomposed, scale) where

        three_term    = alpha^2 |B|^2 + alpha^-2 |A|^2 - 2 Re(A conj B)
        single_square = |alpha B - A / alpha|^2
        decomposed    = (alpha |B| - |A| / alpha)^2 + 2 (|A||B| - Re(A conj B))

    and ``scale`` bounds the size of the individual terms (for relative
    comparisons).
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    alpha = np.asarray(alpha, dtype=float)
    re = np.real(A * np.conj(B))
    aA, aB = np.abs(A), np.abs(B)
    three = alpha**2 * aB**2 + aA**2 / alpha**2 - 2 * re
    square = np.abs(alpha * B - A / alpha) ** 2
    decomposed = (alpha * aB - aA / alpha) ** 2 + 2 * (aA * aB - re)
    scale = alpha**2 * aB**2 + aA**2 / alpha**2 + 2 * aA * aB
    return three, square, decomposed, scale


def _bracket(b: JacobianBundle):
    """Bracket forms on the A/B mask with the identically-zero convention."""
    m = b.A.mask & b.B.mask
    if b.hz_zero or b.hzb_zero:
        z = np.where(m, 0.0, np.nan)
        return z, z, z, z, m
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.abs(b.hz.values) / np.abs(b.hzb.values)
        three, square, dec, scale = bracket_forms(b.A.values, b.B.values, alpha)
    return three, square, dec, scale, m


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if radius <= 0 or not mask.any():
        return mask.copy()
    return ndimage.binary_dilation(mask, structure=np.ones((3, 3), bool), iterations=radius)


def _make_report(name, grid, lhs, rhs, interior, excluded, tol, note="", extras=None) -> IdentityReport:
    interior = interior.copy()
    excluded = excluded & interior
    ev = interior & ~excluded
    with np.errstate(invalid="ignore"):
        r = np.abs(np.where(ev, lhs - rhs, 0.0))
    n = int(ev.sum())
    linf = float(r.max()) if n else 0.0
    l2 = float(np.sqrt(np.sum(r**2) * grid.s**2)) if n else 0.0
    passed = bool(n > 0 and linf <= tol)
    return IdentityReport(
        name, linf, l2, n, int(excluded.sum()), grid.s, passed, float(tol), note, dict(extras or {}),
        grid, np.asarray(lhs, float), np.asarray(rhs, float), interior, excluded,
    )


def _vacuous(name, grid, interior, tol, why) -> IdentityReport:
    """Report for an identity whose subject vanishes identically; flagged, not failed."""
    nan = np.full(grid.shape, np.nan)
    return IdentityReport(
        name, 0.0, 0.0, 0, int(interior.sum()), grid.s, True, float(tol), why, {"vacuous": True},
        grid, nan, nan, interior, interior.copy(),
    )


def _log_lap(R: RealField) -> tuple[np.ndarray, np.ndarray]:
    """Δ log R by the five-point Laplacian of log R; returns (values, mask)."""
    pos = R.mask & (np.nan_to_num(R.values, nan=-1.0) > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        lg = RealField(R.grid, np.where(pos, np.log(np.where(pos, R.values, 1.0)), np.nan), pos)
    L = laplacian(lg)
    return L.values, L.mask


def _interior(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    from .grid import erode

    return erode(mask, radius)


def bochner_residuals(
    b: JacobianBundle, tol: float | None = None
) -> tuple[IdentityReport, IdentityReport]:
    """Residuals of Δ log|dh|^2 = -K2 J and Δ log|dbh|^2 = K2 J."""
    g = b.grid
    tol = default_tolerance(g.s) if tol is None else tol
    interior = _interior(b.J.mask)
    out = []
    for name, comp, zero, deg, sign in (
        ("bochner_dh", b.dh, b.hz_zero, b.hz_degenerate, -1.0),
        ("bochner_dbh", b.dbh, b.hzb_zero, b.hzb_degenerate, 1.0),
    ):
        if zero:
            out.append(_vacuous(name, g, interior, tol, f"{name}: component vanishes identically"))
            continue
        lhs, lmask = _log_lap(modulus_sq(comp))
        rhs = sign * b.K2.values * b.J.values
        excluded = ~lmask | _dilate(deg, 1)
        out.append(_make_report(name, g, lhs, rhs, interior, excluded, tol))
    return out[0], out[1]


def sigma_bochner_residuals(
    b: JacobianBundle, domain: ConformalMetric, tol: float | None = None
) -> tuple[IdentityReport, IdentityReport]:
    """Residuals of Δ^σ log|d_σ h|^2 = K1 - K2 J^σ and Δ^σ log|dbar_σ h|^2 = K1 + K2 J^σ."""
    g = b.grid
    tol = default_tolerance(g.s) if tol is None else tol
    z = g.z
    sigma = domain.rho(z)
    K1 = domain.curvature(z)
    interior = _interior(b.J.mask)
    Jsig = b.J.values / sigma**2
    out = []
    for name, comp, zero, deg, sign in (
        ("sigma_bochner_dh", b.dh, b.hz_zero, b.hz_degenerate, -1.0),
        ("sigma_bochner_dbh", b.dbh, b.hzb_zero, b.hzb_degenerate, 1.0),
    ):
        if zero:
            out.append(_vacuous(name, g, interior, tol, f"{name}: component vanishes identically"))
            continue
        dsig = ComplexField(g, np.where(comp.mask, comp.values / sigma, np.nan), comp.mask)
        lap, lmask = _log_lap(modulus_sq(dsig))
        lhs = lap / sigma**2
        rhs = K1 + sign * b.K2.values * Jsig
        excluded = ~lmask | _dilate(deg, 1)
        out.append(_make_report(name, g, lhs, rhs, interior, excluded, tol))
    return out[0], out[1]


def sigma_bundle(b: JacobianBundle, domain: ConformalMetric) -> dict[str, Field]:
    """d_σ h, dbar_σ h and J^σ for a domain density σ."""
    g = b.grid
    sigma = domain.rho(g.z)
    m = b.dh.mask
    return {
        "dsh": ComplexField(g, np.where(m, b.dh.values / sigma, np.nan), m),
        "dbsh": ComplexField(g, np.where(m, b.dbh.values / sigma, np.nan), m),
        "Jsigma": RealField(g, np.where(m, b.J.values / sigma**2, np.nan), m),
    }


def sigma_laplacian(f: RealField, domain: ConformalMetric) -> RealField:
    """Δ^σ f = Δf / σ^2."""
    L = laplacian(f)
    sigma = domain.rho(f.grid.z)
    return RealField(f.grid, np.where(L.mask, L.values / sigma**2, np.nan), L.mask)


def _require_sense_preserving(b: JacobianBundle, nodes: np.ndarray) -> None:
    bad = nodes & ~(np.nan_to_num(b.J0.values, nan=0.0) > 0)
    if bad.any():
        raise NotSensePreservingError([tuple(int(k) for k in ij) for ij in np.argwhere(bad)])


def _main_rhs_bracket(b: JacobianBundle):
    three, square, dec, scale, m = _bracket(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = 4 * b.rho.values**4 / b.J.values**2
    return factor, three, square, dec, scale, m


def main_identity_residual(b: JacobianBundle, tol: float | None = None) -> IdentityReport:
    """Residual of -Δ log J = K2 D + (4 rho^4 / J^2)(alpha^2|B|^2 + alpha^-2|A|^2 - 2 Re(A conj B)).

    Δ log J is assembled as (J ΔJ - |∇J|^2)/J^2, alpha = |h_z|/|h_zbar|, and
    rho, K2 are evaluated at h(z).  The three-term bracket and the single
    square |alpha B - A/alpha|^2 are both computed; their largest relative
    disagreement is reported in ``extras``.
    """
    g = b.grid
    tol = default_tolerance(g.s) if tol is None else tol
    excluded_deg = _dilate(b.degenerate_mask, 1)
    _require_sense_preserving(b, b.J.mask & ~excluded_deg)
    LJ = log_laplacian_crosscheck(b.J)
    factor, three, square, _, scale, m = _main_rhs_bracket(b)
    interior = _interior(b.J.mask) & m
    lhs = -LJ.values
    rhs = b.K2.values * b.D.values + factor * three
    excluded = ~LJ.mask | excluded_deg
    ev = interior & ~excluded
    extras = {"bracket_form_mismatch": _rel_mismatch(three, square, scale, ev)}
    return _make_report("main", g, lhs, rhs, interior, excluded, tol, extras=extras)


def presubtraction_identity_residual(b: JacobianBundle, tol: float | None = None) -> IdentityReport:
    """Residual of |∇J|^2 - J ΔJ = K2 J^2 D + 4 rho^4 (alpha^2|B|^2 + alpha^-2|A|^2 - 2 Re(A conj B))."""
    g = b.grid
    tol = default_tolerance(g.s) if tol is None else tol
    G = grad_norm_sq(b.J)
    L = laplacian(b.J)
    three, square, _, scale, m = _bracket(b)
    lhs = G.values - b.J.values * L.values
    rhs = b.K2.values * b.J.values**2 * b.D.values + 4 * b.rho.values**4 * three
    interior = G.mask & L.mask & m
    excluded = _dilate(b.degenerate_mask, 1)
    return _make_report("presub", g, lhs, rhs, interior, excluded, tol)


def _rel_mismatch(x, y, scale, nodes) -> float:
    if not nodes.any():
        return 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.abs(x - y) / np.maximum(scale, np.finfo(float).tiny)
    d = np.where(nodes & (scale > 0), d, 0.0)
    return float(d.max())


def quadratic_form(b: JacobianBundle, rtol: float = ALGEBRA_RTOL) -> tuple[RealField, IdentityReport]:
    """Q = (alpha|B| - |A|/alpha)^2 + 2(|A||B| - Re(A conj B)) and its algebraic checks.

    The report residual is the larger of the relative gap between Q and
    |alpha B - A/alpha|^2 and the relative negative part of Q.
    """
    g = b.grid
    three, square, dec, scale, m = _bracket(b)
    nodes = m & ~b.degenerate_mask
    Q = RealField(g, np.where(nodes, dec, np.nan), nodes)
    with np.errstate(invalid="ignore", divide="ignore"):
        sc = np.maximum(scale, np.finfo(float).tiny)
        gap = np.abs(dec - square) / sc
        neg = np.maximum(-dec, 0.0) / sc
    zeros = np.zeros(g.shape)
    rep = _make_report(
        "quadform", g, np.where(nodes, np.maximum(gap, neg), 0.0), zeros, m, b.degenerate_mask, rtol,
        extras={"min_q": float(np.min(dec[nodes])) if nodes.any() else 0.0},
    )
    return Q, rep


def superharmonicity_check(b: JacobianBundle, slack: float | None = None, c: float = 1.0) -> IdentityReport:
    """Assert Δ log J <= slack (default c*s) at every non-degenerate interior node.

    Needs K2 >= 0 on the image; otherwise :class:`HypothesisViolated` is raised.
    The reported residual is the positive part of Δ log J.
    """
    g = b.grid
    slack = c * g.s if slack is None else slack
    valid = b.K2.mask
    if np.any(b.K2.values[valid] < 0):
        raise HypothesisViolated("hypothesis violated: target curvature is negative at some image point")
    excluded_deg = _dilate(b.degenerate_mask, 1)
    _require_sense_preserving(b, b.J.mask & ~excluded_deg)
    lap, lmask = _log_lap(b.J)
    interior = _interior(b.J.mask)
    excluded = ~lmask | excluded_deg
    viol = np.where(np.isfinite(lap), np.maximum(lap, 0.0), 0.0)
    ev = interior & ~excluded
    extras = {"max_laplacian_log_j": float(np.max(lap[ev])) if ev.any() else 0.0}
    rep = _make_report("superharm", g, viol, np.zeros(g.shape), interior, excluded, slack, extras=extras)
    rep.lhs = lap
    return rep


def minimum_principle_check(
    J: RealField, subrect: tuple[int, int, int, int], slack: float = 0.0
) -> IdentityReport:
    """min over the strict interior of an index rectangle >= min over its edge - slack.

    ``subrect`` is (i0, i1, j0, j1), inclusive, and must span at least 3x3 nodes.
    """
    i0, i1, j0, j1 = subrect
    g = J.grid
    if not (0 <= i0 and i1 < g.nx and 0 <= j0 and j1 < g.ny and i1 - i0 >= 2 and j1 - j0 >= 2):
        raise ValueError(f"sub-rectangle {subrect} exceeds valid region")
    box = np.zeros(g.shape, dtype=bool)
    box[i0 : i1 + 1, j0 : j1 + 1] = True
    if not J.mask[box].all():
        raise ValueError(f"sub-rectangle {subrect} exceeds valid region")
    vals = J.values
    if np.any(vals[box] <= 0):
        raise ValueError("J must be positive on the sub-rectangle")
    inner = np.zeros_like(box)
    inner[i0 + 1 : i1, j0 + 1 : j1] = True
    edge = box & ~inner
    bi = np.argwhere(edge)[np.argmin(vals[edge])]
    ii = np.argwhere(inner)[np.argmin(vals[inner])]
    bmin, imin = float(vals[tuple(bi)]), float(vals[tuple(ii)])
    gap = max(0.0, bmin - imin)
    passed = gap <= slack
    return IdentityReport(
        "minprin", gap, gap, int(box.sum()), 0, g.s, bool(passed), float(slack), "",
        {
            "subrect": [int(i0), int(i1), int(j0), int(j1)],
            "boundary_min": bmin,
            "boundary_argmin": [int(k) for k in bi],
            "interior_min": imin,
            "interior_argmin": [int(k) for k in ii],
        },
    )


def random_subrects(mask: np.ndarray, n: int = 5, seed: int = 0, min_size: int = 3) -> list[tuple[int, int, int, int]]:
    """``n`` seeded index rectangles lying inside the bounding box of ``mask``'s valid nodes."""
    rng = np.random.default_rng(seed)
    idx = np.argwhere(mask)
    (a0, b0), (a1, b1) = idx.min(axis=0), idx.max(axis=0)
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 1000 * n:
            raise ValueError("could not place sub-rectangles inside the valid region")
        i0, i1 = sorted(int(v) for v in rng.integers(a0, a1 + 1, size=2))
        j0, j1 = sorted(int(v) for v in rng.integers(b0, b1 + 1, size=2))
        if i1 - i0 + 1 < min_size or j1 - j0 + 1 < min_size:
            continue
        if mask[i0 : i1 + 1, j0 : j1 + 1].all():
            out.append((i0, i1, j0, j1))
    return out


def centered_subrect(mask: np.ndarray, frac: float = 0.5) -> tuple[int, int, int, int]:
    idx = np.argwhere(mask)
    (a0, b0), (a1, b1) = idx.min(axis=0), idx.max(axis=0)
    ci, cj = (a0 + a1) // 2, (b0 + b1) // 2
    hi, hj = max(1, int(frac * (a1 - a0) / 2)), max(1, int(frac * (b1 - b0) / 2))
    return ci - hi, ci + hi, cj - hj, cj + hj


def _hopf_parts(h, metric: ConformalMetric, grid: Grid | None):
    if isinstance(h, AnalyticMap):
        if grid is None:
            raise ValueError("an AnalyticMap needs a grid")
        hf, d = sample(h, grid, derivatives=True)
        hz, hzb = d["hz"], d["hzb"]
    else:
        hf = h
        hz, hzb = wirtinger_dz(hf), wirtinger_dzbar(hf)
    m = hz.mask & hzb.mask
    metric.check(hf.values, m)
    rho2 = metric.rho(np.where(m, hf.values, 0.0)) ** 2
    psi = ComplexField(hf.grid, np.where(m, rho2 * hz.values * np.conj(hzb.values), np.nan), m)
    dens = np.where(m, rho2 * (np.abs(hz.values) ** 2 + np.abs(hzb.values) ** 2), 0.0)
    return psi, float(dens.max())


def hopf_differential(h: ComplexField | AnalyticMap, metric: ConformalMetric, grid: Grid | None = None) -> ComplexField:
    """Psi = rho(h)^2 h_z conj(h_zbar) sampled on the grid."""
    return _hopf_parts(h, metric, grid)[0]


def hopf_check(
    h: ComplexField | AnalyticMap,
    metric: ConformalMetric,
    grid: Grid | None = None,
    tol: float | None = None,
    floor: float = DEGENERATE_FLOOR,
) -> IdentityReport:
    """|d_zbar Psi| / max|Psi| over the interior.

    When max|Psi| is below ``floor`` times the largest energy density, Psi is
    treated as identically zero and the residual is absolute.
    """
    psi, dmax = _hopf_parts(h, metric, grid)
    g = psi.grid
    tol = default_tolerance(g.s) if tol is None else tol
    d = wirtinger_dzbar(psi)
    top = psi.linf()
    zero = top <= floor * dmax
    lhs = np.abs(d.values) / (1.0 if zero else top)
    return _make_report(
        "hopf", g, lhs, np.zeros(g.shape), d.mask, np.zeros(g.shape, bool), tol,
        note="hopf differential vanishes identically; residual is absolute" if zero else "",
        extras={"psi_max": top, "normalized": not zero},
    )


def radial_identity_residual(
    b: JacobianBundle,
    metric: ConformalMetric | None = None,
    r_floor: float = 1e-3,
    tol: float | None = None,
) -> IdentityReport:
    """Residual of the rotationally symmetric form of the main identity.

        -Δ log J0 = K2 rho^2 (D0 - |∇r|^2) + (2 rho'/(rho r)) (r Δr - |∇r|^2)
                    + (4 rho^4 / J^2) * bracket

    with r = |h| differentiated on the grid and rho, rho', K2 taken from the
    metric's radial profile at r.  Nodes with r < r_floor are excluded.
    """
    metric = metric or b.metric
    if metric.profile is None:
        raise ValueError(f"metric {metric.name!r} is not rotationally symmetric")
    g = b.grid
    tol = default_tolerance(g.s) if tol is None else tol
    prof = metric.profile
    r = RealField(g, np.where(b.h.mask, np.abs(b.h.values), np.nan), b.h.mask)
    small = b.h.mask & (np.nan_to_num(r.values, nan=0.0) < r_floor)
    G = grad_norm_sq(r)
    L = laplacian(r)
    rv = np.where(small | ~b.h.mask, 1.0, r.values)
    rho = metric.scale * prof.rho(rv)
    drho = metric.scale * prof.drho(rv)
    K2 = prof.curvature(rv) / metric.scale**2
    LJ0 = log_laplacian_crosscheck(b.J0)
    factor, three, _, _, _, m = _main_rhs_bracket(b)
    excluded_deg = _dilate(b.degenerate_mask, 1)
    _require_sense_preserving(b, b.J.mask & ~excluded_deg)
    lhs = -LJ0.values
    with np.errstate(invalid="ignore", divide="ignore"):
        rhs = (
            K2 * rho**2 * (b.D0.values - G.values)
            + 2 * drho / (rho * rv) * (rv * L.values - G.values)
            + factor * three
        )
    interior = G.mask & L.mask & m & _interior(b.J.mask)
    excluded = ~LJ0.mask | excluded_deg | _dilate(small, 1)
    return _make_report("radial", g, lhs, rhs, interior, excluded, tol)


def ab_crosscheck(b: JacobianBundle, tol: float | None = None) -> tuple[IdentityReport, IdentityReport]:
    """A and B from the second-derivative assembly against d_z of |h_z|^2 and |h_zbar|^2."""
    g = b.grid
    tol = default_tolerance(g.s) if tol is None else tol
    out = []
    for name, first, assembled in (("A", b.hz, b.A), ("B", b.hzb, b.B)):
        dz = wirtinger_dz(modulus_sq(first))
        interior = dz.mask & assembled.mask
        diff = np.abs(dz.values - assembled.values)
        out.append(
            _make_report(f"crosscheck_{name}", g, diff, np.zeros(g.shape), interior, np.zeros(g.shape, bool), tol)
        )
    return out[0], out[1]


def log_bridge_residual(b: JacobianBundle, tol: float | None = None) -> IdentityReport:
    """(|∇J|^2 - J ΔJ)/J^2 against -Δ(log J) taken by the five-point stencil."""
    g = b.grid
    tol = default_tolerance(g.s) if tol is None else tol
    G = grad_norm_sq(b.J)
    L = laplacian(b.J)
    with np.errstate(invalid="ignore", divide="ignore"):
        lhs = (G.values - b.J.values * L.values) / b.J.values**2
    direct, dmask = _log_lap(b.J)
    interior = G.mask & L.mask & _interior(b.J.mask)
    excluded = ~dmask | _dilate(b.degenerate_mask, 1)
    return _make_report("log_bridge", g, lhs, -direct, interior, excluded, tol)


def excluded_fraction(rep: IdentityReport) -> float:
    total = rep.evaluated_nodes + rep.excluded_nodes
    return rep.excluded_nodes / total if total else 0.0
