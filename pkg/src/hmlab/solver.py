"""Dirichlet solver for h_zzbar + (log rho^2)_w(h) h_z h_zbar = 0 and the energy functional.

The nonlinear term is lagged: each outer iteration evaluates
``rhs = -4 (log rho^2)_w(h) h_z h_zbar`` from the current iterate and applies
one damped relaxation sweep to the five-point system Δh = rhs.  The
``poisson_direct`` sweep replaces the relaxation sweep by an exact sparse solve
of that linear system (same lagged iteration, far fewer outer steps).  Boundary
nodes are never written.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized

from .grid import ComplexField, Grid, RealField, erode, laplacian, wirtinger_dz, wirtinger_dzbar
from .metrics import ConformalMetric, DomainGuardError, builtin_metric

SWEEPS = ("jacobi", "gauss_seidel_rowmajor", "poisson_direct")


class InitializationError(RuntimeError):
    pass


class SolverDiverged(RuntimeError):
    def __init__(self, message: str, solution: "HarmonicSolution | None" = None):
        super().__init__(message)
        self.solution = solution


class MaxItersExceeded(RuntimeError):
    def __init__(self, message: str, solution: "HarmonicSolution"):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iters: int = 200_000
    omega: float = 0.8
    sweep: str = "gauss_seidel_rowmajor"
    # consecutive residual increases tolerated before declaring divergence
    patience: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not (0 < self.omega <= 1):
            raise ValueError("omega must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.sweep not in SWEEPS:
            raise ValueError(f"sweep must be one of {SWEEPS}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class HarmonicSolution:
    h: ComplexField
    metric: ConformalMetric
    residual_linf: float
    iterations: int
    energy: float
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def grid(self) -> Grid:
        return self.h.grid

    def summary(self) -> dict:
        g = self.grid
        return {
            "residual_linf": self.residual_linf,
            "iterations": self.iterations,
            "energy": self.energy,
            "converged": self.converged,
            "metric": self.metric.name,
            "grid": {"x0": g.x0, "y0": g.y0, "nx": g.nx, "ny": g.ny, "s": g.s},
        }


@functools.lru_cache(maxsize=8)
def _laplace_solver(nx: int, ny: int):
    """Factorised -Δ (unit spacing) on the (nx-2) x (ny-2) interior."""

    def lap1d(n):
        return sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n))

    mx, my = nx - 2, ny - 2
    A = sparse.kronsum(lap1d(my), lap1d(mx), format="csc")
    return A, factorized(A)


def _lap5(v: np.ndarray, s: float) -> np.ndarray:
    return (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4 * v[1:-1, 1:-1]) / (s * s)


def _boundary_rhs(h: np.ndarray) -> np.ndarray:
    """Dirichlet contributions to the unit-spacing interior system."""
    b = np.zeros((h.shape[0] - 2, h.shape[1] - 2), dtype=complex)
    b[0, :] += h[0, 1:-1]
    b[-1, :] += h[-1, 1:-1]
    b[:, 0] += h[1:-1, 0]
    b[:, -1] += h[1:-1, -1]
    return b


def _solve_complex(solve, b: np.ndarray) -> np.ndarray:
    return solve(b.real) + 1j * solve(b.imag)


def harmonic_extension(boundary: ComplexField, tol: float = 1e-10, refinements: int = 4) -> ComplexField:
    """Discrete harmonic function (five-point) with the boundary values of ``boundary``.

    Uses a sparse LU solve with iterative refinement; the interior values of
    ``boundary`` are ignored.
    """
    g = boundary.grid
    edge = g.boundary_mask()
    if not boundary.mask[edge].all():
        raise ValueError("boundary trace must be valid on all four edges")
    h = np.where(edge, boundary.values, 0.0).astype(complex)
    A, solve = _laplace_solver(g.nx, g.ny)
    # Dirichlet data moved to the right-hand side (unit spacing system)
    b = _boundary_rhs(h)
    bf = b.ravel()
    u = _solve_complex(solve, bf)
    for _ in range(refinements + 1):
        h[1:-1, 1:-1] = u.reshape(b.shape)
        if np.max(np.abs(_lap5(h, g.s))) <= tol:
            return ComplexField(g, h)
        r = bf - A @ u
        u = u + _solve_complex(solve, r)
    raise InitializationError(
        f"initialization failed: harmonic extension residual {np.max(np.abs(_lap5(h, g.s))):.3e} > {tol:g}"
    )


@numba.njit(cache=True)
def _residual_kernel(h, L, s):
    nx, ny = h.shape
    res = np.empty((nx - 2, ny - 2), dtype=np.complex128)
    rhs = np.empty((nx - 2, ny - 2), dtype=np.complex128)
    inv2s = 1.0 / (2.0 * s)
    invs2 = 1.0 / (s * s)
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            hx = (h[i + 1, j] - h[i - 1, j]) * inv2s
            hy = (h[i, j + 1] - h[i, j - 1]) * inv2s
            hz = 0.5 * (hx - 1j * hy)
            hzb = 0.5 * (hx + 1j * hy)
            lap = (h[i + 1, j] + h[i - 1, j] + h[i, j + 1] + h[i, j - 1] - 4.0 * h[i, j]) * invs2
            nl = L[i - 1, j - 1] * hz * hzb
            res[i - 1, j - 1] = 0.25 * lap + nl
            rhs[i - 1, j - 1] = -4.0 * nl
    return res, rhs


def _residual_arrays(h: np.ndarray, metric: ConformalMetric, s: float):
    """Interior residual h_zzbar + L(h) h_z h_zbar and relaxation rhs -4 L(h) h_z h_zbar."""
    L = np.ascontiguousarray(metric.log_rho2_w(h[1:-1, 1:-1]), dtype=np.complex128)
    return _residual_kernel(h, L, s)


def pde_residual(h: ComplexField, metric: ConformalMetric) -> RealField:
    """Pointwise |h_zzbar + (log rho^2)_w(h) h_z h_zbar| with five-point/central stencils."""
    metric.check(h.values, h.mask)
    lap = laplacian(h)
    hz, hzb = wirtinger_dz(h), wirtinger_dzbar(h)
    m = lap.mask & hz.mask
    w = np.where(m, h.values, 0.0)
    L = np.where(m, metric.log_rho2_w(w), 0.0)
    with np.errstate(invalid="ignore"):
        v = np.abs(0.25 * lap.values + L * hz.values * hzb.values)
    return RealField(h.grid, np.where(m, v, np.nan), m)


@numba.njit(cache=True)
def _gs_sweep(h, rhs, s2, omega):
    nx, ny = h.shape
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            g = 0.25 * (h[i - 1, j] + h[i + 1, j] + h[i, j - 1] + h[i, j + 1] - s2 * rhs[i - 1, j - 1])
            h[i, j] += omega * (g - h[i, j])


def _jacobi_sweep(h, rhs, s2, omega):
    g = 0.25 * (h[:-2, 1:-1] + h[2:, 1:-1] + h[1:-1, :-2] + h[1:-1, 2:] - s2 * rhs)
    h[1:-1, 1:-1] += omega * (g - h[1:-1, 1:-1])


def _direct_sweep_factory(h: np.ndarray):
    _, solve = _laplace_solver(*h.shape)
    bnd = _boundary_rhs(h)

    def sweep(h, rhs, s2, omega):
        u = _solve_complex(solve, (bnd - s2 * rhs).ravel()).reshape(bnd.shape)
        h[1:-1, 1:-1] += omega * (u - h[1:-1, 1:-1])

    return sweep


def solve_harmonic(
    boundary: ComplexField,
    metric: ConformalMetric,
    cfg: SolverConfig = SolverConfig(),
    domain: ConformalMetric | None = None,
) -> HarmonicSolution:
    """Relax the harmonic-map equation from the harmonic extension of ``boundary``.

    Raises :class:`DomainGuardError` if the boundary data leave the metric's
    domain, :class:`SolverDiverged` if the residual grows for ``cfg.patience``
    consecutive iterations or an iterate leaves the domain, and
    :class:`MaxItersExceeded` (carrying the best iterate) otherwise.
    """
    g = boundary.grid
    edge = g.boundary_mask()
    metric.check(np.where(edge, boundary.values, 0.0), edge)
    domain = domain or builtin_metric("euclidean")
    h = np.array(harmonic_extension(boundary).values, order="C")
    s, s2 = g.s, g.s * g.s
    if cfg.sweep == "gauss_seidel_rowmajor":
        sweep = _gs_sweep
    elif cfg.sweep == "jacobi":
        sweep = _jacobi_sweep
    else:
        sweep = _direct_sweep_factory(h)

    def package(arr, converged, iters):
        hf = ComplexField(g, arr)
        res = pde_residual(hf, metric).linf()
        return HarmonicSolution(hf, metric, res, iters, energy(hf, metric, domain), converged, history)

    history: list[float] = []
    best_r, best_h = np.inf, h.copy()
    rising, prev = 0, np.inf
    for it in range(cfg.max_iters + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                res, rhs = _residual_arrays(h, metric, s)
        except DomainGuardError as e:
            raise SolverDiverged(f"diverged: iterate left domain_guard ({e})") from e
        r = float(np.max(np.abs(res)))
        if not np.isfinite(r):
            raise SolverDiverged("diverged: non-finite residual")
        history.append(r)
        if r < best_r:
            best_r, best_h = r, h.copy()
        if r <= cfg.tol:
            return package(h, True, it)
        # Gauss-Seidel residuals can climb for thousands of sweeps before
        # settling; only growth beyond the starting residual counts as divergence
        rising = rising + 1 if (r > prev and r > history[0]) else 0
        prev = r
        if rising >= cfg.patience:
            raise SolverDiverged(
                f"diverged: residual increased for {rising} consecutive iterations", package(best_h, False, it)
            )
        if it == cfg.max_iters:
            break
        sweep(h, rhs, s2, cfg.omega)
    raise MaxItersExceeded(
        f"max_iters exceeded: residual {best_r:.3e} > tol {cfg.tol:g} after {cfg.max_iters} iterations",
        package(best_h, False, cfg.max_iters),
    )


def energy(h: ComplexField, target: ConformalMetric, domain: ConformalMetric | None = None) -> float:
    """Trapezoidal value of the integral of (|d_sigma h|^2 + |dbar_sigma h|^2) dV_sigma.

    Derivatives are second-order everywhere (one-sided on the edges).  The
    sigma factors are applied explicitly and cancel.
    """
    if not h.mask.all():
        raise ValueError("energy needs a field valid on the whole grid")
    domain = domain or builtin_metric("euclidean")
    g = h.grid
    hx, hy = np.gradient(h.values, g.s, edge_order=2)
    hz, hzb = 0.5 * (hx - 1j * hy), 0.5 * (hx + 1j * hy)
    rho = target.rho(h.values)
    sigma = domain.rho(g.z)
    dens = (rho**2 * np.abs(hz) ** 2 / sigma**2 + rho**2 * np.abs(hzb) ** 2 / sigma**2) * sigma**2
    return float(np.trapezoid(np.trapezoid(dens, dx=g.s, axis=1), dx=g.s))


@dataclass
class ProbeReport:
    amplitudes: np.ndarray
    delta_energy: np.ndarray  # (n_perturbations, n_amplitudes)
    exponents: np.ndarray
    modes: list[tuple[int, int, complex]]
    slack: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "amplitudes": [float(a) for a in self.amplitudes],
            "delta_energy": [[float(x) for x in row] for row in self.delta_energy],
            "exponents": [float(e) for e in self.exponents],
            "min_delta_energy": float(self.delta_energy.min()),
            "slack": self.slack,
            "passed": self.passed,
        }


def interior_bump(grid: Grid, k: int, l: int, coeff: complex) -> np.ndarray:
    """coeff * sin(k pi xi) sin(l pi eta) on normalised coordinates; zero on the boundary."""
    xi = np.arange(grid.nx) / (grid.nx - 1)
    eta = np.arange(grid.ny) / (grid.ny - 1)
    b = coeff * np.outer(np.sin(k * np.pi * xi), np.sin(l * np.pi * eta))
    b[grid.boundary_mask()] = 0.0
    return b


def critical_point_probe(
    sol: HarmonicSolution,
    n_perturbations: int = 5,
    amplitude: float = 0.04,
    seed: int = 0,
    domain: ConformalMetric | None = None,
    slack: float | None = None,
    exponent_range: tuple[float, float] = (1.9, 2.1),
) -> ProbeReport:
    """Energy change under random smooth interior bumps at amplitudes a/4, a/2, a.

    At a critical point the first variation vanishes, so the change grows
    quadratically in the amplitude.
    """
    g = sol.grid
    rng = np.random.default_rng(seed)
    amps = amplitude * np.array([0.25, 0.5, 1.0])
    E0 = energy(sol.h, sol.metric, domain)
    if slack is None:
        slack = 10.0 * (g.s**2 + sol.residual_linf) * max(abs(E0), 1.0) * amplitude
    rows, exps, modes = [], [], []
    for _ in range(n_perturbations):
        k, l = (int(v) for v in rng.integers(1, 4, size=2))
        coeff = np.exp(2j * np.pi * rng.uniform())
        modes.append((k, l, complex(coeff)))
        bump = interior_bump(g, k, l, coeff)
        dE = np.array(
            [energy(ComplexField(g, sol.h.values + a * bump), sol.metric, domain) - E0 for a in amps]
        )
        rows.append(dE)
        if np.all(dE > 0):
            exps.append(float(np.polyfit(np.log(amps), np.log(dE), 1)[0]))
        else:
            exps.append(float("nan"))
    dE = np.array(rows)
    exps = np.array(exps)
    lo, hi = exponent_range
    passed = bool(np.all(dE >= -slack) and np.all((exps >= lo) & (exps <= hi)))
    return ProbeReport(amps, dE, exps, modes, slack, passed)
