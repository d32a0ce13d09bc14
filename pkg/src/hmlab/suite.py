"""Named identity checks run together on one map, with shared tolerance settings."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import analysis as an
from .grid import ComplexField, EmptyInteriorError, Grid
from .maps import AnalyticMap
from .metrics import ConformalMetric, builtin_metric

CHECKS = ("bochner", "sigma-bochner", "main", "presub", "quadform", "superharm", "minprin", "hopf", "radial")
EXTRA_CHECKS = ("crosscheck", "bridge")


@dataclass(frozen=True)
class CheckOptions:
    c: float = an.DEFAULT_C
    solver_tol: float = 0.0
    slack_c: float = 1.0
    floor: float = an.DEGENERATE_FLOOR
    r_floor: float = 0.1
    n_subrects: int = 5
    seed: int = 0
    domain_metric: str = "euclidean"

    def tolerance(self, s: float) -> float:
        return self.c * (s * s + self.solver_tol) + an.ABS_TOL

    def slack(self, s: float) -> float:
        return self.slack_c * s


def parse_checks(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise ValueError("check list is empty")
    bad = [n for n in names if n not in CHECKS + EXTRA_CHECKS]
    if bad:
        raise ValueError(f"unknown checks {bad}; known: {', '.join(CHECKS + EXTRA_CHECKS)}")
    return list(dict.fromkeys(names))


def _failed(name: str, s: float, tol: float, note: str) -> an.IdentityReport:
    return an.IdentityReport(name, float("nan"), float("nan"), 0, 0, s, False, tol, note)


def _skipped(name: str, s: float, tol: float, note: str) -> an.IdentityReport:
    return an.IdentityReport(name, 0.0, 0.0, 0, 0, s, True, tol, note, {"skipped": True})


def _one(check: str, b: an.JacobianBundle, h, metric, grid: Grid | None, opts: CheckOptions) -> list[an.IdentityReport]:
    s = b.spacing
    tol = opts.tolerance(s)
    try:
        if check == "bochner":
            return list(an.bochner_residuals(b, tol))
        if check == "sigma-bochner":
            return list(an.sigma_bochner_residuals(b, builtin_metric(opts.domain_metric), tol))
        if check == "main":
            return [an.main_identity_residual(b, tol)]
        if check == "presub":
            return [an.presubtraction_identity_residual(b, tol)]
        if check == "quadform":
            return [an.quadratic_form(b)[1]]
        if check == "superharm":
            return [an.superharmonicity_check(b, opts.slack(s))]
        if check == "minprin":
            rects = an.random_subrects(b.J.mask, opts.n_subrects, opts.seed)
            reps = [an.minimum_principle_check(b.J, r, opts.slack(s)) for r in rects]
            for k, r in enumerate(reps):
                r.name = f"minprin_{k}"
            return reps
        if check == "hopf":
            return [an.hopf_check(h, metric, grid, tol, opts.floor)]
        if check == "radial":
            return [an.radial_identity_residual(b, r_floor=opts.r_floor, tol=tol)]
        if check == "crosscheck":
            return list(an.ab_crosscheck(b, tol))
        if check == "bridge":
            return [an.log_bridge_residual(b, tol)]
    except an.HypothesisViolated as e:
        return [_skipped(check, s, tol, str(e))]
    except (an.NotSensePreservingError, EmptyInteriorError) as e:
        return [_failed(check, s, tol, str(e))]
    except ValueError as e:
        return [_failed(check, s, tol, f"{check}: {e}")]
    raise ValueError(f"unknown check {check!r}")


def run_checks(
    h: ComplexField | AnalyticMap,
    metric: ConformalMetric,
    checks: list[str],
    opts: CheckOptions = CheckOptions(),
    grid: Grid | None = None,
    jobs: int = 1,
) -> list[an.IdentityReport]:
    """Evaluate ``checks`` in order; a check that cannot be evaluated yields a failed report."""
    b = an.jacobian_bundle(h, metric, opts.floor, grid)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(lambda c: _one(c, b, h, metric, grid, opts), checks))
    else:
        parts = [_one(c, b, h, metric, grid, opts) for c in checks]
    return [r for p in parts for r in p]


def crop_field(h: ComplexField, margin: float) -> ComplexField:
    return h if margin <= 0 else h.crop_window(margin)


def crop_grid(grid: Grid, margin: float) -> Grid:
    if margin <= 0:
        return grid
    k = int(round(margin / grid.s))
    return grid.subgrid(k, grid.nx - 1 - k, k, grid.ny - 1 - k)
