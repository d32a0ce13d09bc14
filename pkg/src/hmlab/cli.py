"""``hmlab solve|verify|refine|metric-check``.

Exit codes: 0 pass, 1 check failure, 2 solver divergence, 3 usage or
malformed input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from .convergence import check_halving, nodes_for, parse_spacing, refinement_order
from .fieldio import atomic_write, dumps_json, fmt, read_field, write_field
from .grid import ComplexField, EmptyInteriorError, Grid
from .maps import AnalyticMap, sample
from .metrics import DomainGuardError, default_samples, verify_metric_consistency
from .solver import (
    SWEEPS,
    InitializationError,
    MaxItersExceeded,
    SolverConfig,
    SolverDiverged,
    solve_harmonic,
)
from .specs import SpecError, parse_map, parse_metric
from .suite import CheckOptions, crop_field, crop_grid, parse_checks, run_checks

EXIT_OK, EXIT_FAIL, EXIT_DIVERGED, EXIT_USAGE = 0, 1, 2, 3
METRIC_CHECK_THRESHOLD = 1e-6


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}" if flag else message)
        self.flag = flag


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("", message)


def _emit(obj) -> None:
    sys.stdout.write(dumps_json(obj))


# ---- argument groups ----

def _grid_args(p):
    g = p.add_argument_group("grid")
    g.add_argument("--nx", type=int)
    g.add_argument("--ny", type=int)
    g.add_argument("--x0", type=float)
    g.add_argument("--y0", type=float)
    g.add_argument("--s", type=str, help="spacing, e.g. 0.015625 or 1/64")


def _solver_args(p, tol=1e-8):
    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float, default=tol)
    g.add_argument("--max-iters", type=int, default=SolverConfig.max_iters)
    g.add_argument("--omega", type=float, default=SolverConfig.omega)
    g.add_argument("--sweep", choices=SWEEPS, default=SolverConfig.sweep)
    g.add_argument("--patience", type=int, default=SolverConfig.patience)


def _check_args(p):
    g = p.add_argument_group("checks")
    g.add_argument("--checks", required=True, help="comma-separated check names")
    g.add_argument("--C", dest="c", type=float, default=an.DEFAULT_C, help="tolerance C in C*(s^2 + solver tol)")
    g.add_argument("--slack-c", type=float, default=1.0, help="superharm/minprin slack C in C*s")
    g.add_argument("--floor", type=float, default=an.DEGENERATE_FLOOR)
    g.add_argument("--r-floor", type=float, default=0.1, help="radial check excludes |h| below this")
    g.add_argument("--domain-metric", default="euclidean", help="sigma for sigma-bochner")
    g.add_argument("--subrects", type=int, default=5)
    g.add_argument("--crop", type=float, default=0.0, help="drop a band of this physical width before checking")
    g.add_argument("--route", choices=("exact", "fd"), default="exact", help="derivatives of analytic maps")
    g.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hmlab", description="Harmonic maps into conformal metrics: solve and verify.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="relax the harmonic-map equation with Dirichlet data")
    s.add_argument("--metric", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--boundary", help="analytic map spec supplying the boundary trace")
    src.add_argument("--boundary-field", help="HMFIELD file whose edge values are the boundary trace")
    s.add_argument("--domain-metric", default="euclidean", help="sigma used in the energy integral")
    s.add_argument("--out", default=".")
    s.add_argument("--name", default="solution")
    _grid_args(s)
    _solver_args(s)

    v = sub.add_parser("verify", help="evaluate identity checks on a map or a field")
    v.add_argument("--metric", required=True)
    src = v.add_mutually_exclusive_group(required=True)
    src.add_argument("--map", help="analytic map spec")
    src.add_argument("--field", help="HMFIELD file (e.g. a solver output)")
    v.add_argument("--solver-tol", type=float, help="defaults to residual_linf from the field's sidecar JSON")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--csv", action="store_true", help="also write per-node CSV for each report")
    v.add_argument("--out", default=".")
    _grid_args(v)
    _check_args(v)

    r = sub.add_parser("refine", help="grid-refinement study of check residuals")
    r.add_argument("--metric", required=True)
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--map", help="analytic map evaluated at every spacing")
    src.add_argument("--boundary", help="map spec whose trace is solved for at every spacing")
    r.add_argument("--x0", type=float, required=True)
    r.add_argument("--y0", type=float, required=True)
    r.add_argument("--width", type=float, required=True)
    r.add_argument("--height", type=float)
    r.add_argument("--spacings", required=True, help="comma-separated halving sequence, e.g. 1/32,1/64,1/128")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=".")
    _solver_args(r)
    _check_args(r)

    m = sub.add_parser("metric-check", help="compare closed-form metric quantities with finite differences")
    m.add_argument("--metric", required=True)
    m.add_argument("--samples", type=int, default=100)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--eps", type=float, default=1e-3)
    m.add_argument("--out")
    return p


# ---- helpers ----

def _metric(text: str, flag: str = "--metric"):
    try:
        return parse_metric(text)
    except SpecError as e:
        raise UsageError(flag, str(e)) from e


def _map(text: str, flag: str) -> AnalyticMap:
    try:
        return parse_map(text)
    except (SpecError, ValueError) as e:
        raise UsageError(flag, str(e)) from e


def _grid(a) -> Grid:
    for flag in ("nx", "ny", "x0", "y0", "s"):
        if getattr(a, flag) is None:
            raise UsageError(f"--{flag}", "required when the input is an analytic map spec")
    try:
        return Grid(a.x0, a.y0, a.nx, a.ny, parse_spacing(a.s))
    except (ValueError, ZeroDivisionError) as e:
        raise UsageError("--s", str(e)) from e


def _read(path: str, flag: str):
    try:
        return read_field(path)
    except OSError as e:
        raise UsageError(flag, f"cannot read {path!r}: {e.strerror or e}") from e
    except ValueError as e:
        raise UsageError(flag, f"{path!r}: {e}") from e


def _solver_cfg(a, tol: float | None = None) -> SolverConfig:
    try:
        return SolverConfig(a.tol if tol is None else tol, a.max_iters, a.omega, a.sweep, a.patience)
    except ValueError as e:
        raise UsageError("--tol/--omega/--max-iters", str(e)) from e


def _options(a, solver_tol: float = 0.0) -> CheckOptions:
    try:
        parse_metric(a.domain_metric)
    except SpecError as e:
        raise UsageError("--domain-metric", str(e)) from e
    if a.domain_metric not in ("euclidean", "spherical", "hyperbolic"):
        raise UsageError("--domain-metric", "must be euclidean, spherical or hyperbolic")
    return CheckOptions(a.c, solver_tol, a.slack_c, a.floor, a.r_floor, a.subrects, a.seed, a.domain_metric)


def _checks(a) -> list[str]:
    try:
        return parse_checks(a.checks)
    except ValueError as e:
        raise UsageError("--checks", str(e)) from e


def _report_csv(rep: an.IdentityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "x", "y", "lhs", "rhs", "residual", "excluded"])
    for i, j, x, y, lhs, rhs, res, ex in rep.csv_rows() or ():
        w.writerow([i, j, fmt(x), fmt(y), fmt(lhs), fmt(rhs), fmt(res), ex])
    return buf.getvalue()


# ---- commands ----

def run_solve(a) -> int:
    metric = _metric(a.metric)
    _metric(a.domain_metric, "--domain-metric")
    if a.boundary is not None:
        m = _map(a.boundary, "--boundary")
        grid = _grid(a)
        try:
            bnd = sample(m, grid)
        except ValueError as e:
            raise UsageError("--boundary", str(e)) from e
    else:
        bnd = _read(a.boundary_field, "--boundary-field")
        if not isinstance(bnd, ComplexField):
            raise UsageError("--boundary-field", "boundary field must be complex")
    cfg = _solver_cfg(a)
    out = Path(a.out)
    try:
        sol = solve_harmonic(bnd, metric, cfg, parse_metric(a.domain_metric))
        code = EXIT_OK
    except DomainGuardError as e:
        raise UsageError("--boundary", f"domain_guard: {e}") from e
    except (SolverDiverged, MaxItersExceeded) as e:
        sys.stderr.write(f"hmlab solve: {e}\n")
        sol, code = e.solution, EXIT_DIVERGED
    except InitializationError as e:
        sys.stderr.write(f"hmlab solve: {e}\n")
        return EXIT_DIVERGED
    if sol is None:
        return code
    summary = sol.summary()
    summary["boundary"] = a.boundary if a.boundary is not None else a.boundary_field
    summary["config"] = {"tol": cfg.tol, "max_iters": cfg.max_iters, "omega": cfg.omega, "sweep": cfg.sweep}
    write_field(out / f"{a.name}.hmf", sol.h)
    atomic_write(out / f"{a.name}.json", dumps_json(summary))
    _emit(summary)
    return code


def _crop(fn, obj, margin: float):
    if not margin >= 0:
        raise UsageError("--crop", "must be non-negative")
    try:
        return fn(obj, margin)
    except ValueError as e:
        raise UsageError("--crop", str(e)) from e


def _sidecar_tol(path: str) -> float:
    side = Path(path).with_suffix(".json")
    if side.exists():
        try:
            v = json.loads(side.read_text()).get("residual_linf")
            return float(v) if v is not None else 0.0
        except (ValueError, AttributeError):
            return 0.0
    return 0.0


def _write_reports(out: Path, reports, with_csv: bool) -> None:
    for rep in reports:
        atomic_write(out / f"report_{rep.name}.json", dumps_json(rep.to_dict()))
        if with_csv:
            atomic_write(out / f"report_{rep.name}.csv", _report_csv(rep))


def run_verify(a) -> int:
    metric = _metric(a.metric)
    checks = _checks(a)
    if a.map is not None:
        m = _map(a.map, "--map")
        grid = _crop(crop_grid, _grid(a), a.crop)
        if a.route == "exact":
            subject, gridarg = m, grid
        else:
            subject, gridarg = sample(m, grid), None
        label = a.map
    else:
        f = _read(a.field, "--field")
        if not isinstance(f, ComplexField):
            raise UsageError("--field", "verification needs a complex field")
        subject, gridarg = _crop(crop_field, f, a.crop), None
        label = a.field
    solver_tol = a.solver_tol if a.solver_tol is not None else (_sidecar_tol(a.field) if a.field else 0.0)
    opts = _options(a, solver_tol)
    try:
        reports = run_checks(subject, metric, checks, opts, gridarg, max(1, a.jobs))
    except DomainGuardError as e:
        raise UsageError("--metric", f"domain_guard: {e}") from e
    except EmptyInteriorError as e:
        raise UsageError("--crop", str(e)) from e
    except ValueError as e:
        raise UsageError("--map" if a.map else "--field", str(e)) from e
    out = Path(a.out)
    _write_reports(out, reports, a.csv)
    passed = all(r.passed for r in reports)
    summary = {"input": label, "metric": a.metric, "passed": passed, "reports": [r.to_dict() for r in reports]}
    atomic_write(out / "verify.json", dumps_json(summary))
    _emit(summary)
    return EXIT_OK if passed else EXIT_FAIL


def run_refine(a) -> int:
    metric = _metric(a.metric)
    names = [c.strip() for c in a.checks.split(",") if c.strip()]
    want_error = "error" in names
    if want_error and a.boundary is None:
        raise UsageError("--checks", "'error' needs --boundary (a solved fixture)")
    rest = [c for c in names if c != "error"]
    try:
        checks = parse_checks(",".join(rest)) if rest else []
    except ValueError as e:
        raise UsageError("--checks", str(e)) from e
    try:
        spacings = check_halving([parse_spacing(t) for t in a.spacings.split(",") if t.strip()])
    except (ValueError, ZeroDivisionError) as e:
        raise UsageError("--spacings", str(e)) from e
    height = a.width if a.height is None else a.height
    m = _map(a.map if a.map is not None else a.boundary, "--map" if a.map is not None else "--boundary")
    rows: dict[str, list[float]] = {}
    solves = []
    for s in spacings:
        try:
            grid = Grid(a.x0, a.y0, nodes_for(a.width, s), nodes_for(height, s), s)
        except ValueError as e:
            raise UsageError("--spacings", str(e)) from e
        solver_tol = 0.0
        if a.map is not None:
            subject = m if a.route == "exact" else sample(m, grid)
            gridarg = _crop(crop_grid, grid, a.crop) if a.route == "exact" else None
            if a.route == "fd":
                subject = _crop(crop_field, subject, a.crop)
        else:
            # solver tolerance staged below the discretization error
            cfg = _solver_cfg(a, min(a.tol, 1e-3 * s * s))
            try:
                sol = solve_harmonic(sample(m, grid), metric, cfg)
            except DomainGuardError as e:
                raise UsageError("--boundary", f"domain_guard: {e}") from e
            except (SolverDiverged, MaxItersExceeded, InitializationError) as e:
                sys.stderr.write(f"hmlab refine: {e}\n")
                return EXIT_DIVERGED
            solver_tol = sol.residual_linf
            solves.append({"spacing": s, "iterations": sol.iterations, "residual_linf": sol.residual_linf})
            subject, gridarg = _crop(crop_field, sol.h, a.crop), None
            if want_error:
                ref = _crop(crop_field, sample(m, grid), a.crop)
                rows.setdefault("error", []).append(float(np.max(np.abs(subject.values - ref.values))))
        opts = _options(a, solver_tol)
        try:
            reps = run_checks(subject, metric, checks, opts, gridarg, max(1, a.jobs)) if checks else []
        except DomainGuardError as e:
            raise UsageError("--metric", f"domain_guard: {e}") from e
        except ValueError as e:
            raise UsageError("--map" if a.map else "--boundary", str(e)) from e
        for rep in reps:
            rows.setdefault(rep.name, []).append(rep.linf)
    results = [refinement_order(name, spacings, errs) for name, errs in rows.items()]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["spacing", "check", "linf"])
    for name, errs in rows.items():
        for s, e in zip(spacings, errs):
            w.writerow([fmt(s), name, fmt(e)])
    out = Path(a.out)
    atomic_write(out / "refine.csv", buf.getvalue())
    passed = all(r.passed for r in results)
    summary = {"metric": a.metric, "passed": passed, "checks": [r.to_dict() for r in results]}
    if solves:
        summary["solves"] = solves
    atomic_write(out / "refine.json", dumps_json(summary))
    _emit(summary)
    return EXIT_OK if passed else EXIT_FAIL


def run_metric_check(a) -> int:
    metric = _metric(a.metric)
    if a.samples < 1:
        raise UsageError("--samples", "must be positive")
    pts = default_samples(metric, a.samples, a.seed)
    worst = verify_metric_consistency(metric, pts, a.eps)
    K = metric.curvature(pts)
    summary = {
        "metric": a.metric,
        "samples": a.samples,
        "seed": a.seed,
        "max_inconsistency": worst,
        "curvature_min": float(np.min(K)),
        "curvature_max": float(np.max(K)),
        "threshold": METRIC_CHECK_THRESHOLD,
        "passed": bool(worst <= METRIC_CHECK_THRESHOLD),
    }
    if a.out:
        atomic_write(Path(a.out) / "metric_check.json", dumps_json(summary))
    _emit(summary)
    sys.stderr.write(f"K in [{summary['curvature_min']:.6f}, {summary['curvature_max']:.6f}], max inconsistency {worst:.3e}\n")
    return EXIT_OK if summary["passed"] else EXIT_FAIL


COMMANDS = {"solve": run_solve, "verify": run_verify, "refine": run_refine, "metric-check": run_metric_check}


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
        return COMMANDS[a.command](a)
    except UsageError as e:
        sys.stderr.write(f"hmlab: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
