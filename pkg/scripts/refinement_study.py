"""Grid-refinement table for the identity checks on a solved spherical-target map.

    python3 scripts/refinement_study.py --boundary strip --out refinement.csv
"""
import argparse
import csv
import sys

import numpy as np

from hmlab import analysis as an
from hmlab.convergence import refinement_order
from hmlab.grid import Grid
from hmlab.maps import sample
from hmlab.metrics import builtin_metric
from hmlab.solver import SolverConfig, solve_harmonic
from hmlab.specs import parse_map


def study(boundary: str, ns, crop: float, sweep: str):
    metric = builtin_metric("spherical")
    m = parse_map(boundary)
    rows: dict[str, list[float]] = {}
    spacings = []
    for n in ns:
        g = Grid.square(-0.5, -0.5, 1.0, n)
        sol = solve_harmonic(sample(m, g), metric, SolverConfig(tol=1e-3 * g.s**2, sweep=sweep))
        h = sol.h.crop_window(crop) if crop > 0 else sol.h
        ref = sample(m, g)
        ref = ref.crop_window(crop) if crop > 0 else ref
        b = an.jacobian_bundle(h, metric)
        reps = [
            *an.bochner_residuals(b),
            an.main_identity_residual(b),
            an.presubtraction_identity_residual(b),
            an.log_bridge_residual(b),
            an.hopf_check(h, metric),
            an.radial_identity_residual(b, r_floor=0.1),
        ]
        rows.setdefault("error", []).append(float(np.max(np.abs(h.values - ref.values))))
        for r in reps:
            rows.setdefault(r.name, []).append(r.linf)
        spacings.append(g.s)
        print(f"n={n:4d} iterations={sol.iterations:6d} residual={sol.residual_linf:.2e}", file=sys.stderr)
    return spacings, rows


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--boundary", default="strip", help="map spec supplying boundary data and the reference")
    p.add_argument("--n", default="33,65,129", help="node counts per side")
    p.add_argument("--crop", type=float, default=0.0)
    p.add_argument("--sweep", default="poisson_direct")
    p.add_argument("--out", help="CSV path (spacing, check, linf)")
    a = p.parse_args()
    spacings, rows = study(a.boundary, [int(v) for v in a.n.split(",")], a.crop, a.sweep)
    print(f"{'check':14s} " + " ".join(f"s={s:<10.5g}" for s in spacings) + "  slope")
    for name, errs in rows.items():
        r = refinement_order(name, spacings, errs)
        tag = "bypass" if r.bypassed else f"{r.slope:.3f}"
        print(f"{name:14s} " + " ".join(f"{e:<12.3e}" for e in errs) + f"  {tag}")
    if a.out:
        with open(a.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["spacing", "check", "linf"])
            for name, errs in rows.items():
                for s, e in zip(spacings, errs):
                    w.writerow([repr(s), name, repr(e)])


if __name__ == "__main__":
    main()
