"""Residuals of non-harmonic fields stay order one under refinement.

    python3 scripts/negative_control.py
"""
import numpy as np

from hmlab import analysis as an
from hmlab.grid import ComplexField, Grid
from hmlab.metrics import builtin_metric

EUC = builtin_metric("euclidean")
FIELDS = {
    "|z|^2": lambda z: np.abs(z) ** 2 + 0j,
    "z + 0.2 z^2 conj(z)": lambda z: z + 0.2 * z**2 * np.conj(z),
    "z + 0.3 conj(z)  (harmonic)": lambda z: z + 0.3 * np.conj(z),
}


def main():
    print(f"{'field':30s} {'n':>5s} {'hopf':>12s} {'main':>12s}")
    for label, fn in FIELDS.items():
        for n in (33, 65, 129, 257):
            g = Grid.square(-0.5, -0.5, 1.0, n)
            h = ComplexField(g, fn(g.z))
            hopf = an.hopf_check(h, EUC).linf
            try:
                main_res = f"{an.main_identity_residual(an.jacobian_bundle(h, EUC)).linf:12.3e}"
            except an.NotSensePreservingError:
                main_res = f"{'J <= 0':>12s}"
            print(f"{label:30s} {n:5d} {hopf:12.3e} {main_res}")


if __name__ == "__main__":
    main()
