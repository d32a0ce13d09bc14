"""Harmonic maps between planar domains with conformal metrics: a finite-difference solver and
residual checks for the Jacobian identities such maps satisfy."""
from .analysis import IdentityReport, JacobianBundle, jacobian_bundle
from .grid import ComplexField, Grid, RealField
from .maps import AnalyticMap
from .metrics import ConformalMetric, builtin_metric
from .solver import HarmonicSolution, SolverConfig, solve_harmonic

__all__ = [
    "AnalyticMap",
    "ComplexField",
    "ConformalMetric",
    "Grid",
    "HarmonicSolution",
    "IdentityReport",
    "JacobianBundle",
    "RealField",
    "SolverConfig",
    "builtin_metric",
    "jacobian_bundle",
    "solve_harmonic",
]
