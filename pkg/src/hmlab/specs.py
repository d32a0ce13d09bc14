"""Text specifications for metrics and analytic maps, as used on the command line.

Metrics::

    euclidean | spherical | hyperbolic | radial:<profile> | tabulated:<HMFIELD path>

Maps (coefficients in ascending powers)::

    holo:<c0>,<c1>,...          holomorphic polynomial
    ehpoly:g=<...>;k=<...>      g(z) + conj(k(z))
    affine:c=<re>,<im>          z + c conj(z)
    strip[:k=..,theta0=..,dtheta0=..]   non-conformal harmonic map into the sphere
    abs2                        |z|^2 (not harmonic; a negative control)

A coefficient list with an even number of entries is read as (re, im)
pairs; an odd number of entries is read as real coefficients.
"""
from __future__ import annotations

import numpy as np

from .fieldio import read_field
from .grid import RealField
from .maps import AnalyticMap, affine_map, euclidean_harmonic, holomorphic_map, strip_map
from .metrics import PROFILES, ConformalMetric, builtin_metric, radial_metric, tabulated_metric


class SpecError(ValueError):
    """Malformed metric or map specification."""


def parse_numbers(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError as e:
        raise SpecError(f"bad number list {text!r}") from e


def parse_coefficients(text: str) -> np.ndarray:
    vals = parse_numbers(text)
    if not vals:
        raise SpecError("empty coefficient list")
    if len(vals) % 2 == 0:
        return np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    return np.array(vals, dtype=complex)


def parse_metric(spec: str) -> ConformalMetric:
    spec = spec.strip()
    if spec in ("euclidean", "spherical", "hyperbolic"):
        return builtin_metric(spec)
    kind, _, arg = spec.partition(":")
    if kind == "radial":
        if arg not in PROFILES:
            raise SpecError(f"unknown radial profile {arg!r}; known: {', '.join(sorted(PROFILES))}")
        return radial_metric(PROFILES[arg])
    if kind == "tabulated":
        try:
            f = read_field(arg)
        except (OSError, ValueError) as e:
            raise SpecError(f"cannot read tabulated metric {arg!r}: {e}") from e
        if not isinstance(f, RealField):
            raise SpecError("tabulated metric file must hold a real field")
        try:
            return tabulated_metric(f, name=spec)
        except ValueError as e:
            raise SpecError(str(e)) from e
    raise SpecError(f"unknown metric {spec!r}")


def _keyvals(arg: str, sep: str) -> dict[str, str]:
    out = {}
    for part in filter(None, (p.strip() for p in arg.split(sep))):
        key, eq, val = part.partition("=")
        if not eq:
            raise SpecError(f"expected key=value, got {part!r}")
        out[key.strip()] = val
    return out


def _abs2() -> AnalyticMap:
    def one(z):
        return np.ones(np.shape(z), dtype=complex)

    def zero(z):
        return np.zeros(np.shape(z), dtype=complex)

    return AnalyticMap(
        lambda z: (np.abs(z) ** 2).astype(complex), np.conj, lambda z: np.asarray(z, complex), zero, one, zero,
        "custom", "abs2",
    )


def parse_map(spec: str) -> AnalyticMap:
    spec = spec.strip()
    kind, _, arg = spec.partition(":")
    if kind == "holo":
        return holomorphic_map(parse_coefficients(arg))
    if kind == "affine":
        kv = _keyvals(arg, ";")
        c = parse_coefficients(kv.get("c", ""))
        if c.size != 1:
            raise SpecError("affine needs a single coefficient c=re,im")
        return affine_map(complex(c[0]))
    if kind == "ehpoly":
        kv = _keyvals(arg, ";")
        if set(kv) != {"g", "k"}:
            raise SpecError("ehpoly needs g=...;k=...")
        return euclidean_harmonic(parse_coefficients(kv["g"]), parse_coefficients(kv["k"]))
    if kind == "strip":
        kv = _keyvals(arg, ",")
        unknown = set(kv) - {"k", "theta0", "dtheta0"}
        if unknown:
            raise SpecError(f"unknown strip parameters {sorted(unknown)}")
        try:
            params = {key: float(v) for key, v in kv.items()}
        except ValueError as e:
            raise SpecError(f"bad strip parameter in {arg!r}") from e
        return strip_map(**params)
    if kind == "abs2" and not arg:
        return _abs2()
    raise SpecError(f"unknown map spec {spec!r}")
