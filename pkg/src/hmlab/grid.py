"""Uniform grids, masked fields and finite-difference Wirtinger calculus.

Every field lives on a :class:`Grid` with square spacing ``s``.  Arrays are
indexed ``[i, j]`` with ``i`` along x and ``j`` along y, so node ``(i, j)``
sits at ``x0 + i*s + 1j*(y0 + j*s)``.

Each derivative operation returns a new field whose mask is the input mask
eroded by the stencil radius (square structuring element), so a valid output
node never reads an invalid input node.  Values at invalid nodes are NaN.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy import ndimage

# Positivity floor for logarithms, relative to the field maximum.
LOG_FLOOR = 1e-12


class EmptyInteriorError(ValueError):
    """No valid node is left after shrinking the mask for a stencil."""


class FieldNotPositiveError(ValueError):
    """A logarithm was requested of a field with no positive valid node."""


@dataclass(frozen=True)
class Grid:
    x0: float
    y0: float
    nx: int
    ny: int
    s: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("nx and ny must be integers")
        if self.nx < 5 or self.ny < 5:
            raise ValueError(f"grid needs at least 5x5 nodes, got {self.nx}x{self.ny}")
        if not (np.isfinite(self.s) and self.s > 0):
            raise ValueError(f"spacing must be positive, got {self.s}")
        if not (np.isfinite(self.x0) and np.isfinite(self.y0)):
            raise ValueError("grid origin must be finite")

    @classmethod
    def square(cls, x0: float, y0: float, length: float, n: int) -> "Grid":
        """n x n grid covering [x0, x0+length] x [y0, y0+length]."""
        return cls(x0=x0, y0=y0, nx=n, ny=n, s=length / (n - 1))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.s * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.s * np.arange(self.ny)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def z(self) -> np.ndarray:
        X, Y = self.coords()
        return X + 1j * Y

    def subgrid(self, i0: int, i1: int, j0: int, j1: int) -> "Grid":
        """Grid of nodes i0..i1, j0..j1 (inclusive)."""
        return Grid(self.x0 + i0 * self.s, self.y0 + j0 * self.s, i1 - i0 + 1, j1 - j0 + 1, self.s)

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m


@dataclass(frozen=True, eq=False)
class Field:
    """Grid-sampled values with a validity mask.  Immutable after construction."""

    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = field(default=None)

    dtype: ClassVar[type] = np.complex128

    def __post_init__(self):
        vals = np.array(self.values, dtype=self.dtype, copy=True)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if self.mask is None:
            mask = np.ones(self.grid.shape, dtype=bool)
        else:
            mask = np.array(self.mask, dtype=bool, copy=True)
            if mask.shape != self.grid.shape:
                raise ValueError(f"mask shape {mask.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals[mask])):
            raise ValueError("non-finite values at valid nodes")
        vals.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "mask", mask)

    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())

    def restrict(self, keep: np.ndarray) -> "Field":
        """Same field with the mask intersected with ``keep``."""
        return type(self)(self.grid, self.values, self.mask & keep)

    def crop(self, i0: int, i1: int, j0: int, j1: int) -> "Field":
        """Field restricted to the index box i0..i1, j0..j1 on its own subgrid."""
        sl = (slice(i0, i1 + 1), slice(j0, j1 + 1))
        return type(self)(self.grid.subgrid(i0, i1, j0, j1), self.values[sl], self.mask[sl])

    def crop_window(self, margin: float) -> "Field":
        """Crop away a band of physical width ``margin`` on every side."""
        k = int(round(margin / self.grid.s))
        return self.crop(k, self.grid.nx - 1 - k, k, self.grid.ny - 1 - k)

    def valid_values(self) -> np.ndarray:
        return self.values[self.mask]

    def linf(self) -> float:
        v = self.valid_values()
        return float(np.max(np.abs(v))) if v.size else 0.0


class ComplexField(Field):
    dtype = np.complex128


class RealField(Field):
    dtype = np.float64


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Erode by ``radius`` rings with a 3x3 structuring element; outside the grid counts as invalid."""
    if radius <= 0:
        return mask.copy()
    return ndimage.binary_erosion(mask, structure=np.ones((3, 3), bool), iterations=radius, border_value=0)


def _finish(kind: type[Field], grid: Grid, values: np.ndarray, mask: np.ndarray) -> Field:
    if not mask.any():
        raise EmptyInteriorError("empty interior: no valid node left after mask shrink")
    out = np.where(mask, values, np.nan)
    return kind(grid, out, mask)


def _interior(v: np.ndarray) -> np.ndarray:
    """Full-size NaN array used to hold stencil results at interior nodes."""
    return np.full(v.shape, np.nan, dtype=np.result_type(v.dtype, np.float64))


def _dx(v: np.ndarray, s: float) -> np.ndarray:
    out = _interior(v)
    out[1:-1, 1:-1] = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * s)
    return out


def _dy(v: np.ndarray, s: float) -> np.ndarray:
    out = _interior(v)
    out[1:-1, 1:-1] = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * s)
    return out


def _lap(v: np.ndarray, s: float) -> np.ndarray:
    out = _interior(v)
    out[1:-1, 1:-1] = (
        v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4 * v[1:-1, 1:-1]
    ) / (s * s)
    return out


def _dxx(v, s):
    out = _interior(v)
    out[1:-1, 1:-1] = (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / (s * s)
    return out


def _dyy(v, s):
    out = _interior(v)
    out[1:-1, 1:-1] = (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / (s * s)
    return out


def _dxy(v, s):
    out = _interior(v)
    out[1:-1, 1:-1] = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * s * s)
    return out


def wirtinger_dz(f: Field) -> ComplexField:
    """f_z = (f_x - i f_y)/2 by central differences; mask shrinks by one ring."""
    g = f.grid
    with np.errstate(invalid="ignore"):
        v = 0.5 * (_dx(f.values, g.s) - 1j * _dy(f.values, g.s))
    return _finish(ComplexField, g, v, erode(f.mask, 1))


def wirtinger_dzbar(f: Field) -> ComplexField:
    """f_zbar = (f_x + i f_y)/2 by central differences; mask shrinks by one ring."""
    g = f.grid
    with np.errstate(invalid="ignore"):
        v = 0.5 * (_dx(f.values, g.s) + 1j * _dy(f.values, g.s))
    return _finish(ComplexField, g, v, erode(f.mask, 1))


def laplacian(f: Field) -> Field:
    """Five-point Laplacian, same field kind as the input."""
    with np.errstate(invalid="ignore"):
        v = _lap(f.values, f.grid.s)
    return _finish(type(f), f.grid, v, erode(f.mask, 1))


def grad_norm_sq(R: RealField) -> RealField:
    """|grad R|^2 of a real field, assembled as 4|R_z|^2."""
    Rz = wirtinger_dz(R)
    return _finish(RealField, R.grid, 4.0 * np.abs(Rz.values) ** 2, Rz.mask)


def grad_norm_sq_direct(R: RealField) -> RealField:
    """|grad R|^2 as R_x^2 + R_y^2; independent route for :func:`grad_norm_sq`."""
    s = R.grid.s
    v = _dx(R.values, s) ** 2 + _dy(R.values, s) ** 2
    return _finish(RealField, R.grid, v, erode(R.mask, 1))


def second_derivatives(f: Field) -> tuple[ComplexField, ComplexField, ComplexField]:
    """(f_zz, f_zzbar, f_zbarzbar) from compact nine-point stencils.

    f_zzbar is Δf/4 exactly as :func:`laplacian` computes it.  The output
    mask is the input mask eroded by two rings.
    """
    s = f.grid.s
    v = f.values
    with np.errstate(invalid="ignore"):
        fxx, fyy, fxy = _dxx(v, s), _dyy(v, s), _dxy(v, s)
        fzz = 0.25 * (fxx - fyy - 2j * fxy)
        fzzb = 0.25 * _lap(v, s)
        fzbzb = 0.25 * (fxx - fyy + 2j * fxy)
    m = erode(f.mask, 2)
    return (
        _finish(ComplexField, f.grid, fzz, m),
        _finish(ComplexField, f.grid, fzzb, m),
        _finish(ComplexField, f.grid, fzbzb, m),
    )


def positive_part(R: RealField, floor: float = LOG_FLOOR) -> RealField:
    """R with nodes below ``floor * max(R)`` masked out."""
    vals = R.values
    valid = R.mask & np.isfinite(vals)
    if not valid.any():
        raise FieldNotPositiveError("field not positive: no valid node")
    top = np.max(vals[valid])
    with np.errstate(invalid="ignore"):
        keep = valid & (vals > max(floor * top, 0.0))
    if top <= 0 or not keep.any():
        raise FieldNotPositiveError("field not positive on any valid node")
    return R.restrict(keep)


def log_field(R: RealField, floor: float = LOG_FLOOR) -> RealField:
    P = positive_part(R, floor)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.log(P.values)
    return _finish(RealField, R.grid, v, P.mask)


def log_laplacian_crosscheck(R: RealField, floor: float = LOG_FLOOR) -> RealField:
    """Δ log R assembled as (R ΔR - |∇R|^2) / R^2, without taking a logarithm."""
    P = positive_part(R, floor)
    lap = laplacian(P)
    g2 = grad_norm_sq(P)
    with np.errstate(invalid="ignore"):
        v = (P.values * lap.values - g2.values) / P.values**2
    return _finish(RealField, R.grid, v, lap.mask & g2.mask)


def real_part(f: Field) -> RealField:
    return RealField(f.grid, np.where(f.mask, f.values.real, np.nan), f.mask)


def modulus_sq(f: Field) -> RealField:
    return RealField(f.grid, np.where(f.mask, np.abs(f.values) ** 2, np.nan), f.mask)


def combine_masks(*fields: Field) -> np.ndarray:
    m = np.ones(fields[0].grid.shape, dtype=bool)
    for f in fields:
        m &= f.mask
    return m
