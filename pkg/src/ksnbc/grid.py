"""Structured cell-centered meshes, scalar fields, and discrete calculus.

Meshes are intervals (dim=1) or rectangles (dim=2); rectangles are convex
by construction. Integrals use the midpoint rule (exact for cellwise-linear
data); boundary traces use one-sided linear extrapolation from the two
nearest interior cells.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteFieldError, ValidationError

CSV_FLOAT_FMT = ".17g"


@dataclass(frozen=True)
class Grid:
    """Cell-centered mesh on [0,Lx] or [0,Lx]x[0,Ly]."""

    extents: tuple
    cells: tuple

    def __post_init__(self):
        violations = []
        if len(self.extents) != len(self.cells):
            violations.append(("BadGrid", "extents/cells rank mismatch"))
        if len(self.cells) not in (1, 2):
            violations.append(("BadGrid", "dim must be 1 or 2"))
        for n in self.cells:
            if int(n) != n or n < 4:
                violations.append(("BadGrid", f"need >= 4 cells per axis, got {n}"))
        for L in self.extents:
            if not L > 0:
                violations.append(("BadGrid", f"extent must be positive, got {L}"))
        if violations:
            raise ValidationError(violations)
        object.__setattr__(self, "extents", tuple(float(L) for L in self.extents))
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))

    @property
    def dim(self):
        return len(self.cells)

    @property
    def h(self):
        return tuple(L / n for L, n in zip(self.extents, self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def volume(self):
        return float(np.prod(self.extents))

    @property
    def boundary_measure(self):
        """Perimeter in 2D; endpoint count (= 2) in 1D."""
        if self.dim == 1:
            return 2.0
        lx, ly = self.extents
        return 2.0 * (lx + ly)

    def shape(self):
        return self.cells

    def centers(self):
        """Cell-center coordinate arrays, one per axis (1D arrays)."""
        return tuple(
            (np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.h)
        )

    def meshgrid(self):
        return np.meshgrid(*self.centers(), indexing="ij")

    def boundary_faces(self):
        """Yield (cell_index, axis, sign, area) covering each boundary face once."""
        if self.dim == 1:
            (n,) = self.cells
            yield (0,), 0, -1, 1.0
            yield (n - 1,), 0, +1, 1.0
            return
        nx, ny = self.cells
        hx, hy = self.h
        for j in range(ny):
            yield (0, j), 0, -1, hy
            yield (nx - 1, j), 0, +1, hy
        for i in range(nx):
            yield (i, 0), 1, -1, hx
            yield (i, ny - 1), 1, +1, hx

    def boundary_sides(self):
        """Vectorized boundary description: (axis, sign, outer, inner, area).

        `outer` / `inner` index the boundary cell layer and the next layer
        inward, as numpy slicing tuples.
        """
        sides = []
        for axis in range(self.dim):
            area = self.cell_volume / self.h[axis]
            sl = [slice(None)] * self.dim
            lo_outer, lo_inner = list(sl), list(sl)
            lo_outer[axis], lo_inner[axis] = 0, 1
            hi_outer, hi_inner = list(sl), list(sl)
            hi_outer[axis], hi_inner[axis] = -1, -2
            sides.append((axis, -1, tuple(lo_outer), tuple(lo_inner), area))
            sides.append((axis, +1, tuple(hi_outer), tuple(hi_inner), area))
        return sides


@dataclass
class Field:
    """Scalar grid function: one value per cell."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape():
            raise ValidationError(
                [("BadField", f"shape {self.values.shape} != grid {self.grid.shape()}")]
            )

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape(), float(c)))

    @classmethod
    def zeros(cls, grid):
        return cls.constant(grid, 0.0)

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(*grid.meshgrid()))

    def copy(self):
        return Field(self.grid, self.values.copy())

    def is_finite(self):
        # single-reduction check: any NaN/Inf poisons the sum
        return bool(np.isfinite(self.values.sum()))

    def max(self):
        return float(self.values.max())

    def min(self):
        return float(self.values.min())


def _require_finite(f: Field):
    if not f.is_finite():
        raise NonFiniteFieldError("field contains non-finite values")


def integrate(f: Field) -> float:
    """Midpoint-rule integral over the domain."""
    _require_finite(f)
    return float(f.values.sum() * f.grid.cell_volume)


def lp_norm(f: Field, r: float) -> float:
    """(integral |f|^r)^(1/r)."""
    if r < 1:
        raise ValidationError([("BadExponent", f"lp_norm needs r >= 1, got {r}")])
    _require_finite(f)
    return float((np.abs(f.values) ** r).sum() * f.grid.cell_volume) ** (1.0 / r)


def face_differences(f: Field, axis: int) -> np.ndarray:
    """Interior face gradients along `axis`: (f[i+1]-f[i]) / h."""
    return np.diff(f.values, axis=axis) / f.grid.h[axis]


def grad_sq_integral(f: Field) -> float:
    """Face-difference quadrature of integral |grad f|^2.

    Boundary faces carry the homogeneous Neumann data of the owning
    equation and contribute zero.
    """
    _require_finite(f)
    total = 0.0
    for axis in range(f.grid.dim):
        d = face_differences(f, axis)
        total += float((d * d).sum()) * f.grid.cell_volume
    return total


def cell_gradient_sq(f: Field) -> Field:
    """|grad f|^2 reconstructed at cell centers.

    Per axis the cell value is the average of its two face differences;
    boundary faces use the imposed homogeneous Neumann data (0).
    """
    _require_finite(f)
    out = np.zeros(f.grid.shape())
    for axis in range(f.grid.dim):
        d = face_differences(f, axis)
        pad = [(0, 0)] * f.grid.dim
        pad[axis] = (1, 1)
        dp = np.pad(d, pad)  # zero boundary-face gradients
        lo = [slice(None)] * f.grid.dim
        hi = [slice(None)] * f.grid.dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        g = 0.5 * (dp[tuple(lo)] + dp[tuple(hi)])
        out += g * g
    return Field(f.grid, out)


def boundary_traces(f: Field):
    """Per-side boundary traces by one-sided linear extrapolation.

    Yields (trace_array, area) per side. Traces of a nonnegative field are
    floored at 0 where the extrapolation dips negative.
    """
    _require_finite(f)
    nonneg = f.values.min() >= 0.0
    for _axis, _sign, outer, inner, area in f.grid.boundary_sides():
        tr = 1.5 * f.values[outer] - 0.5 * f.values[inner]
        if nonneg:
            tr = np.maximum(tr, 0.0)
        yield np.atleast_1d(tr), area


def boundary_integral_pow(f: Field, q: float) -> float:
    """Sum over boundary faces of |trace|^q times face area."""
    if not q > 0:
        raise ValidationError([("BadExponent", f"need q > 0, got {q}")])
    total = 0.0
    for tr, area in boundary_traces(f):
        total += float((np.abs(tr) ** q).sum()) * area
    return total


def save_field_csv(f: Field, path):
    """Write a field snapshot: header i[,j],x[,y],value, row-major cells."""
    centers = f.grid.centers()
    with open(path, "w") as fh:
        if f.grid.dim == 1:
            fh.write("i,x,value\n")
            for i, val in enumerate(f.values):
                fh.write(f"{i},{centers[0][i]:{CSV_FLOAT_FMT}},{val:{CSV_FLOAT_FMT}}\n")
        else:
            fh.write("i,j,x,y,value\n")
            nx, ny = f.grid.cells
            for i in range(nx):
                for j in range(ny):
                    fh.write(
                        f"{i},{j},{centers[0][i]:{CSV_FLOAT_FMT}},"
                        f"{centers[1][j]:{CSV_FLOAT_FMT}},{f.values[i, j]:{CSV_FLOAT_FMT}}\n"
                    )


def load_field_csv(grid: Grid, path) -> Field:
    data = np.genfromtxt(path, delimiter=",", names=True)
    vals = np.asarray(data["value"], dtype=float).reshape(grid.shape())
    return Field(grid, vals)
