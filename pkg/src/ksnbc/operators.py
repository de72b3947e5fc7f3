"""Spatial discretizations: Neumann Laplacian, chemotaxis divergence,
and the shifted-Laplacian (Helmholtz) solves.

All operators are conservative finite-volume stencils, so face fluxes
telescope and the discrete divergence theorem holds exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergenceError, NonFiniteFieldError, ValidationError
from .grid import Field, Grid, boundary_traces, face_differences

HOMOGENEOUS = "homogeneous"
POWER_LAW = "power"


@dataclass(frozen=True)
class FluxSpec:
    """Boundary data for the cell-density equation.

    kind "homogeneous": zero normal derivative. kind "power": outward
    normal derivative equals trace^exponent (mass inflow).
    """

    kind: str
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind not in (HOMOGENEOUS, POWER_LAW):
            raise ValidationError([("BadFlux", f"unknown flux kind {self.kind!r}")])
        if self.kind == POWER_LAW and not self.exponent > 1:
            raise ValidationError(
                [("BadExponent", f"power-law exponent must be > 1, got {self.exponent}")]
            )

    @classmethod
    def homogeneous(cls):
        return cls(HOMOGENEOUS)

    @classmethod
    def power_law(cls, p):
        return cls(POWER_LAW, float(p))


@dataclass(frozen=True)
class LinearSolveReport:
    iterations: int
    residual: float
    converged: bool


def laplacian_homogeneous(f: Field) -> Field:
    """Discrete Laplacian with zero-flux boundary faces."""
    if not f.is_finite():
        raise NonFiniteFieldError("laplacian input non-finite")
    out = np.zeros(f.grid.shape())
    vol = f.grid.cell_volume
    for axis in range(f.grid.dim):
        d = face_differences(f, axis)  # gradient at interior faces
        area = vol / f.grid.h[axis]
        pad = [(0, 0)] * f.grid.dim
        pad[axis] = (1, 1)
        flux = np.pad(d, pad) * area  # boundary faces: zero flux
        lo = [slice(None)] * f.grid.dim
        hi = [slice(None)] * f.grid.dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        out += (flux[tuple(hi)] - flux[tuple(lo)]) / vol
    return Field(f.grid, out)


def boundary_flux_source(f: Field, flux: FluxSpec) -> Field:
    """Per-cell source from the prescribed boundary normal derivative.

    Zero everywhere for homogeneous flux; trace^p * face_area / cell_volume
    on boundary cells for the power law (positive normal derivative adds
    mass).
    """
    out = np.zeros(f.grid.shape())
    if flux.kind == HOMOGENEOUS:
        return Field(f.grid, out)
    vol = f.grid.cell_volume
    traces = list(boundary_traces(f))
    for (tr, area), (_axis, _sign, outer, _inner, _area) in zip(
        traces, f.grid.boundary_sides()
    ):
        out[outer] += (np.abs(tr) ** flux.exponent).reshape(out[outer].shape) * area / vol
    return Field(f.grid, out)


def laplacian(f: Field, flux: FluxSpec) -> Field:
    """Finite-volume Laplacian with the given boundary flux."""
    lap = laplacian_homogeneous(f)
    if flux.kind == HOMOGENEOUS:
        return lap
    src = boundary_flux_source(f, flux)
    return Field(f.grid, lap.values + src.values)


def chemo_divergence(u: Field, v: Field) -> Field:
    """Discrete div(u grad v): central-difference grad v on faces,
    first-order upwind u on faces. Boundary faces contribute zero because
    the signal satisfies a zero-flux condition.
    """
    if not (u.is_finite() and v.is_finite()):
        raise NonFiniteFieldError("chemo_divergence input non-finite")
    out = np.zeros(u.grid.shape())
    for axis in range(u.grid.dim):
        g = face_differences(v, axis)  # grad v at interior faces, oriented +axis
        lo = [slice(None)] * u.grid.dim
        hi = [slice(None)] * u.grid.dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        u_face = np.where(g > 0, u.values[lo], u.values[hi])
        flux = u_face * g / u.grid.h[axis]  # face flux * area / cell volume
        out[lo] += flux  # right face of the lo cell
        out[hi] -= flux  # left face of the hi cell
    return Field(u.grid, out)


@lru_cache(maxsize=8)
def neumann_laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse matrix of the homogeneous-Neumann Laplacian (row-major cells)."""
    n_total = int(np.prod(grid.cells))
    eye_parts = [sp.identity(n, format="csr") for n in grid.cells]
    mat = sp.csr_matrix((n_total, n_total))
    for axis, (n, h) in enumerate(zip(grid.cells, grid.h)):
        main = -2.0 * np.ones(n)
        main[0] = main[-1] = -1.0  # zero-flux closure
        off = np.ones(n - 1)
        lap1d = sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2
        parts = list(eye_parts)
        parts[axis] = lap1d
        term = parts[0]
        for part in parts[1:]:
            term = sp.kron(term, part, format="csr")
        mat = mat + term
    return mat.tocsr()


@lru_cache(maxsize=64)
def _system_matrix(grid: Grid, sigma: float) -> sp.csr_matrix:
    n_total = int(np.prod(grid.cells))
    return (sigma * sp.identity(n_total) - neumann_laplacian_matrix(grid)).tocsr()


@lru_cache(maxsize=64)
def _factorized(grid: Grid, sigma: float):
    return spla.splu(_system_matrix(grid, sigma).tocsc())


@lru_cache(maxsize=64)
def _dct_eigenvalues(grid: Grid, sigma: float) -> np.ndarray:
    """Eigenvalues of sigma*I - lap on the cosine (DCT-II) basis."""
    eig = np.full(grid.shape(), sigma)
    for axis, (n, h) in enumerate(zip(grid.cells, grid.h)):
        lam1d = (2.0 / h**2) * (1.0 - np.cos(np.pi * np.arange(n) / n))
        shape = [1] * grid.dim
        shape[axis] = n
        eig = eig + lam1d.reshape(shape)
    return eig


def _dct_solve(grid: Grid, sigma: float, b: np.ndarray) -> np.ndarray:
    """Fast diagonalization solve: the cell-centered Neumann Laplacian is
    diagonal in the per-axis DCT-II basis on a uniform grid."""
    bh = scipy.fft.dctn(b, type=2, norm="ortho")
    xh = bh / _dct_eigenvalues(grid, sigma)
    return scipy.fft.idctn(xh, type=2, norm="ortho")


def helmholtz_solve(
    rhs: Field,
    sigma: float,
    tol: float = 1e-10,
    maxiter: int = 10000,
    backend: str = "dct",
):
    """Solve (sigma I - lap) w = rhs with homogeneous Neumann boundary.

    backend "dct": exact fast diagonalization (uniform grids). backend
    "direct": cached sparse LU. backend "cg": Jacobi-preconditioned
    conjugate gradients at relative residual `tol`.
    """
    if not sigma > 0:
        raise ValidationError([("BadCoefficient", f"sigma must be > 0, got {sigma}")])
    if not rhs.is_finite():
        raise NonFiniteFieldError("helmholtz rhs non-finite")
    grid = rhs.grid
    b = rhs.values.ravel()
    b_norm = float(np.linalg.norm(b))
    if backend == "dct":
        x = _dct_solve(grid, float(sigma), rhs.values).ravel()
        res = float(np.linalg.norm(_system_matrix(grid, float(sigma)) @ x - b))
        rel = res / b_norm if b_norm > 0 else res
        report = LinearSolveReport(iterations=1, residual=rel, converged=True)
        return Field(grid, x.reshape(grid.shape())), report
    if backend == "direct":
        x = _factorized(grid, float(sigma)).solve(b)
        res = float(np.linalg.norm(_system_matrix(grid, float(sigma)) @ x - b))
        rel = res / b_norm if b_norm > 0 else res
        report = LinearSolveReport(iterations=1, residual=rel, converged=True)
        return Field(grid, x.reshape(grid.shape())), report
    if backend != "cg":
        raise ValidationError([("BadBackend", f"unknown solver backend {backend!r}")])
    a_mat = _system_matrix(grid, float(sigma))
    diag = a_mat.diagonal()
    precond = spla.LinearOperator(a_mat.shape, matvec=lambda z: z / diag)
    iters = 0

    def _count(_):
        nonlocal iters
        iters += 1

    x, info = spla.cg(a_mat, b, rtol=tol, atol=0.0, maxiter=maxiter, M=precond,
                      callback=_count)
    res = float(np.linalg.norm(a_mat @ x - b))
    rel = res / b_norm if b_norm > 0 else res
    report = LinearSolveReport(iterations=iters, residual=rel, converged=(info == 0))
    if info != 0:
        raise NoConvergenceError(report)
    return Field(grid, x.reshape(grid.shape())), report
