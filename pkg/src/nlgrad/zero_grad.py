"""The convolution boundary problem (C) and the discrete space N of zero-gradient fields.

Problem (C): given a constant ``c`` and collar data ``g``, find ``h`` on
Omega_delta with ``Q * h = c`` at every Omega node and ``h = g`` on
Gamma_delta.  Unknowns sit at the Omega nodes, so the collocation matrix is
square, symmetric and Toeplitz.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres

from .domain import DomainGrid, Field, Support, assemble, integrate
from .errors import NLGradError, ToleranceError
from .kernels import KernelTable
from .operators import TorusTransform, _check, apply_P, convolution_matrix, convolve_Q, nonlocal_gradient

RESIDUAL_TOL = 1e-8
DENSE_LIMIT = 4000


@dataclass(frozen=True)
class BoundaryData:
    c: float
    g: Field

    def __post_init__(self):
        if self.g.support is not Support.GAMMA_DELTA:
            raise ValueError("boundary data g must live on Gamma_delta")
        if not np.isfinite(self.c):
            raise ValueError("c must be finite")


class CollocationSystem:
    """Square collocation matrix of (C) with a cached factorisation."""

    def __init__(self, table: KernelTable, grid: DomainGrid):
        _check(table, grid)
        self.table, self.grid = table, grid
        self.dense = grid.n_cells <= DENSE_LIMIT
        mat = convolution_matrix(table, grid) if self.dense else None
        if self.dense:
            self.A = mat[:, grid.omega]
            self.B = mat[:, grid.gamma]
            anorm = np.abs(self.A).sum(axis=0).max()
            self.lu = sla.lu_factor(self.A, check_finite=False)
            rcond, info = sla.lapack.dgecon(self.lu[0], anorm, norm="1")
            self.condition = 1.0 / rcond if rcond > 0 else np.inf
            if not np.isfinite(self.condition) or self.condition > 1e12:
                raise NLGradError(f"collocation matrix is numerically singular (cond ~ {self.condition:.3e})")
        else:
            # Omega nodes are consecutive, so A is symmetric Toeplitz.
            m = grid.stencil_width
            col = np.zeros(len(grid.omega))
            col[: m + 1] = grid.h * table.conv_weights[m:]
            self.toeplitz_col = col
            self.condition = float("nan")

    def _matvec(self, x):
        return sla.matmul_toeplitz(self.toeplitz_col, x)

    def boundary_rhs(self, g: np.ndarray) -> np.ndarray:
        """Contribution ``-(Q * 1_Gamma g)`` at the Omega nodes; ``g`` may be 2-D."""
        if self.dense:
            return -self.B @ g
        grid = self.grid
        pad = np.zeros(grid.n_cells)
        pad[grid.gamma] = g
        m = grid.stencil_width
        return -np.convolve(pad, self.table.conv_weights, "valid")[grid.omega - m] * grid.h

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.dense:
            return sla.lu_solve(self.lu, rhs, check_finite=False)
        n = len(self.toeplitz_col)
        op = LinearOperator((n, n), matvec=self._matvec, dtype=float)
        cols = rhs.reshape(n, -1)
        out = np.empty_like(cols)
        for j in range(cols.shape[1]):
            out[:, j], info = gmres(op, cols[:, j], rtol=1e-12, atol=0.0, restart=200, maxiter=50)
            if info != 0:
                raise NLGradError(f"GMRES did not converge (info={info})")
        return out.reshape(rhs.shape)


@functools.lru_cache(maxsize=8)
def collocation_system(table: KernelTable, grid: DomainGrid) -> CollocationSystem:
    return CollocationSystem(table, grid)


def c_residual(table: KernelTable, h: Field, c: float) -> float:
    """Max-norm defect of ``Q * h = c`` over Omega."""
    return float(np.abs(convolve_Q(table, h).values - c).max())


def solve_C(table: KernelTable, grid: DomainGrid, data: BoundaryData) -> Field:
    """Unique solution of (C) for the constant ``data.c`` and collar data ``data.g``."""
    if data.g.grid is not grid:
        raise ValueError("boundary data lives on a different grid")
    system = collocation_system(table, grid)
    sol = system.solve(data.c + system.boundary_rhs(data.g.values))
    h = assemble(grid, sol, data.g.values)
    res = c_residual(table, h, data.c)
    scale = max(1.0, abs(data.c), float(np.abs(data.g.values).max(initial=0.0)))
    if res > RESIDUAL_TOL * scale:
        raise ToleranceError(f"(C) residual {res:.3e} exceeds {RESIDUAL_TOL:g}")
    return h


@dataclass(frozen=True, eq=False)
class NBasis:
    """Columns spanning the discrete N and an orthonormal factor for projections.

    ``columns[:, 0]`` solves (C) with ``(c, g) = (1, 0)``; column ``1 + j`` with
    ``(0, e_j)`` for the ``j``-th Gamma_delta node.  ``ortho`` has columns
    orthonormal in the Euclidean product, which is the ``h``-weighted product
    up to the constant factor ``h``.
    """

    grid: DomainGrid
    s: float
    columns: np.ndarray
    ortho: np.ndarray
    min_singular_value: float
    max_residual: float

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    def column(self, k: int) -> Field:
        return Field(self.grid, Support.OMEGA_DELTA, self.columns[:, k])


def build_n_basis(table: KernelTable, grid: DomainGrid) -> NBasis:
    system = collocation_system(table, grid)
    n_gamma = len(grid.gamma)
    g_block = np.zeros((n_gamma, 1 + n_gamma))
    g_block[:, 1:] = np.eye(n_gamma)
    rhs = system.boundary_rhs(g_block)
    rhs[:, 0] += 1.0
    sol = system.solve(rhs)
    cols = np.empty((grid.n_cells, 1 + n_gamma))
    cols[grid.omega] = sol
    cols[grid.gamma] = g_block

    qcols = convolution_matrix(table, grid) @ cols if system.dense else None
    if qcols is None:
        qcols = np.column_stack([convolve_Q(table, Field(grid, Support.OMEGA_DELTA, c)).values for c in cols.T])
    target = np.zeros(1 + n_gamma)
    target[0] = 1.0
    max_res = float(np.abs(qcols - target).max())
    if max_res > RESIDUAL_TOL:
        raise ToleranceError(f"basis column residual {max_res:.3e} exceeds {RESIDUAL_TOL:g}")

    weighted = np.sqrt(grid.h) * cols
    ortho, r = np.linalg.qr(weighted)
    sv = sla.svdvals(r)
    if sv.min() <= 1e-10:
        raise NLGradError(f"basis is rank deficient (smallest singular value {sv.min():.3e})")
    for arr in (cols, ortho):
        arr.setflags(write=False)
    return NBasis(grid, table.s, cols, ortho, float(sv.min()), max_res)


def phi_map(table: KernelTable, h: Field) -> tuple[float, Field]:
    """``(int_Omega Q * h, h on Gamma_delta)``."""
    return integrate(convolve_Q(table, h)), h.restrict(Support.GAMMA_DELTA)


def psi_map(h: Field) -> tuple[float, Field]:
    """``(int_Omega h, h on Gamma_delta)``."""
    return integrate(h.restrict(Support.OMEGA)), h.restrict(Support.GAMMA_DELTA)


def psi_matrix(basis: NBasis) -> np.ndarray:
    """Matrix of the Psi map on the basis columns; square of size ``basis.dim``."""
    grid = basis.grid
    top = grid.h * basis.columns[grid.omega].sum(axis=0)
    return np.vstack([top, basis.columns[grid.gamma]])


def smooth_n_member(torus: TorusTransform, v: np.ndarray, grid: DomainGrid) -> Field:
    """``P v`` on Omega_delta for torus samples ``v`` that are constant on the closure of Omega."""
    v = np.asarray(v, dtype=float)
    x = torus.points
    on_omega = v[(x >= grid.a) & (x <= grid.b)]
    if on_omega.size == 0:
        raise ValueError("torus has no samples in Omega")
    spread = on_omega.max() - on_omega.min()
    if spread > 1e-12:
        raise ValueError(f"v must be constant on the closure of Omega (max-min = {spread:.3e})")
    return torus.to_grid(grid, apply_P(torus, v))


def uniqueness_check(table: KernelTable, grid: DomainGrid) -> float:
    """Omega-integral of the (C)-solution for ``(1, 0)``; nonzero by uniqueness."""
    zero = Field(grid, Support.GAMMA_DELTA, np.zeros(len(grid.gamma)))
    h1 = solve_C(table, grid, BoundaryData(1.0, zero))
    m = integrate(h1.restrict(Support.OMEGA))
    if abs(m) <= 1e-8:
        raise NLGradError(f"Omega-integral of the (1, 0) solution vanishes ({m:.3e})")
    return m


def gradient_defect(table: KernelTable, h: Field) -> float:
    """Max-norm of the nonlocal gradient over Omega; zero for members of N."""
    return float(np.abs(nonlocal_gradient(table, h).values).max())
