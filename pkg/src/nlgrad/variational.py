"""Projection onto N, Poincare constants and the quadratic nonlocal Neumann problem.

Discrete inner products carry the weight ``h``: ``<u, v> = h sum u v`` on
nodes and ``<p, q> = h sum p q`` on the Omega midpoints where gradients live.
The energy is ``1/2 |D u|^2 - <F, u>`` minimised over the orthogonal
complement of N in L2(Omega_delta).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, cg

from .domain import DomainGrid, Field, Support
from .errors import ConvergenceError
from .kernels import KernelTable
from .operators import gradient_matrix, table_for_grid
from .zero_grad import NBasis, build_n_basis

EIGEN_TOL = 1e-8
CG_RTOL = 1e-10


def project_N(basis: NBasis, u: Field) -> Field:
    """Orthogonal projection onto span(N) in the ``h``-weighted L2 product."""
    if u.grid is not basis.grid or u.support is not Support.OMEGA_DELTA:
        raise ValueError("u must be an Omega_delta field on the basis grid")
    q = basis.ortho
    return Field(u.grid, Support.OMEGA_DELTA, q @ (q.T @ u.values))


def _complement(cols: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(cols)``."""
    q, _ = np.linalg.qr(cols, mode="complete")
    return q[:, cols.shape[1] :]


class PoincareMode(enum.Enum):
    ZERO_TRACE_ZERO_MEAN = "zero-trace-zero-mean"
    PERP = "perp"


@dataclass(frozen=True)
class PoincareResult:
    constant: float
    lambda_min: float
    iterations: int
    rel_change: float
    dim: int


def _inverse_iteration(S: np.ndarray, tol: float = EIGEN_TOL, max_iter: int = 2000, seed: int = 0):
    chol = sla.cho_factor(S)
    x = np.random.default_rng(seed).standard_normal(S.shape[0])
    x /= np.linalg.norm(x)
    lam = np.inf
    for it in range(1, max_iter + 1):
        y = sla.cho_solve(chol, x)
        y /= np.linalg.norm(y)
        new = float(y @ S @ y)
        change = abs(new - lam) / new
        x, lam = y, new
        if change < tol:
            return lam, it, change
    raise ConvergenceError(f"inverse iteration stalled after {max_iter} steps (change {change:.3e})")


def poincare_constant(
    basis: NBasis, table: KernelTable, grid: DomainGrid, mode="zero-trace-zero-mean", seed: int = 0
) -> PoincareResult:
    """Best constant in ``|u|_{L2(Omega_delta)} <= C |D u|_{L2(Omega)}``.

    Mode ``zero-trace-zero-mean`` restricts to fields vanishing on Gamma_delta
    with zero Omega-mean; mode ``perp`` to the orthogonal complement of N.
    """
    mode = PoincareMode(mode)
    G = gradient_matrix(table, grid)
    if mode is PoincareMode.ZERO_TRACE_ZERO_MEAN:
        Go = G[:, grid.omega]
        Z = _complement(np.ones((len(grid.omega), 1)))
        GZ = Go @ Z
    else:
        if basis.grid is not grid:
            raise ValueError("basis belongs to a different grid")
        Z = _complement(basis.columns)
        GZ = G @ Z
    # Both norms carry the same weight h, which cancels in the Rayleigh quotient.
    S = GZ.T @ GZ
    lam, it, change = _inverse_iteration(S, seed=seed)
    if lam <= 0:
        raise ConvergenceError(f"non-positive smallest eigenvalue {lam:.3e}")
    return PoincareResult(1.0 / np.sqrt(lam), lam, it, change, S.shape[0])


@dataclass(frozen=True, eq=False)
class NeumannProblem:
    grid: DomainGrid
    s: float
    table: KernelTable
    forcing: Field

    def __post_init__(self):
        if self.forcing.grid is not self.grid or self.forcing.support is not Support.OMEGA_DELTA:
            raise ValueError("forcing must be an Omega_delta field on the problem grid")


@dataclass(frozen=True, eq=False)
class NeumannSolution:
    minimizer: Field
    energy: float
    el_residual: float
    full_el_residual: float
    projection_norm: float
    iterations: int
    energy_history: list = field(repr=False)


def _energy(G, h, u, f):
    Gu = G @ u
    return 0.5 * h * Gu @ Gu - h * f @ u


def minimize_neumann(problem: NeumannProblem, basis: NBasis, x0=None) -> NeumannSolution:
    """Minimise the quadratic energy over N-perp by projected conjugate gradients."""
    grid, h = problem.grid, problem.grid.h
    if basis.grid is not grid:
        raise ValueError("basis belongs to a different grid")
    G = gradient_matrix(problem.table, grid)
    K = h * (G.T @ G)
    Q = basis.ortho
    n = grid.n_cells

    def proj(v):
        return v - Q @ (Q.T @ v)

    f = problem.forcing.values
    rhs = proj(h * f)
    op = LinearOperator((n, n), matvec=lambda v: proj(K @ proj(v)), dtype=float)
    history: list[float] = []
    iters = [0]

    def record(xk):
        iters[0] += 1
        history.append(_energy(G, h, xk, f))

    dim = n - basis.dim
    start = np.zeros(n) if x0 is None else proj(np.asarray(x0, dtype=float))
    if np.linalg.norm(rhs) == 0 and np.linalg.norm(start) == 0:
        u = start
    else:
        u, info = cg(op, rhs, x0=start, rtol=CG_RTOL, atol=0.0, maxiter=10 * dim, callback=record)
        if info != 0:
            raise ConvergenceError(f"CG did not reach {CG_RTOL:g} in {10 * dim} iterations")
        u = proj(u)
    full = K @ u - h * f
    return NeumannSolution(
        minimizer=Field(grid, Support.OMEGA_DELTA, u),
        energy=float(_energy(G, h, u, f)),
        el_residual=float(np.abs(proj(full)).max()),
        full_el_residual=float(np.abs(full).max()),
        projection_norm=float(np.sqrt(h) * np.linalg.norm(Q.T @ u)),
        iterations=iters[0],
        energy_history=history,
    )


def project_forcing(basis: NBasis, F: Field) -> Field:
    """Remove the N-component of a forcing, so that it satisfies the compatibility condition."""
    return F - project_N(basis, F)


def classical_neumann(grid: DomainGrid, F: Field) -> tuple[Field, float]:
    """Zero-mean solution of ``-u'' = F`` on Omega with ``u' = 0`` at both ends.

    Returns the solution on the Omega nodes and the Omega-mean that was removed
    from ``F`` to make the problem solvable.
    """
    if F.support is not Support.OMEGA:
        raise ValueError("F must be an Omega field")
    h = grid.h
    f = F.values
    mean = float(f.mean())
    f = f - mean
    n = len(f)
    ab = np.zeros((3, n))
    ab[0, 1:] = -1.0
    ab[1, :] = 2.0
    ab[1, 0] = ab[1, -1] = 1.0
    ab[2, :-1] = -1.0
    rhs = h * h * f
    # The Neumann matrix is singular on constants; pin the first value instead.
    ab[1, 0], ab[0, 1] = 1.0, 0.0
    rhs[0] = 0.0
    u = sla.solve_banded((1, 1), ab, rhs)
    return Field(grid, Support.OMEGA, u - u.mean()), mean


def classical_energy(grid: DomainGrid, u: Field, F: Field) -> float:
    """Discrete ``1/2 int u'^2 - int F u`` on Omega."""
    du = np.diff(u.values) / grid.h
    return float(0.5 * grid.h * du @ du - grid.h * F.values @ u.values)


@dataclass(frozen=True)
class SweepRow:
    s: float
    l2_error: float
    energy_gap: float
    el_residual: float


def localization_sweep(a, b, delta, mu, F, s_list, n_cells, exact=None) -> list[SweepRow]:
    """Compare nonlocal minimisers with the classical Neumann solution for each ``s``.

    ``F`` is a vectorised callable evaluated on Omega; it is set to zero on
    Gamma_delta.  The reference is ``exact`` (a callable, mean-normalised on
    the Omega nodes) when given, else the finite-difference solution.
    """
    from .domain import build_grid

    grid = build_grid(a, b, delta, n_cells)
    x = grid.nodes
    in_omega = np.zeros(grid.n_cells, dtype=bool)
    in_omega[grid.omega] = True
    forcing = Field(grid, Support.OMEGA_DELTA, np.where(in_omega, np.asarray(F(x), dtype=float) * np.ones_like(x), 0.0))
    F_omega = forcing.restrict(Support.OMEGA)
    u_cl, _ = classical_neumann(grid, F_omega)
    if exact is not None:
        ref = np.asarray(exact(F_omega.x), dtype=float)
        u_cl = Field(grid, Support.OMEGA, ref - ref.mean())
    e_cl = classical_energy(grid, u_cl, F_omega)
    rows = []
    for s in s_list:
        table = table_for_grid(grid, s, mu)
        basis = build_n_basis(table, grid)
        sol = minimize_neumann(NeumannProblem(grid, s, table, forcing), basis)
        u = sol.minimizer.restrict(Support.OMEGA).values
        diff = (u - u.mean()) - u_cl.values
        rows.append(
            SweepRow(
                s=float(s),
                l2_error=float(np.sqrt(grid.h * diff @ diff)),
                energy_gap=abs(sol.energy - e_cl),
                el_residual=sol.el_residual,
            )
        )
    return rows
