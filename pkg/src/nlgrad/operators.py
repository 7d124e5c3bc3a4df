"""Discrete convolution with Q, nonlocal gradient/divergence and the torus inverse P.

The nonlocal gradient is realised through the translation identity
``D u = (Q * u)'``: first ``Q * u`` is formed at the Omega nodes with the
exact cell-averaged weights, then differentiated by a fourth-order staggered
stencil onto the midpoints between consecutive Omega nodes.  Two closed-form
one-sided closures handle the first and last midpoint.  This makes the
gradient exact for affine data and makes every discrete solution of the
convolution problem (C) an exact zero of the gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .domain import DomainGrid, Field, Support
from .errors import PositivityError
from .kernels import STAGGER_COEFFS, CutoffProfile, KernelTable, build_kernel_table

# Extension plateau and cutoff radii, in units of delta.
EXTENSION_RADII = (3.0, 6.0)
# One-sided closure for the first midpoint, applied to the first four Omega nodes.
CLOSURE_COEFFS = np.array([-23.0, 21.0, 3.0, -1.0]) / 24.0


def table_for_grid(grid: DomainGrid, s: float, mu: float = 0.5) -> KernelTable:
    """Kernel table whose horizon is the grid's snapped horizon."""
    return build_kernel_table(CutoffProfile(grid.delta_snapped, mu), s, grid.h)


def _check(table: KernelTable, grid: DomainGrid) -> None:
    if not math.isclose(table.grid_h, grid.h, rel_tol=1e-12):
        raise ValueError(f"kernel table built for h={table.grid_h}, grid has h={grid.h}")
    if table.stencil_width != grid.stencil_width:
        raise ValueError(
            f"kernel stencil half-width {table.stencil_width} does not match grid horizon "
            f"{grid.stencil_width} cells"
        )


def _need(f: Field, support: Support) -> None:
    if f.support is not support:
        raise ValueError(f"expected a field on {support.value}, got {f.support.value}")


def _q_at_omega(table: KernelTable, grid: DomainGrid, values: np.ndarray) -> np.ndarray:
    m = grid.stencil_width
    full = np.convolve(values, table.conv_weights, mode="valid") * grid.h  # nodes m .. n-m-1
    return full[grid.omega - m]


def convolve_Q(table: KernelTable, u: Field) -> Field:
    """``(Q * u)`` at the Omega nodes for ``u`` given on Omega_delta."""
    _need(u, Support.OMEGA_DELTA)
    _check(table, u.grid)
    return Field(u.grid, Support.OMEGA, _q_at_omega(table, u.grid, u.values))


def stagger_matrix(n: int, h: float) -> sparse.csr_matrix:
    """Midpoint derivative of ``n`` node values, shape ``(n - 1, n)``."""
    if n < 5:
        raise ValueError("need at least five Omega nodes")
    rows, cols, vals = [], [], []
    for i in range(1, n - 2):
        rows += [i] * 4
        cols += [i - 1, i, i + 1, i + 2]
        vals += list(STAGGER_COEFFS)
    rows += [0] * 4 + [n - 2] * 4
    cols += [0, 1, 2, 3] + [n - 4, n - 3, n - 2, n - 1]
    vals += list(CLOSURE_COEFFS) + list(-CLOSURE_COEFFS[::-1])
    return sparse.csr_matrix((np.array(vals) / h, (rows, cols)), shape=(n - 1, n))


def _stagger(values: np.ndarray, h: float) -> np.ndarray:
    v = values
    out = np.empty(len(v) - 1)
    c = STAGGER_COEFFS
    out[1:-1] = c[0] * v[:-3] + c[1] * v[1:-2] + c[2] * v[2:-1] + c[3] * v[3:]
    out[0] = CLOSURE_COEFFS @ v[:4]
    out[-1] = -CLOSURE_COEFFS[::-1] @ v[-4:]
    return out / h


def nonlocal_gradient(table: KernelTable, u: Field) -> Field:
    """``D u`` at the midpoints between consecutive Omega nodes."""
    _need(u, Support.OMEGA_DELTA)
    _check(table, u.grid)
    qu = _q_at_omega(table, u.grid, u.values)
    return Field(u.grid, Support.OMEGA_EDGES, _stagger(qu, u.grid.h))


def nonlocal_divergence(table: KernelTable, psi: Field) -> Field:
    """Divergence of a node field on Omega_delta; in 1-D it is the gradient stencil."""
    return nonlocal_gradient(table, psi)


def convolution_matrix(table: KernelTable, grid: DomainGrid) -> np.ndarray:
    """Dense ``Q``-matrix from Omega_delta nodes to Omega nodes."""
    _check(table, grid)
    m, n = grid.stencil_width, grid.n_cells
    mat = np.zeros((len(grid.omega), n))
    rows = np.arange(len(grid.omega))
    for k in range(-m, m + 1):
        mat[rows, grid.omega - k] = grid.h * table.conv_weights[k + m]
    return mat


def gradient_matrix(table: KernelTable, grid: DomainGrid) -> np.ndarray:
    """Dense gradient matrix, shape ``(#edges, n_cells)``."""
    return stagger_matrix(len(grid.omega), grid.h) @ convolution_matrix(table, grid)


def _gradient_transpose(table: KernelTable, grid: DomainGrid, phi: np.ndarray) -> np.ndarray:
    """``G^T phi`` as a node vector on Omega_delta."""
    w = stagger_matrix(len(grid.omega), grid.h).T @ phi  # on Omega nodes
    padded = np.zeros(grid.n_cells)
    padded[grid.omega] = w
    m = grid.stencil_width
    # Q is even, so its transpose is the same convolution read from the other side.
    spread = np.convolve(padded, table.conv_weights, mode="full")[m : m + grid.n_cells]
    return grid.h * spread


def zero_extended_divergence(table: KernelTable, psi: Field) -> Field:
    """``div(1_Omega psi)`` on Omega_delta for ``psi`` on the Omega midpoints.

    This is the exact negative transpose of the gradient, so
    ``<D u, psi> = -<u, div(1_Omega psi)>`` holds to round-off.
    """
    _need(psi, Support.OMEGA_EDGES)
    _check(table, psi.grid)
    return Field(psi.grid, Support.OMEGA_DELTA, -_gradient_transpose(table, psi.grid, psi.values))


def nonlocal_boundary_operator(table: KernelTable, phi: Field) -> Field:
    """``N phi = -div(1_Omega phi)`` restricted to Gamma_{+-delta}."""
    full = zero_extended_divergence(table, phi)
    return Field(phi.grid, Support.GAMMA_PM_DELTA, -full.values[phi.grid.gamma_pm_delta])


@dataclass(frozen=True, eq=False)
class TorusTransform:
    """Periodic realisation of ``Q *`` and its inverse ``P``.

    Samples live at ``origin + j*h`` for ``j = 0 .. n_modes-1``, ``h = length/n_modes``.
    """

    length: float
    n_modes: int
    h: float
    origin: float
    q_hat: np.ndarray
    min_real_q_hat: float
    grid_offset: int = -1  # index of the first grid node, or -1 when not tied to a grid

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.h * np.arange(self.n_modes)

    def sample(self, func) -> np.ndarray:
        return np.asarray(func(self.points), dtype=float) * np.ones(self.n_modes)

    def to_grid(self, grid: DomainGrid, v: np.ndarray) -> Field:
        if self.grid_offset < 0:
            raise ValueError("torus is not aligned with a grid")
        return Field(grid, Support.OMEGA_DELTA, v[self.grid_offset : self.grid_offset + grid.n_cells])

    def from_grid(self, u: Field) -> np.ndarray:
        """Zero-padded torus samples of an Omega_delta field."""
        _need(u, Support.OMEGA_DELTA)
        if self.grid_offset < 0:
            raise ValueError("torus is not aligned with a grid")
        v = np.zeros(self.n_modes)
        v[self.grid_offset : self.grid_offset + u.grid.n_cells] = u.values
        return v


def build_torus(table: KernelTable, length: float, n_modes: int, origin: float | None = None) -> TorusTransform:
    """Fourier symbol of the cell-averaged ``Q`` on a periodic grid."""
    if n_modes < 2 or n_modes & (n_modes - 1):
        raise ValueError(f"n_modes must be a power of two, got {n_modes}")
    h = length / n_modes
    if not math.isclose(h, table.grid_h, rel_tol=1e-12):
        raise ValueError(f"torus spacing {h} differs from kernel spacing {table.grid_h}")
    m = table.stencil_width
    if 2 * m + 1 > n_modes:
        raise ValueError("torus shorter than the kernel support")
    kernel = np.zeros(n_modes)
    kernel[: m + 1] = table.conv_weights[m:]
    kernel[n_modes - m :] = table.conv_weights[:m]
    q_hat = h * np.fft.fft(kernel)
    re = q_hat.real
    if re.min() <= 0:
        k = int(np.argmin(re))
        raise PositivityError(f"Re q_hat = {re[k]:.3e} at mode {k}; refine the grid")
    if origin is None:
        origin = -length / 2 + h / 2
    return TorusTransform(length, n_modes, h, float(origin), q_hat, float(re.min()))


def torus_for_grid(table: KernelTable, grid: DomainGrid) -> TorusTransform:
    """Torus of length at least ``2(|Omega_delta| + 2 delta)`` with the grid as a centred slice.

    The torus is also long enough to hold the extension collar of
    ``extend_modulo_N`` with ``2 delta`` to spare before the seam.
    """
    _check(table, grid)
    span = grid.n_cells * grid.h
    ds = grid.delta_snapped
    need = max(2 * (span + 2 * ds), grid.omega_length + 2 * (EXTENSION_RADII[1] + 3) * ds)
    n_modes = 1 << int(math.ceil(math.log2(need / grid.h - 1e-9)))
    offset = (n_modes - grid.n_cells) // 2
    origin = grid.nodes[0] - offset * grid.h
    t = build_torus(table, n_modes * grid.h, n_modes, origin)
    return TorusTransform(t.length, t.n_modes, t.h, t.origin, t.q_hat, t.min_real_q_hat, offset)


def torus_convolve(torus: TorusTransform, v: np.ndarray) -> np.ndarray:
    return np.fft.ifft(torus.q_hat * np.fft.fft(v)).real


def apply_P(torus: TorusTransform, v: np.ndarray) -> np.ndarray:
    """Inverse of ``Q *`` on the torus: divide by the symbol."""
    v = np.asarray(v, dtype=float)
    if v.shape != (torus.n_modes,):
        raise ValueError(f"expected {torus.n_modes} torus samples, got shape {v.shape}")
    return np.fft.ifft(np.fft.fft(v) / torus.q_hat).real


def smooth_step(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(t < 1, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)
        f1 = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    return f0 / (f0 + f1)


def extend_modulo_N(table: KernelTable, torus: TorusTransform, u: Field) -> np.ndarray:
    """``P(E(Q * u))`` on the torus, with ``E`` an even reflection plus smooth cutoff.

    The result ``w`` has the same nonlocal gradient as ``u`` on Omega, so
    ``u - w`` restricted to Omega_delta lies in the discrete space N.
    """
    grid = u.grid
    _check(table, grid)
    v = _q_at_omega(table, grid, u.values)
    xo = grid.nodes[grid.omega]
    length = grid.omega_length
    r1, r2 = EXTENSION_RADII[0] * grid.delta_snapped, EXTENSION_RADII[1] * grid.delta_snapped
    x = torus.points
    if torus.grid_offset < 0 or x[0] > grid.a - r2 - 2 * grid.delta_snapped or x[-1] < grid.b + r2 + 2 * grid.delta_snapped:
        raise ValueError("torus does not contain the support of the extension")
    # Repeated even reflection at a and b folds every point back into Omega.
    t = np.mod(x - grid.a, 2 * length)
    folded = grid.a + np.where(t <= length, t, 2 * length - t)
    dist = np.maximum(grid.a - x, x - grid.b)
    ext = np.interp(folded, xo, v) * smooth_step((dist - r1) / (r2 - r1))
    ext[torus.grid_offset + grid.omega] = v  # bit-exact on Omega
    return apply_P(torus, ext)
