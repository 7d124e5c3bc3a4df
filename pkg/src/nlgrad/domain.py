"""Uniform cell-centred grids over an interval and its horizon collar.

The computational domain is ``Omega_delta = (a - delta, b + delta)``, split
into ``n_cells`` equal cells whose midpoints are the nodes.  Nodes strictly
inside ``(a, b)`` form Omega, the rest form the collar Gamma_delta.  Because
``delta`` is snapped to a whole number ``m`` of cells, a convolution stencil of
half-width ``m`` centred at any Omega node stays inside the grid.

Nonlocal gradients are evaluated on a staggered set: the midpoints between
consecutive Omega nodes (``Support.OMEGA_EDGES``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class Support(enum.Enum):
    OMEGA_DELTA = "omega_delta"
    OMEGA = "omega"
    GAMMA_DELTA = "gamma_delta"
    GAMMA_PM_DELTA = "gamma_pm_delta"
    OMEGA_EDGES = "omega_edges"


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DomainGrid:
    a: float
    b: float
    delta: float
    n_cells: int
    h: float
    nodes: np.ndarray
    stencil_width: int
    omega: np.ndarray
    gamma: np.ndarray
    omega_minus_delta: np.ndarray
    gamma_minus_delta: np.ndarray
    gamma_pm_delta: np.ndarray
    edges: np.ndarray = field(repr=False)

    @property
    def delta_snapped(self) -> float:
        """Horizon rounded to a whole number of cells."""
        return self.stencil_width * self.h

    @property
    def omega_length(self) -> float:
        return self.b - self.a

    def index(self, support: Support) -> np.ndarray:
        """Node indices belonging to ``support`` (not defined for edges)."""
        if support is Support.OMEGA_DELTA:
            return np.arange(self.n_cells)
        if support is Support.OMEGA:
            return self.omega
        if support is Support.GAMMA_DELTA:
            return self.gamma
        if support is Support.GAMMA_PM_DELTA:
            return self.gamma_pm_delta
        raise ValueError(f"{support} is not a node support")

    def positions(self, support: Support) -> np.ndarray:
        if support is Support.OMEGA_EDGES:
            return self.edges
        return self.nodes[self.index(support)]

    def size(self, support: Support) -> int:
        return len(self.positions(support))

    def field(self, support: Support, values) -> Field:
        return Field(self, support, values)

    def sample(self, func, support: Support = Support.OMEGA_DELTA) -> Field:
        """Evaluate a vectorised callable at the points of ``support``."""
        x = self.positions(support)
        return Field(self, support, np.broadcast_to(np.asarray(func(x), dtype=float), x.shape))


def build_grid(a: float, b: float, delta: float, n_cells: int) -> DomainGrid:
    """Discretise ``(a - delta, b + delta)`` into ``n_cells`` cells.

    ``delta`` is snapped to the nearest multiple of the spacing; the snapped
    value is available as ``grid.delta_snapped``.
    """
    a, b, delta = float(a), float(b), float(delta)
    if not b > a:
        raise ValueError(f"need b > a, got a={a}, b={b}")
    if not 0.0 < delta < (b - a) / 2:
        raise ValueError(
            f"delta must lie in (0, (b-a)/2) = (0, {(b - a) / 2}), got {delta}"
        )
    if int(n_cells) != n_cells or n_cells < 16:
        raise ValueError(f"n_cells must be an integer >= 16, got {n_cells}")
    n_cells = int(n_cells)
    h = (b - a + 2 * delta) / n_cells
    m = int(round(delta / h))
    if m < 4:
        raise ValueError(
            f"n_cells={n_cells} gives delta/h={delta / h:.3g}; need at least 4 cells per horizon"
        )

    nodes = a - delta + (np.arange(n_cells) + 0.5) * h
    in_omega = (nodes > a) & (nodes < b)
    omega = np.flatnonzero(in_omega)
    gamma = np.flatnonzero(~in_omega)
    n_left = int(np.count_nonzero(nodes < a))
    n_right = int(np.count_nonzero(nodes > b))
    if n_left < m or n_right < m:
        raise ValueError("grid collar is thinner than the snapped horizon")

    ds = m * h
    interior = (nodes > a + ds) & (nodes < b - ds)
    omega_minus_delta = np.flatnonzero(interior)
    gamma_minus_delta = np.flatnonzero(in_omega & ~interior)
    gamma_pm_delta = np.union1d(gamma, gamma_minus_delta)
    edges = 0.5 * (nodes[omega[:-1]] + nodes[omega[1:]])

    return DomainGrid(
        a=a,
        b=b,
        delta=delta,
        n_cells=n_cells,
        h=h,
        nodes=_frozen(nodes),
        stencil_width=m,
        omega=_frozen(omega),
        gamma=_frozen(gamma),
        omega_minus_delta=_frozen(omega_minus_delta),
        gamma_minus_delta=_frozen(gamma_minus_delta),
        gamma_pm_delta=_frozen(gamma_pm_delta),
        edges=_frozen(edges),
    )


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples attached to one support of a grid."""

    grid: DomainGrid
    support: Support
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.size(self.support),):
            raise ValueError(
                f"{self.support.value} field needs {self.grid.size(self.support)} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return self.grid.positions(self.support)

    def restrict(self, support: Support) -> Field:
        """Restrict a field given on all of Omega_delta to a node subset."""
        if self.support is support:
            return self
        if self.support is not Support.OMEGA_DELTA:
            raise ValueError("only Omega_delta fields can be restricted")
        return Field(self.grid, support, self.values[self.grid.index(support)])

    def __add__(self, other: Field) -> Field:
        _check_compatible(self, other)
        return Field(self.grid, self.support, self.values + other.values)

    def __sub__(self, other: Field) -> Field:
        _check_compatible(self, other)
        return Field(self.grid, self.support, self.values - other.values)

    def __mul__(self, alpha: float) -> Field:
        return Field(self.grid, self.support, alpha * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> Field:
        return Field(self.grid, self.support, -self.values)


def _check_compatible(f: Field, g: Field) -> None:
    if f.grid is not g.grid or f.support is not g.support:
        raise ValueError("fields live on different grids or supports")


def assemble(grid: DomainGrid, omega_values, gamma_values) -> Field:
    """Glue Omega and Gamma_delta values into one Omega_delta field."""
    v = np.empty(grid.n_cells)
    v[grid.omega] = omega_values
    v[grid.gamma] = gamma_values
    return Field(grid, Support.OMEGA_DELTA, v)


def integrate(f: Field) -> float:
    """Midpoint rule over the support of ``f``."""
    return float(f.grid.h * np.sum(f.values))


def inner(f: Field, g: Field) -> float:
    _check_compatible(f, g)
    return float(f.grid.h * np.dot(f.values, g.values))


def field_to_csv(f: Field, path) -> None:
    """Write ``x,value`` rows with 17 significant digits."""
    lines = ["x,value"]
    lines += [f"{x:.17g},{v:.17g}" for x, v in zip(f.x, f.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def field_from_csv(grid: DomainGrid, support: Support, path) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x = grid.positions(support)
    if data.shape[0] != len(x) or not np.allclose(data[:, 0], x, atol=1e-9 * grid.h + 1e-12):
        raise ValueError(f"{path}: x column does not match the {support.value} nodes")
    return Field(grid, support, data[:, 1])
