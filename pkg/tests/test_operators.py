import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nlgrad.domain import Field, Support, build_grid
from nlgrad.errors import PositivityError
from nlgrad.kernels import CutoffProfile, build_kernel_table, eval_Q
from nlgrad.operators import (
    apply_P,
    build_torus,
    convolve_Q,
    extend_modulo_N,
    gradient_matrix,
    nonlocal_boundary_operator,
    nonlocal_divergence,
    nonlocal_gradient,
    table_for_grid,
    torus_convolve,
    torus_for_grid,
    zero_extended_divergence,
)
from nlgrad.zero_grad import c_residual


def bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1 - 1 / (1 - x[inside] ** 2))
    return out


# --- convolution with Q ---------------------------------------------------------


def test_convolution_reproduces_affine(ref2000):
    grid, table = ref2000
    one = convolve_Q(table, grid.sample(lambda x: np.ones_like(x))).values
    lin = convolve_Q(table, grid.sample(lambda x: x))
    assert np.max(np.abs(one - 1)) <= 1e-13
    assert np.max(np.abs(lin.values - lin.x)) <= 1e-12


def test_convolution_matches_quadrature_oracle(ref2000):
    grid, table = ref2000
    u = grid.sample(lambda x: np.exp(-x * x))
    qu = convolve_Q(table, u)
    i = int(np.argmin(np.abs(qu.x)))
    x0 = qu.x[i]
    prof, s, c = table.profile, table.s, table.c_norm

    def integrand(y):
        return eval_Q(prof, s, c, y) * (np.exp(-((x0 - y) ** 2)) + np.exp(-((x0 + y) ** 2)))

    ref, _ = integrate.quad(integrand, 0, 1, points=[0.5], epsabs=1e-13, limit=200)
    assert qu.values[i] == pytest.approx(ref, abs=1e-6)


def test_spacing_mismatch_rejected(ref2000, ref800):
    grid, _ = ref2000
    _, table800 = ref800
    with pytest.raises(ValueError):
        convolve_Q(table800, grid.sample(np.sin))
    with pytest.raises(ValueError):
        nonlocal_gradient(table800, grid.sample(np.sin))


# --- gradient -------------------------------------------------------------------


def test_gradient_of_constant_vanishes(ref2000):
    grid, table = ref2000
    d = nonlocal_gradient(table, grid.sample(lambda x: np.full_like(x, 3.7)))
    assert d.support is Support.OMEGA_EDGES
    assert np.max(np.abs(d.values)) <= 1e-12


@pytest.mark.parametrize("A", [2.0, -0.5, 13.0])
def test_gradient_of_linear_function(ref2000, A):
    grid, table = ref2000
    d = nonlocal_gradient(table, grid.sample(lambda x: A * x + 1))
    assert np.max(np.abs(d.values - A)) <= 1e-3 * abs(A)
    assert np.max(np.abs(d.values - A)) <= 1e-11 * abs(A) + 1e-11


def test_gradient_matches_derivative_of_convolution(ref2000):
    grid, table = ref2000
    u = grid.sample(lambda x: bump(x / 2.5))
    qu = convolve_Q(table, u).values
    fd = (qu[2:] - qu[:-2]) / (2 * grid.h)  # centred difference at Omega nodes
    d = nonlocal_gradient(table, u).values
    at_nodes = 0.5 * (d[1:] + d[:-1])
    assert np.max(np.abs(at_nodes - fd)) <= 1e-3


def test_translation_gap_shrinks_under_refinement():
    gaps = []
    for n in (500, 1000, 2000):
        grid = build_grid(-3, 3, 1, n)
        table = table_for_grid(grid, 0.5)
        u = grid.sample(lambda x: np.exp(-x * x))
        qu = convolve_Q(table, u).values
        gaps.append(np.max(np.abs(nonlocal_gradient(table, u).values - np.diff(qu) / grid.h)))
    assert gaps[0] > gaps[1] > gaps[2]


def test_gradient_matrix_agrees_with_operator(ref800):
    grid, table = ref800
    rng = np.random.default_rng(1)
    u = rng.standard_normal(grid.n_cells)
    G = gradient_matrix(table, grid)
    assert G.shape == (len(grid.edges), grid.n_cells)
    ref = nonlocal_gradient(table, Field(grid, Support.OMEGA_DELTA, u)).values
    assert np.max(np.abs(G @ u - ref)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**16))
def test_operators_are_linear(alpha, beta, seed):
    grid = build_grid(-1, 1, 0.25, 96)
    table = table_for_grid(grid, 0.4)
    rng = np.random.default_rng(seed)
    u = Field(grid, Support.OMEGA_DELTA, rng.standard_normal(grid.n_cells))
    v = Field(grid, Support.OMEGA_DELTA, rng.standard_normal(grid.n_cells))
    w = alpha * u + beta * v
    for op in (convolve_Q, nonlocal_gradient):
        lhs = op(table, w).values
        rhs = alpha * op(table, u).values + beta * op(table, v).values
        assert np.allclose(lhs, rhs, rtol=0, atol=1e-9 * (1 + np.abs(rhs).max()))


# --- divergence and boundary operator -------------------------------------------


def test_divergence_examples(ref2000):
    grid, table = ref2000
    assert np.max(np.abs(nonlocal_divergence(table, grid.sample(lambda x: 0 * x + 2)).values)) <= 1e-12
    assert np.max(np.abs(nonlocal_divergence(table, grid.sample(lambda x: x)).values - 1)) <= 1e-3


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**16))
def test_discrete_duality(seed):
    grid = build_grid(-3, 3, 1, 400)
    table = table_for_grid(grid, 0.5)
    rng = np.random.default_rng(seed)
    u = Field(grid, Support.OMEGA_DELTA, rng.standard_normal(grid.n_cells))
    # psi supported in Omega_{-delta}
    e = grid.edges
    psi_vals = rng.standard_normal(len(e)) * (np.abs(e) < 2)
    psi = Field(grid, Support.OMEGA_EDGES, psi_vals)
    lhs = grid.h * nonlocal_gradient(table, u).values @ psi.values
    rhs = -grid.h * u.values @ zero_extended_divergence(table, psi).values
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_boundary_operator_examples(ref800):
    grid, table = ref800
    zero = Field(grid, Support.OMEGA_EDGES, np.zeros(len(grid.edges)))
    out = nonlocal_boundary_operator(table, zero)
    assert out.support is Support.GAMMA_PM_DELTA and not np.any(out.values)
    one = Field(grid, Support.OMEGA_EDGES, np.ones(len(grid.edges)))
    full = zero_extended_divergence(table, one).values
    x = grid.nodes
    dist = np.minimum(np.abs(x - grid.a), np.abs(x - grid.b))
    deep = (np.abs(x) < 3) & (dist > grid.delta_snapped + 3 * grid.h)
    assert np.max(np.abs(full[deep])) <= 1e-10
    vals = nonlocal_boundary_operator(table, one).values
    assert np.max(np.abs(vals)) > 0.1
    assert np.allclose(vals, -full[grid.gamma_pm_delta])


# --- torus ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def torus16():
    table = build_kernel_table(CutoffProfile(1.0, 0.5), 0.5, 16 / 2048)
    return build_torus(table, 16.0, 2048)


def test_torus_symbol(torus16):
    q = torus16.q_hat
    assert q[0].real == pytest.approx(1.0, abs=1e-10)
    assert torus16.min_real_q_hat > 0 and q.real.min() > 0
    assert np.max(np.abs(q.imag)) <= 1e-12
    assert np.max(np.abs(q[1:] - q[1:][::-1])) <= 1e-12


def test_apply_P_examples(torus16):
    assert not np.any(apply_P(torus16, np.zeros(2048)))
    v = torus16.sample(lambda x: bump(x / 3) * (1 + x))
    back = apply_P(torus16, torus_convolve(torus16, v))
    assert np.linalg.norm(back - v) / np.linalg.norm(v) <= 1e-8
    with pytest.raises(ValueError):
        apply_P(torus16, np.zeros(100))


def test_torus_validation():
    table = build_kernel_table(CutoffProfile(1.0, 0.5), 0.5, 16 / 2048)
    with pytest.raises(ValueError):
        build_torus(table, 16.0, 2000)
    with pytest.raises(ValueError):
        build_torus(table, 12.0, 2048)


def test_gradient_of_P_is_classical_gradient(ref2000):
    grid, table = ref2000
    torus = torus_for_grid(table, grid)
    v = torus.sample(lambda x: bump(x / 3.5) * np.sin(x))
    w = torus.to_grid(grid, apply_P(torus, v))
    xo = grid.nodes[grid.omega]
    vo = bump(xo / 3.5) * np.sin(xo)
    centred = np.diff(vo) / grid.h
    assert np.max(np.abs(nonlocal_gradient(table, w).values - centred)) <= 1e-3


def test_torus_for_grid_alignment(ref800):
    grid, table = ref800
    t = torus_for_grid(table, grid)
    assert t.length >= 2 * (grid.n_cells * grid.h + 2 * grid.delta_snapped)
    assert np.allclose(t.points[t.grid_offset : t.grid_offset + grid.n_cells], grid.nodes, atol=1e-12)
    u = grid.sample(np.cos)
    assert np.array_equal(t.to_grid(grid, t.from_grid(u)).values, u.values)


def test_positivity_error_is_reported():
    # A kernel with a negative symbol must be rejected by the torus build.
    table = build_kernel_table(CutoffProfile(1.0, 0.5), 0.5, 16 / 2048)
    bad = table.__class__(**{**table.__dict__, "conv_weights": -table.conv_weights})
    with pytest.raises(PositivityError):
        build_torus(bad, 16.0, 2048)


# --- extension modulo N -------------------------------------------------------------


def test_extension_of_constant(ref2000):
    grid, table = ref2000
    torus = torus_for_grid(table, grid)
    w = torus.to_grid(grid, extend_modulo_N(table, torus, grid.sample(lambda x: np.full_like(x, 2.5))))
    assert np.max(np.abs(w.values - 2.5)) <= 1e-6


@pytest.mark.parametrize("func", [lambda x: np.sin(2 * x) + x**2 / 5, lambda x: np.exp(-x) * np.cos(x)])
def test_extension_preserves_gradient_and_lands_in_N(ref2000, func):
    grid, table = ref2000
    torus = torus_for_grid(table, grid)
    u = grid.sample(func)
    w = torus.to_grid(grid, extend_modulo_N(table, torus, u))
    assert np.max(np.abs(nonlocal_gradient(table, u).values - nonlocal_gradient(table, w).values)) <= 1e-3
    diff = u - w
    c = float(np.mean(convolve_Q(table, diff).values))
    assert c_residual(table, diff, c) <= 1e-6
