import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlgrad.domain import (
    Field,
    Support,
    assemble,
    build_grid,
    field_from_csv,
    field_to_csv,
    inner,
    integrate,
)


def test_reference_grid_layout():
    g = build_grid(-3, 3, 1, 2000)
    assert g.h == pytest.approx(0.004)
    assert g.stencil_width == 250
    assert g.delta_snapped == pytest.approx(1.0)
    assert len(g.omega) == 1500 and len(g.gamma) == 500
    assert np.all((g.nodes[g.omega] > -3) & (g.nodes[g.omega] < 3))
    assert len(g.edges) == 1499


def test_gamma_split_evenly_with_stencil_width():
    g = build_grid(-3, 3, 1, 800)
    x = g.nodes[g.gamma]
    assert np.count_nonzero(x < -3) == g.stencil_width == np.count_nonzero(x > 3)


def test_double_collar_contains_inner_layer():
    g = build_grid(-3, 3, 1, 800)
    xi = g.nodes[g.gamma_minus_delta]
    assert np.all(np.abs(xi) > 2 - 1e-12)
    assert np.all(np.abs(xi) < 3)
    assert len(g.gamma_pm_delta) == len(g.gamma) + len(g.gamma_minus_delta)


@pytest.mark.parametrize(
    "args",
    [(3, -3, 1, 800), (-3, 3, 3, 800), (-3, 3, 0, 800), (-3, 3, 1, 10), (-3, 3, 0.05, 200), (-3, 3, 1, 800.5)],
)
def test_rejects_bad_geometry(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_delta_snapping_reported():
    g = build_grid(-3, 3, 1.013, 1000)
    assert g.delta_snapped == pytest.approx(g.stencil_width * g.h)
    assert abs(g.delta_snapped - 1.013) <= g.h / 2


def test_midpoint_rule_exact_on_affine():
    g = build_grid(-3, 3, 1, 400)
    assert integrate(g.sample(lambda x: 3 + 0 * x)) == pytest.approx(24.0, abs=1e-12)
    assert integrate(g.sample(lambda x: 2 * x)) == pytest.approx(0.0, abs=1e-12)
    assert integrate(g.sample(lambda x: x + 1, Support.OMEGA)) == pytest.approx(6.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_field_algebra_is_linear(alpha, beta):
    g = build_grid(-1, 1, 0.25, 64)
    u = g.sample(np.sin)
    v = g.sample(np.cos)
    w = alpha * u + beta * v
    assert np.allclose(w.values, alpha * np.sin(g.nodes) + beta * np.cos(g.nodes))
    assert integrate(w) == pytest.approx(alpha * integrate(u) + beta * integrate(v), abs=1e-12)
    assert inner(u, v) == pytest.approx(g.h * np.sin(g.nodes) @ np.cos(g.nodes))


def test_field_rejects_bad_shapes_and_mixing():
    g = build_grid(-1, 1, 0.25, 64)
    with pytest.raises(ValueError):
        Field(g, Support.OMEGA, np.zeros(3))
    with pytest.raises(ValueError):
        Field(g, Support.OMEGA_DELTA, np.full(64, np.nan))
    with pytest.raises(ValueError):
        g.sample(np.sin) + g.sample(np.sin, Support.OMEGA)
    with pytest.raises(ValueError):
        g.sample(np.sin, Support.OMEGA).restrict(Support.GAMMA_DELTA)


def test_fields_are_immutable():
    g = build_grid(-1, 1, 0.25, 64)
    u = g.sample(np.sin)
    with pytest.raises(ValueError):
        u.values[0] = 1.0
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0


def test_assemble_and_restrict_roundtrip():
    g = build_grid(-1, 1, 0.25, 64)
    u = g.sample(np.exp)
    back = assemble(g, u.restrict(Support.OMEGA).values, u.restrict(Support.GAMMA_DELTA).values)
    assert np.array_equal(back.values, u.values)


def test_csv_roundtrip_is_exact(tmp_path):
    g = build_grid(-3, 3, 1, 200)
    u = g.sample(lambda x: np.exp(-x * x) / 3)
    path = tmp_path / "u.csv"
    field_to_csv(u, path)
    text = path.read_text().splitlines()
    assert text[0] == "x,value" and len(text) == 201
    assert np.array_equal(field_from_csv(g, Support.OMEGA_DELTA, path).values, u.values)
    with pytest.raises(ValueError):
        field_from_csv(g, Support.GAMMA_DELTA, path)
