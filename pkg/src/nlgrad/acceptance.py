"""Executable acceptance checks, shared by the test suite and ``nlgrad selftest``.

Each check returns a :class:`Check` carrying the measured value and the
pinned threshold, so a failing check reports how far off it is.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

from .domain import Support, build_grid, field_to_csv
from .kernels import CutoffProfile, build_kernel_table, eval_Q
from .operators import apply_P, build_torus, convolve_Q, nonlocal_gradient, table_for_grid, torus_convolve, torus_for_grid
from .variational import (
    NeumannProblem,
    localization_sweep,
    minimize_neumann,
    poincare_constant,
    project_forcing,
)
from .zero_grad import BoundaryData, build_n_basis, c_residual, gradient_defect, psi_matrix, smooth_n_member, solve_C

REF = dict(a=-3.0, b=3.0, delta=1.0, mu=0.5, s=0.5)


@dataclass(frozen=True)
class Check:
    number: int
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def bump(x):
    """Smooth bump ``exp(1 - 1/(1 - x^2))`` on ``(-1, 1)``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def ref_grid(n_cells: int = 2000):
    g = build_grid(REF["a"], REF["b"], REF["delta"], n_cells)
    return g, table_for_grid(g, REF["s"], REF["mu"])


def sign_changes(v: np.ndarray) -> int:
    sg = np.sign(v)
    sg = sg[sg != 0]
    return int(np.count_nonzero(sg[1:] != sg[:-1]))


def check_normalization() -> Check:
    profile = CutoffProfile(REF["delta"], REF["mu"])
    from .kernels import normalization_constant

    worst = 0.0
    for s in (0.3, 0.5, 0.7, 0.9):
        c = normalization_constant(profile, s)
        val, _ = integrate.quad(
            lambda x: eval_Q(profile, s, c, x), 0.0, profile.delta, points=[profile.plateau], epsabs=1e-13, epsrel=1e-12, limit=200
        )
        worst = max(worst, abs(2 * val - 1))
    return Check(1, "kernel normalization", worst <= 1e-8, worst, 1e-8, f"max |int Q - 1| = {worst:.2e} <= 1e-08")


def check_linear_gradient() -> Check:
    grid, table = ref_grid(2000)
    err = float(np.abs(nonlocal_gradient(table, grid.sample(lambda x: 2 * x)).values - 2).max())
    return Check(2, "linear-gradient identity", err <= 1e-3, err, 1e-3, f"max |D(2x) - 2| = {err:.2e} <= 1e-03")


def translation_gap(n_cells: int) -> float:
    grid, table = ref_grid(n_cells)
    u = grid.sample(lambda x: np.exp(-x * x))
    qu = convolve_Q(table, u).values
    return float(np.abs(nonlocal_gradient(table, u).values - np.diff(qu) / grid.h).max())


def check_translation() -> Check:
    g1, g2 = translation_gap(1000), translation_gap(2000)
    ratio = g1 / g2
    return Check(3, "translation identity", ratio >= 1.5, ratio, 1.5, f"gap {g1:.2e} -> {g2:.2e}, ratio {ratio:.2f} >= 1.5")


def check_inverse() -> Check:
    table = build_kernel_table(CutoffProfile(REF["delta"], REF["mu"]), REF["s"], 16 / 2048)
    torus = build_torus(table, 16.0, 2048)
    v = torus.sample(lambda x: bump(x / 3) * np.cos(x))
    back = apply_P(torus, torus_convolve(torus, v))
    rel = float(np.linalg.norm(back - v) / np.linalg.norm(v))
    return Check(4, "inverse identity", rel <= 1e-8, rel, 1e-8, f"relative l2 error {rel:.2e} <= 1e-08")


def collar_jump_solution(n_cells: int = 2000):
    grid, table = ref_grid(n_cells)
    g = grid.sample(lambda x: -np.ones_like(x), Support.GAMMA_DELTA)
    return grid, table, solve_C(table, grid, BoundaryData(0.0, g))


def check_collar_jump() -> Check:
    grid, table, h = collar_jump_solution()
    res = c_residual(table, h, 0.0)
    v = h.values
    om = grid.omega
    jump_l = abs(v[om[0]] - v[om[0] - 1])
    jump_r = abs(v[om[-1]] - v[om[-1] + 1])
    ho = v[om]
    changes = sign_changes(ho - ho.mean())
    ok = res <= 1e-8 and min(jump_l, jump_r) >= 0.1 and changes >= 3
    return Check(
        5,
        "constant-collar solve",
        ok,
        float(changes),
        3.0,
        f"residual {res:.1e} <= 1e-08, jumps {jump_l:.3f}/{jump_r:.3f} >= 0.1, "
        f"sign changes of h - mean {changes} >= 3",
    )


def bump_member(n_cells: int = 2000):
    grid, table = ref_grid(n_cells)
    torus = torus_for_grid(table, grid)
    v = torus.sample(lambda x: 1 + 5 * bump(x + 4) - 2 * bump(x - 4))
    return grid, table, smooth_n_member(torus, v, grid)


def check_bump_member() -> Check:
    grid, table, w = bump_member()
    dmax = gradient_defect(table, w)
    gam = w.restrict(Support.GAMMA_DELTA).values
    spread = float(gam.max() - gam.min())
    ok = dmax <= 1e-4 and spread > 0.5
    return Check(6, "smooth member from collar bumps", ok, dmax, 1e-4, f"|D w| = {dmax:.1e} <= 1e-04, collar spread {spread:.3f} > 0.5")


def check_characterization() -> Check:
    grid, table = ref_grid(800)
    basis = build_n_basis(table, grid)
    smin = float(np.linalg.svd(psi_matrix(basis), compute_uv=False).min())
    ok = basis.dim == 1 + len(grid.gamma) and smin > 1e-10
    return Check(7, "N characterization", ok, smin, 1e-10, f"{basis.dim} columns, smallest Psi singular value {smin:.3e} > 1e-10")


def check_superposition() -> Check:
    grid, table = ref_grid(2000)
    g = grid.sample(lambda x: np.cos(2 * x) + 0.3 * x, Support.GAMMA_DELTA)
    zero = grid.sample(lambda x: 0 * x, Support.GAMMA_DELTA)
    c = 0.7
    full = solve_C(table, grid, BoundaryData(c, g))
    one = solve_C(table, grid, BoundaryData(1.0, zero))
    gpart = solve_C(table, grid, BoundaryData(0.0, g))
    sup = float(np.abs(full.values - (c * one.values + gpart.values)).max())
    mem = max(gradient_defect(table, f) for f in (full, one, gpart))
    ok = sup <= 1e-9 and mem <= 1e-6
    return Check(8, "superposition and membership", ok, sup, 1e-9, f"superposition {sup:.1e} <= 1e-09, max |D h| {mem:.1e} <= 1e-06")


def check_poincare() -> Check:
    consts = {}
    for n in (400, 800):
        grid, table = ref_grid(n)
        basis = build_n_basis(table, grid)
        consts[n] = [poincare_constant(basis, table, grid, m).constant for m in ("zero-trace-zero-mean", "perp")]
    drift = [abs(consts[800][i] - consts[400][i]) / consts[400][i] for i in range(2)]
    finite = all(np.isfinite(c) and c > 0 for c in consts[400] + consts[800])
    ok = finite and max(drift) <= 0.05
    return Check(
        9,
        "Poincare constants",
        ok,
        max(drift),
        0.05,
        f"mode 1 {consts[400][0]:.4f} -> {consts[800][0]:.4f}, mode 2 {consts[400][1]:.4f} -> {consts[800][1]:.4f}, "
        f"drift {max(drift):.2%} <= 5%",
    )


def cosine_forcing(x):
    return np.where(np.abs(x) < 3, np.cos(np.pi * x / 3), 0.0)


def exact_neumann(x):
    return (3 / np.pi) ** 2 * np.cos(np.pi * x / 3)


def check_neumann() -> Check:
    grid, table = ref_grid(1200)
    basis = build_n_basis(table, grid)
    F = project_forcing(basis, grid.sample(cosine_forcing))
    sol = minimize_neumann(NeumannProblem(grid, REF["s"], table, F), basis)
    ok = sol.projection_norm <= 1e-8 and sol.full_el_residual <= 1e-8
    return Check(
        10,
        "Neumann well-posedness",
        ok,
        sol.full_el_residual,
        1e-8,
        f"projection norm {sol.projection_norm:.1e} <= 1e-08, full EL residual {sol.full_el_residual:.1e} <= 1e-08",
    )


def check_localization() -> Check:
    rows = localization_sweep(
        REF["a"], REF["b"], REF["delta"], REF["mu"], cosine_forcing, [0.5, 0.7, 0.9, 0.99], 1200, exact=exact_neumann
    )
    err = [r.l2_error for r in rows]
    decreasing = all(e2 < e1 for e1, e2 in zip(err, err[1:]))
    ratio = err[-1] / err[0]
    ok = decreasing and ratio <= 0.25
    errs = ", ".join(f"{e:.4f}" for e in err)
    return Check(11, "localization", ok, ratio, 0.25, f"errors {errs}; last/first {ratio:.3f} <= 0.25")


def check_determinism() -> Check:
    """In-process echo of the determinism criterion: one field written twice."""
    with tempfile.TemporaryDirectory() as tmp:
        blobs = []
        for k in range(2):
            _, _, h = collar_jump_solution(400)
            path = Path(tmp) / f"run{k}.csv"
            field_to_csv(h, path)
            blobs.append(path.read_bytes())
    same = blobs[0] == blobs[1]
    return Check(12, "determinism", same, float(same), 1.0, "repeated solve writes identical bytes" if same else "outputs differ")


ALL_CHECKS = (
    check_normalization,
    check_linear_gradient,
    check_translation,
    check_inverse,
    check_collar_jump,
    check_bump_member,
    check_characterization,
    check_superposition,
    check_poincare,
    check_neumann,
    check_localization,
    check_determinism,
)


def run_all(report=print) -> list[Check]:
    out = []
    for fn in ALL_CHECKS:
        t0 = time.perf_counter()
        chk = fn()
        chk = Check(chk.number, chk.name, chk.passed, chk.value, chk.threshold, chk.detail, time.perf_counter() - t0)
        if report is not None:
            report(chk.line())
        out.append(chk)
    return out

