"""Command-line interface: ``nlgrad <command> [flags]``.

Exit codes: 0 success, 2 a computed quantity missed its tolerance, 1 usage or
runtime error.  All flags are validated before any computation, and nothing
is written when validation fails.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .domain import Field, Support, build_grid, field_from_csv, field_to_csv
from .errors import NLGradError, ToleranceError

COMMANDS = ("kernel", "solve-c", "smooth-n", "neumann", "localize", "poincare", "selftest")
SWEEP_HEADER = ("s", "l2_error", "energy_gap", "el_residual")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    a: float = -3.0
    b: float = 3.0
    delta: float = 1.0
    mu: float = 0.5
    s: float = 0.5
    s_list: tuple = (0.5, 0.7, 0.9, 0.99)
    n_cells: int = 2000
    c: float = 0.0
    g: str = "const:-1"
    out: Path | None = None
    svg: Path | None = None
    seed: int = 0
    threads: int | None = None


def _build_parser() -> _Parser:
    p = _Parser(prog="nlgrad", description="Finite-horizon fractional gradients on an interval.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--omega", nargs=2, type=float, metavar=("A", "B"), default=(-3.0, 3.0))
        sp.add_argument("--s", type=float, default=0.5)
        sp.add_argument("--delta", type=float, default=1.0)
        sp.add_argument("--mu", type=float, default=0.5)
        sp.add_argument("--n-cells", type=int, default=2000)
        sp.add_argument("--out", type=Path, default=None)
        sp.add_argument("--svg", type=Path, default=None)
        sp.add_argument("--seed", type=int, default=0)
        if name == "solve-c":
            sp.add_argument("--c", type=float, default=0.0)
            sp.add_argument("--g", default="const:-1", help="const:<v> | linear | csv:<path>")
        if name == "localize":
            sp.add_argument("--s-list", default="0.5,0.7,0.9,0.99")
    return p


def _open_unit(flag, value):
    if not 0 < value < 1:
        raise UsageError(f"{flag} must lie in (0, 1), got {value}")


def _parse_g(spec: str) -> str:
    if spec == "linear":
        return spec
    if spec.startswith("const:"):
        try:
            float(spec[6:])
        except ValueError:
            raise UsageError(f"--g const:<v> needs a number, got {spec!r}") from None
        return spec
    if spec.startswith("csv:"):
        if not Path(spec[4:]).is_file():
            raise UsageError(f"--g csv file not found: {spec[4:]}")
        return spec
    raise UsageError(f"--g must be const:<v>, linear or csv:<path>, got {spec!r}")


def parse_args(argv) -> RunConfig:
    """Parse and validate; raises :class:`UsageError` naming the offending flag."""
    ns = _build_parser().parse_args(list(argv))
    a, b = ns.omega
    if not b > a:
        raise UsageError(f"--omega needs A < B, got {a} {b}")
    if not 0 < ns.delta < (b - a) / 2:
        raise UsageError(f"--delta must lie in (0, (B-A)/2) = (0, {(b - a) / 2:g}), got {ns.delta}")
    _open_unit("--s", ns.s)
    _open_unit("--mu", ns.mu)
    h = (b - a + 2 * ns.delta) / ns.n_cells if ns.n_cells > 0 else 0
    if ns.n_cells < 16 or round(ns.delta / h) < 4:
        raise UsageError(f"--n-cells {ns.n_cells} too small: need n_cells >= 16 and at least 4 cells per horizon")
    s_list = (0.5, 0.7, 0.9, 0.99)
    if ns.command == "localize":
        try:
            s_list = tuple(float(v) for v in ns.s_list.split(","))
        except ValueError:
            raise UsageError(f"--s-list must be comma-separated numbers, got {ns.s_list!r}") from None
        for v in s_list:
            _open_unit("--s-list entry", v)
    threads = os.environ.get("NLGRAD_THREADS")
    if threads is not None:
        if not threads.isdigit() or int(threads) < 1:
            raise UsageError(f"NLGRAD_THREADS must be a positive integer, got {threads!r}")
        threads = int(threads)
    return RunConfig(
        command=ns.command,
        a=a,
        b=b,
        delta=ns.delta,
        mu=ns.mu,
        s=ns.s,
        s_list=s_list,
        n_cells=ns.n_cells,
        c=getattr(ns, "c", 0.0),
        g=_parse_g(getattr(ns, "g", "const:-1")),
        out=ns.out,
        svg=ns.svg,
        seed=ns.seed,
        threads=threads,
    )


def _out(cfg: RunConfig) -> Path:
    return cfg.out if cfg.out is not None else Path(f"{cfg.command}.csv")


def _grid_table(cfg: RunConfig):
    from .operators import table_for_grid

    grid = build_grid(cfg.a, cfg.b, cfg.delta, cfg.n_cells)
    return grid, table_for_grid(grid, cfg.s, cfg.mu)


def _boundary_field(cfg: RunConfig, grid) -> Field:
    if cfg.g == "linear":
        return grid.sample(lambda x: x, Support.GAMMA_DELTA)
    if cfg.g.startswith("const:"):
        v = float(cfg.g[6:])
        return grid.sample(lambda x: np.full_like(x, v), Support.GAMMA_DELTA)
    return field_from_csv(grid, Support.GAMMA_DELTA, cfg.g[4:])


def _cmd_kernel(cfg):
    from .kernels import eval_cutoff, eval_d

    grid, table = _grid_table(cfg)
    m, h = table.stencil_width, table.grid_h
    k = np.arange(-m, m + 1)
    x = k * h
    d = np.zeros_like(x)
    d[k != 0] = eval_d(table.profile, table.s, table.c_norm, x[k != 0])
    rows = zip(x, table.q_weights, eval_cutoff(table.profile, np.abs(x)), d)
    io.write_table(_out(cfg), ("x", "Q", "wbar", "d"), rows)
    if cfg.svg:
        io.write_svg(cfg.svg, x, table.q_weights, f"Q cell averages, s={cfg.s:g}")
    print(f"c_norm={table.c_norm:.17g} sum(Q)*h={h * table.q_weights.sum():.17g} h={h:.6g} stencil={m}")
    return 0


def _cmd_solve_c(cfg):
    from .zero_grad import BoundaryData, c_residual, collocation_system, gradient_defect, solve_C

    grid, table = _grid_table(cfg)
    hsol = solve_C(table, grid, BoundaryData(cfg.c, _boundary_field(cfg, grid)))
    res = c_residual(table, hsol, cfg.c)
    om = grid.omega
    v = hsol.values
    field_to_csv(hsol, _out(cfg))
    if cfg.svg:
        io.write_svg(cfg.svg, grid.nodes, v, f"solution of (C), c={cfg.c:g}, g={cfg.g}")
    print(
        f"residual={res:.3e} |D h|={gradient_defect(table, hsol):.3e} "
        f"jumps={abs(v[om[0]] - v[om[0] - 1]):.6g},{abs(v[om[-1]] - v[om[-1] + 1]):.6g} "
        f"cond={collocation_system(table, grid).condition:.4g} delta_snapped={grid.delta_snapped:.17g}"
    )
    return 0


def _cmd_smooth_n(cfg):
    from .acceptance import bump
    from .operators import torus_for_grid
    from .zero_grad import gradient_defect, smooth_n_member

    grid, table = _grid_table(cfg)
    torus = torus_for_grid(table, grid)
    left, right, d = grid.a - grid.delta_snapped, grid.b + grid.delta_snapped, grid.delta_snapped
    v = torus.sample(lambda x: 1 + 5 * bump((x - left) / d) - 2 * bump((x - right) / d))
    w = smooth_n_member(torus, v, grid)
    dmax = gradient_defect(table, w)
    field_to_csv(w, _out(cfg))
    if cfg.svg:
        io.write_svg(cfg.svg, grid.nodes, w.values, "smooth member of N")
    print(f"|D w|={dmax:.3e} collar max-min={np.ptp(w.restrict(Support.GAMMA_DELTA).values):.6g}")
    return 0 if dmax <= 1e-4 else 2


def _cavity_forcing(a, b):
    length = b - a

    def F(x):
        return np.where((x > a) & (x < b), -np.cos(2 * np.pi * (x - a) / length), 0.0)

    def exact(x):
        return -((length / (2 * np.pi)) ** 2) * np.cos(2 * np.pi * (x - a) / length)

    return F, exact


def _sweep(cfg, s_list):
    from .variational import localization_sweep

    F, exact = _cavity_forcing(cfg.a, cfg.b)
    rows = localization_sweep(cfg.a, cfg.b, cfg.delta, cfg.mu, F, s_list, cfg.n_cells, exact=exact)
    io.write_table(_out(cfg), SWEEP_HEADER, [(r.s, r.l2_error, r.energy_gap, r.el_residual) for r in rows])
    if cfg.svg:
        io.write_svg(cfg.svg, [r.s for r in rows], [r.l2_error for r in rows], "L2 error against s")
    for r in rows:
        print(f"s={r.s:g} l2_error={r.l2_error:.6g} energy_gap={r.energy_gap:.6g} el_residual={r.el_residual:.3e}")
    return rows


def _cmd_neumann(cfg):
    rows = _sweep(cfg, [cfg.s])
    return 0 if rows[0].el_residual <= 1e-8 else 2


def _cmd_localize(cfg):
    rows = _sweep(cfg, cfg.s_list)
    err = [r.l2_error for r in rows]
    ok = all(r.el_residual <= 1e-8 for r in rows) and all(e2 < e1 for e1, e2 in zip(err, err[1:]))
    return 0 if ok else 2


def _cmd_poincare(cfg):
    from .variational import poincare_constant
    from .zero_grad import build_n_basis

    grid, table = _grid_table(cfg)
    basis = build_n_basis(table, grid)
    rows = []
    for mode in ("zero-trace-zero-mean", "perp"):
        r = poincare_constant(basis, table, grid, mode, seed=cfg.seed)
        rows.append((mode, r.constant, r.lambda_min, r.iterations, r.rel_change, r.dim))
        print(f"{mode}: C={r.constant:.8g} lambda_min={r.lambda_min:.8g} iterations={r.iterations}")
    io.write_table(_out(cfg), ("mode", "constant", "lambda_min", "iterations", "rel_change", "dim"), rows)
    return 0


def _cmd_selftest(cfg):
    from .acceptance import run_all

    checks = run_all(report=print)
    rows = [(c.number, c.name.replace(",", ";"), c.passed, c.value, c.threshold) for c in checks]
    io.write_table(_out(cfg), ("criterion", "name", "passed", "value", "threshold"), rows)
    failed = [c.number for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return 0 if not failed else 2


HANDLERS = {
    "kernel": _cmd_kernel,
    "solve-c": _cmd_solve_c,
    "smooth-n": _cmd_smooth_n,
    "neumann": _cmd_neumann,
    "localize": _cmd_localize,
    "poincare": _cmd_poincare,
    "selftest": _cmd_selftest,
}


def run(config: RunConfig) -> int:
    try:
        if config.threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=config.threads):
                return HANDLERS[config.command](config)
        return HANDLERS[config.command](config)
    except ToleranceError as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return 2
    except (NLGradError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
