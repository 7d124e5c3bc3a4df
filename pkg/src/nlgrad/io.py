"""CSV tables and a dependency-free SVG line plot."""

from __future__ import annotations

from pathlib import Path

import numpy as np

SVG_WIDTH, SVG_HEIGHT = 800, 500
_MARGIN = 50


def fmt(v) -> str:
    """17 significant digits, enough to round-trip a double."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def write_table(path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_svg(path, x, y, title: str = "") -> None:
    """Polyline plot of ``y`` against ``x`` with a zero line when it is in range."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need matching x and y arrays with at least two points")
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    w, h = SVG_WIDTH - 2 * _MARGIN, SVG_HEIGHT - 2 * _MARGIN

    def px(v):
        return _MARGIN + (v - x0) / (x1 - x0) * w

    def py(v):
        return SVG_HEIGHT - _MARGIN - (v - y0) / (y1 - y0) * h

    pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{w}" height="{h}" fill="none" stroke="#888"/>',
    ]
    if y0 < 0 < y1:
        parts.append(
            f'<line x1="{_MARGIN}" y1="{py(0):.2f}" x2="{_MARGIN + w}" y2="{py(0):.2f}" stroke="#ccc"/>'
        )
    parts += [
        f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{pts}"/>',
        f'<text x="{_MARGIN}" y="{SVG_HEIGHT - 15}" font-size="12">{x0:.4g}</text>',
        f'<text x="{_MARGIN + w}" y="{SVG_HEIGHT - 15}" font-size="12" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{_MARGIN - 5}" y="{py(y1) + 12:.2f}" font-size="12" text-anchor="end">{y1:.4g}</text>',
        f'<text x="{_MARGIN - 5}" y="{py(y0):.2f}" font-size="12" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{SVG_WIDTH / 2:.0f}" y="30" font-size="14" text-anchor="middle">{_escape(title)}</text>',
        "</svg>",
    ]
    Path(path).write_text("\n".join(parts) + "\n")


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
