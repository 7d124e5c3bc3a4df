"""Cutoff profile, potential kernel Q and discrete kernel weights (1-D).

Conventions (one space dimension, fractional order ``s``):

* ``wbar(r)`` is 1 on ``[0, mu*delta]``, decays smoothly to 0 on
  ``[mu*delta, delta]`` and vanishes beyond.
* ``c_norm`` satisfies ``c_norm * 2 * int_0^delta wbar(r) r^-s dr = 1``.
* ``Q(x) = c_norm * int_{|x|}^delta wbar(r) r^(-1-s) dr`` has unit mass, and
  its derivative ``d = Q'`` is the odd gradient kernel.

The plateau contributes closed-form terms; only the smooth transition is
integrated numerically, so the ``r^-s`` singularity never reaches the
quadrature routine.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import PositivityError, QuadratureError

QUAD_RTOL = 1e-10
# Staggered fourth-order first-derivative stencil: node offsets and weights (times 1/h).
STAGGER_OFFSETS = np.array([-1.5, -0.5, 0.5, 1.5])
STAGGER_COEFFS = np.array([1.0, -27.0, 27.0, -1.0]) / 24.0


@dataclass(frozen=True)
class CutoffProfile:
    delta: float = 1.0
    mu: float = 0.5

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")

    @property
    def plateau(self) -> float:
        return self.mu * self.delta


def eval_cutoff(profile: CutoffProfile, r):
    """Radial cutoff ``wbar(r)``; accepts scalars or arrays with ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("eval_cutoff needs r >= 0")
    t = (r - profile.plateau) / (profile.delta - profile.plateau)
    out = np.where(t <= 0, 1.0, 0.0)
    mid = (t > 0) & (t < 1)
    tm = t[mid]
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - tm * tm))
    return float(out) if out.ndim == 0 else out


def _wbar_scalar(delta: float, plateau: float, r: float) -> float:
    t = (r - plateau) / (delta - plateau)
    if t <= 0:
        return 1.0
    if t >= 1:
        return 0.0
    return math.exp(1.0 - 1.0 / (1.0 - t * t))


def _quad(f, lo, hi):
    if hi <= lo:
        return 0.0
    val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
    if err > QUAD_RTOL * max(abs(val), 1e-300) and err > 1e-15:
        raise QuadratureError(f"quad on [{lo}, {hi}] stalled: value {val}, error {err}")
    return val


def _transition_integral(profile: CutoffProfile, power: float, lo: float, hi: float) -> float:
    """int_lo^hi wbar(r) r^-power dr with ``plateau <= lo``."""
    d, a = profile.delta, profile.plateau
    return _quad(lambda r: _wbar_scalar(d, a, r) * r ** (-power), lo, hi)


def _check_s(s: float) -> None:
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")


def normalization_constant(profile: CutoffProfile, s: float) -> float:
    """Scaling constant making ``Q`` a unit-mass kernel."""
    _check_s(s)
    a = profile.plateau
    moment = a ** (1 - s) / (1 - s) + _transition_integral(profile, s, a, profile.delta)
    return 1.0 / (2.0 * moment)


@functools.lru_cache(maxsize=64)
def _full_transition_tail(profile: CutoffProfile, s: float) -> float:
    return _transition_integral(profile, 1 + s, profile.plateau, profile.delta)


def _tail(profile: CutoffProfile, s: float, y: float) -> float:
    """int_y^delta wbar(r) r^(-1-s) dr for 0 < y."""
    a, delta = profile.plateau, profile.delta
    if y >= delta:
        return 0.0
    if y <= a:
        return (y ** (-s) - a ** (-s)) / s + _full_transition_tail(profile, s)
    return _transition_integral(profile, 1 + s, y, delta)


def eval_Q(profile: CutoffProfile, s: float, c_norm: float, x):
    """Potential kernel ``Q(x)``; even, zero for ``|x| >= delta``, singular at 0."""
    _check_s(s)
    xs = np.abs(np.asarray(x, dtype=float))
    if np.any(xs == 0):
        raise ValueError("eval_Q is singular at x = 0; use cell averages there")
    out = np.array([c_norm * _tail(profile, s, float(v)) for v in xs.ravel()])
    out = out.reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def eval_d(profile: CutoffProfile, s: float, c_norm: float, z):
    """Odd gradient kernel ``d(z) = Q'(z) = -c sgn(z) wbar(|z|) / |z|^(1+s)``."""
    z = np.asarray(z, dtype=float)
    if np.any(z == 0):
        raise ValueError("eval_d is singular at z = 0")
    az = np.abs(z)
    out = -c_norm * np.sign(z) * eval_cutoff(profile, az) * az ** (-1 - s)
    return float(out) if out.ndim == 0 else out


def _antiderivative(profile: CutoffProfile, s: float, c_norm: float, x: np.ndarray) -> np.ndarray:
    """``A(x) = int_0^x Q`` at increasing points ``0 < x``.

    Uses ``A(x) = c [int_0^x wbar r^-s dr + x * int_x^delta wbar r^(-1-s) dr]``
    and accumulates the transition integrals piece by piece.
    """
    a, delta = profile.plateau, profile.delta
    xc = np.minimum(x, delta)
    # Breakpoints for the transition pieces.
    pts = np.unique(np.concatenate([[a, delta], xc[(xc > a) & (xc < delta)]]))
    near = np.array([_transition_integral(profile, s, lo, hi) for lo, hi in zip(pts[:-1], pts[1:])])
    far = np.array([_transition_integral(profile, 1 + s, lo, hi) for lo, hi in zip(pts[:-1], pts[1:])])
    near_cum = np.concatenate([[0.0], np.cumsum(near)])  # int_a^pts[i]
    far_rcum = np.concatenate([np.cumsum(far[::-1])[::-1], [0.0]])  # int_pts[i]^delta

    out = np.empty(len(x))
    for i, v in enumerate(xc):
        if v <= a:
            head = v ** (1 - s) / (1 - s)
            tail = (v ** (-s) - a ** (-s)) / s + far_rcum[0]
        else:
            j = int(np.searchsorted(pts, v))
            head = a ** (1 - s) / (1 - s) + near_cum[j]
            tail = far_rcum[j]
        out[i] = head + v * tail
    return c_norm * out


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Discrete weights for one ``(profile, s, h)`` triple.

    ``q_weights[k + m]`` is the average of ``Q`` over the cell centred at
    ``k*h`` for ``|k| <= m``.  ``conv_weights`` are the weights actually used
    for ``Q * u``: the cell averages convolved with ``(-1, 26, -1)/24``, which
    removes the ``h^2 u''/24`` error of the piecewise-constant rule and
    multiplies the symbol by ``1 + (1 - cos theta)/12 > 0``.  ``d_weights`` are the gradient weights at the
    half-integer offsets ``d_offsets`` (in units of ``h``), so that
    ``Du(e) = h * sum d_weights * u(e - d_offsets*h)`` at a midpoint ``e``
    between two nodes away from the boundary of Omega.
    """

    profile: CutoffProfile
    s: float
    c_norm: float
    grid_h: float
    stencil_width: int
    q_weights: np.ndarray
    conv_weights: np.ndarray
    d_weights: np.ndarray
    d_offsets: np.ndarray
    rescale_factor: float
    min_symbol: float

    @property
    def delta(self) -> float:
        return self.profile.delta


def _stagger_weights(q: np.ndarray, h: float):
    m = (len(q) - 1) // 2
    offsets = np.arange(-m - 2, m + 2) + 0.5
    d = np.zeros(len(offsets))
    for o, c in zip(STAGGER_OFFSETS, STAGGER_COEFFS):
        k = np.rint(offsets + o).astype(int)
        ok = np.abs(k) <= m
        d[ok] += c * q[k[ok] + m] / h
    d = 0.5 * (d - d[::-1])  # exact oddness
    return d, offsets


def corrected_weights(q: np.ndarray) -> np.ndarray:
    """``q * (-1, 26, -1)/24`` on the same support, renormalised to the mass of ``q``.

    The two entries that would fall one cell outside the horizon equal
    ``-q[0]/24`` of the outermost, clipped cell and are dropped.  Where ``Q``
    bends through the cutoff transition the result can dip below zero by a
    tiny amount; its symbol stays positive.
    """
    w = q * (26.0 / 24.0)
    w[1:] -= q[:-1] / 24.0
    w[:-1] -= q[1:] / 24.0
    w = 0.5 * (w + w[::-1])
    return w * (q.sum() / w.sum())


def discrete_symbol(q: np.ndarray, h: float, oversample: int = 8) -> np.ndarray:
    """Real part of the DFT of the zero-padded weights, scaled by ``h``."""
    n = 1 << int(math.ceil(math.log2(oversample * len(q))))
    m = (len(q) - 1) // 2
    padded = np.zeros(n)
    padded[: m + 1] = q[m:]
    padded[n - m :] = q[:m]
    return h * np.fft.rfft(padded).real


def build_kernel_table(profile: CutoffProfile, s: float, grid_h: float) -> KernelTable:
    """Cell-averaged potential weights and staggered gradient weights."""
    _check_s(s)
    h = float(grid_h)
    if not 0 < h <= profile.delta / 4:
        raise ValueError(f"grid_h must lie in (0, delta/4], got {h}")
    c = normalization_constant(profile, s)
    m = int(round(profile.delta / h))

    # Exact cell averages from the antiderivative; the last cell is clipped at delta.
    right_edges = (np.arange(m + 1) + 0.5) * h
    A = _antiderivative(profile, s, c, right_edges)
    half = np.empty(m + 1)
    half[0] = 2 * A[0] / h
    half[1:] = np.diff(A) / h
    q = np.concatenate([half[:0:-1], half])

    factor = 1.0 / (h * q.sum())
    if abs(factor - 1) > 1e-3:
        raise QuadratureError(f"unit-mass rescaling factor {factor} is far from 1")
    q = q * factor

    w = corrected_weights(q)
    sym = discrete_symbol(w, h)
    if sym.min() <= 0:
        k = int(np.argmin(sym))
        raise PositivityError(f"discrete symbol of Q is {sym[k]:.3e} at frequency index {k}; refine the grid")

    d, offsets = _stagger_weights(w, h)
    for arr in (q, w, d, offsets):
        arr.setflags(write=False)
    return KernelTable(
        profile=profile,
        s=float(s),
        c_norm=c,
        grid_h=h,
        stencil_width=m,
        q_weights=q,
        conv_weights=w,
        d_weights=d,
        d_offsets=offsets,
        rescale_factor=factor,
        min_symbol=float(sym.min()),
    )
