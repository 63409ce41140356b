"""Smooth compactly supported temporal basis on a (possibly nonuniform) time grid.

The basis multiplies a C-infinity partition of unity, built from the smooth
step ``smooth_step``, with Legendre polynomials rescaled to each window. The
enrichment order ``p`` controls the polynomial degree; ``p = 0`` keeps just
the partition-of-unity bumps.

Evaluation routines accept scalars or numpy arrays and return matching
shapes. Every function evaluates to exactly 0.0 outside its window, so
support arithmetic downstream can be exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf as _erf

from .specfun import legendre_with_deriv

__all__ = [
    "TimeGrid",
    "BasisFunction",
    "TemporalBasis",
    "smooth_step",
    "smooth_step_deriv",
    "bump",
    "bump_deriv",
    "partition_of_unity",
    "build_basis",
]

# Clamp distance from the +-1 endpoints before arctanh; erf saturates there,
# so the clamp perturbs values by < 1e-15.
_EDGE = 1.0 - 1e-12
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def _step01(s):
    """Smooth step on [-1, 1]: 0.5*erf(2*artanh(s)) + 0.5, with 0/1 tails."""
    sc = np.clip(s, -_EDGE, _EDGE)
    return 0.5 * _erf(2.0 * np.arctanh(sc)) + 0.5


def _step01_deriv(s):
    sc = np.clip(s, -_EDGE, _EDGE)
    u = np.arctanh(sc)
    return _TWO_OVER_SQRT_PI * np.exp(-4.0 * u * u) / (1.0 - sc * sc)


def smooth_step(t):
    """The C-infinity step: 0 for t <= -1, 1 for t >= 1, erf(2 artanh t) blend between."""
    t = np.asarray(t, dtype=float)
    out = _step01(t)
    return out if out.ndim else float(out)


def smooth_step_deriv(t):
    t = np.asarray(t, dtype=float)
    out = _step01_deriv(t)
    return out if out.ndim else float(out)


def _scaled(t, a, b):
    return (2.0 * t - (a + b)) / (b - a)


def bump(a, b, c, t):
    """Bump on [a, c] with joint b: rises as a smooth step on [a, b], falls on [b, c]."""
    if not (a < b < c):
        raise ValueError(f"degenerate bump interval ({a}, {b}, {c})")
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    rise = (t >= a) & (t <= b)
    fall = (t > b) & (t <= c)
    out[rise] = _step01(_scaled(t[rise], a, b))
    out[fall] = 1.0 - _step01(_scaled(t[fall], b, c))
    return out if out.ndim else float(out)


def bump_deriv(a, b, c, t):
    if not (a < b < c):
        raise ValueError(f"degenerate bump interval ({a}, {b}, {c})")
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    rise = (t >= a) & (t <= b)
    fall = (t > b) & (t <= c)
    out[rise] = _step01_deriv(_scaled(t[rise], a, b)) * (2.0 / (b - a))
    out[fall] = -_step01_deriv(_scaled(t[fall], b, c)) * (2.0 / (c - b))
    return out if out.ndim else float(out)


class TimeGrid:
    """Ordered breakpoints t_0 = 0 < t_1 < ... < t_{l-1} = T."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("time grid needs at least two breakpoints")
        if pts[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("time grid breakpoints must be strictly increasing")
        pts.setflags(write=False)
        self.points = pts

    @classmethod
    def uniform(cls, horizon, n_points):
        if n_points < 2:
            raise ValueError("need at least two grid points")
        return cls(np.linspace(0.0, horizon, n_points))

    @property
    def horizon(self):
        return float(self.points[-1])

    def __len__(self):
        return self.points.size

    def __repr__(self):
        return f"TimeGrid(l={len(self)}, T={self.horizon:g})"


@dataclass(frozen=True)
class BasisFunction:
    """One temporal shape function.

    kind:
      ``left_plain``  the p = 0 left-end bump (descending step),
      ``left``        left-end bump weighted by 8 (t/t_1)^2 P_{m-2},
      ``interior``    bump over (t_{i-2}, t_{i-1}, t_i) times P_m,
      ``right``       ascending step over (t_{l-2}, t_{l-1}) times P_m.

    window holds the defining breakpoints (2 or 3 of them); degree is the
    Legendre index m (-1 for ``left_plain``).
    """

    kind: str
    window: tuple
    degree: int
    index: int = -1

    @property
    def support(self):
        return (self.window[0], self.window[-1])

    @property
    def breakpoints(self):
        return self.window

    def _mask(self, t):
        return (t >= self.window[0]) & (t <= self.window[-1])

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = self._mask(t)
        if np.any(m):
            out[m] = self._value_in(t[m])
        return out if out.ndim else float(out)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = self._mask(t)
        if np.any(m):
            out[m] = self._deriv_in(t[m])
        return out if out.ndim else float(out)

    def _value_in(self, t):
        kind = self.kind
        if kind == "left_plain":
            a, b = self.window
            return 1.0 - _step01(_scaled(t, a, b))
        if kind == "left":
            a, b = self.window
            mu = 1.0 - _step01(_scaled(t, a, b))
            tau = t / b
            pm, _ = legendre_with_deriv(self.degree - 2, 2.0 * tau - 1.0)
            return mu * 8.0 * tau * tau * pm
        if kind == "interior":
            a, b, c = self.window
            mu = bump(a, b, c, t)
            pm, _ = legendre_with_deriv(self.degree, _scaled(t, a, c))
            return mu * pm
        if kind == "right":
            a, b = self.window
            mu = _step01(_scaled(t, a, b))
            pm, _ = legendre_with_deriv(self.degree, _scaled(t, a, b))
            return mu * pm
        raise ValueError(f"unknown basis kind {kind!r}")

    def _deriv_in(self, t):
        kind = self.kind
        if kind == "left_plain":
            a, b = self.window
            return -_step01_deriv(_scaled(t, a, b)) * (2.0 / (b - a))
        if kind == "left":
            a, b = self.window
            s = _scaled(t, a, b)
            mu = 1.0 - _step01(s)
            dmu = -_step01_deriv(s) * (2.0 / (b - a))
            tau = t / b
            pm, dpm = legendre_with_deriv(self.degree - 2, 2.0 * tau - 1.0)
            w = 8.0 * tau * tau
            dw = 16.0 * tau / b
            return dmu * w * pm + mu * (dw * pm + w * dpm * (2.0 / b))
        if kind == "interior":
            a, b, c = self.window
            mu = bump(a, b, c, t)
            dmu = bump_deriv(a, b, c, t)
            pm, dpm = legendre_with_deriv(self.degree, _scaled(t, a, c))
            return dmu * pm + mu * dpm * (2.0 / (c - a))
        if kind == "right":
            a, b = self.window
            s = _scaled(t, a, b)
            mu = _step01(s)
            dmu = _step01_deriv(s) * (2.0 / (b - a))
            pm, dpm = legendre_with_deriv(self.degree, s)
            return dmu * pm + mu * dpm * (2.0 / (b - a))
        raise ValueError(f"unknown basis kind {kind!r}")


def partition_of_unity(grid):
    """The l bump functions summing to one on [0, T]."""
    pts = grid.points
    l = len(grid)
    funcs = [BasisFunction("left_plain", (pts[0], pts[1]), -1, 0)]
    for i in range(2, l):
        funcs.append(BasisFunction("interior", (pts[i - 2], pts[i - 1], pts[i]), 0, i - 1))
    funcs.append(BasisFunction("right", (pts[l - 2], pts[l - 1]), 0, l - 1))
    return funcs


class TemporalBasis:
    """Ordered family of basis functions: left-end block, interior by (window,
    degree), then the right-end block."""

    def __init__(self, grid, p):
        if p < 0:
            raise ValueError("enrichment order p must be >= 0")
        self.grid = grid
        self.p = p
        pts = grid.points
        l = len(grid)
        funcs = []
        # Left end: the weighted family for every p (the range m = 2..max(2, p)
        # is nonempty even at p = 0). Substituting the plain descending bump
        # here would put the constant function in the span, and constants are
        # annihilated by the time differentiation in the weak form, leaving
        # the system matrix with an exact null vector.
        for m in range(2, max(2, p) + 1):
            funcs.append(BasisFunction("left", (pts[0], pts[1]), m))
        for i in range(2, l):
            win = (pts[i - 2], pts[i - 1], pts[i])
            for m in range(0, p + 1):
                funcs.append(BasisFunction("interior", win, m, i - 1))
        win = (pts[l - 2], pts[l - 1])
        for m in range(0, p + 1):
            funcs.append(BasisFunction("right", win, m, l - 1))
        self.functions = tuple(
            BasisFunction(f.kind, f.window, f.degree, idx)
            for idx, f in enumerate(funcs)
        )
        self.supports = np.array([f.support for f in self.functions])

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, k):
        return self.functions[k]

    @staticmethod
    def dof_count(l, p):
        return max(1, p - 1) + (l - 2) * (p + 1) + (p + 1)


def build_basis(grid, p):
    return TemporalBasis(grid, p)
