"""Reference solutions on the unit sphere and the decoupled 1D problem.

For spatially separable Dirichlet data g(t) * Y(x) with Y a low-order
spherical harmonic, the boundary equation on the unit sphere collapses to a
scalar Volterra convolution in time. The degree-0 kernel is exactly
1/2 on [0, 2]; its Laplace transform (1 - exp(-2s)) / (2s) pins the
correspondence with the product of half-order modified Bessel functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import timekernel
from .quadrature import gauss_rule
from .timebasis import TemporalBasis

__all__ = [
    "Kernel1D",
    "exact_phi_n0",
    "exact_phi_n0_wrapped",
    "exact_phi_n1",
    "y_0_0",
    "y_1_0",
    "solve_1d_galerkin",
    "assemble_1d",
    "residual_1d",
]


def y_0_0(x):
    """Constant spherical harmonic, 1/sqrt(4 pi)."""
    x = np.asarray(x, dtype=float)
    return np.full(x.shape[:-1], 0.5 / np.sqrt(np.pi))


def y_1_0(x):
    """Degree-1, order-0 spherical harmonic on the unit sphere."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(3.0 / (4.0 * np.pi)) * x[..., 2]


@dataclass(frozen=True)
class Kernel1D:
    """Degree-0 time-convolution kernel: 1/2 on [0, 2], zero elsewhere."""

    height: float = 0.5
    cutoff: float = 2.0

    def value(self, tau):
        tau = np.asarray(tau, dtype=float)
        out = np.where((tau >= 0.0) & (tau <= self.cutoff), self.height, 0.0)
        return out if out.ndim else float(out)

    def laplace_numeric(self, s, n=60):
        """Numerical Laplace transform at s via Gauss on the support."""
        rule = gauss_rule(n)
        half = 0.5 * self.cutoff
        tau = half + half * rule.nodes
        return float(half * rule.weights @ (self.height * np.exp(-s * tau)))

    def laplace_closed(self, s):
        return (1.0 - np.exp(-2.0 * s)) / (2.0 * s)


def exact_phi_n0(g_dot, t):
    """Density for constant-in-space data on the unit sphere, t < 2: 2 g'(t)."""
    t = np.asarray(t, dtype=float)
    out = 2.0 * np.asarray(g_dot(t))
    return out if out.ndim else float(out)


def exact_phi_n0_wrapped(g_dot, t):
    """Same as exact_phi_n0 but valid for all t >= 0.

    Differentiating the convolution identity gives the recursion
    phi(t) = 2 g'(t) + phi(t - 2), so the value is a finite sum of shifted
    derivative evaluations.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t_arr)
    t_max = float(t_arr.max()) if t_arr.size else -1.0
    shift = 0.0
    while shift <= t_max:
        mask = t_arr >= shift
        if np.any(mask):
            out[mask] += 2.0 * np.asarray(g_dot(t_arr[mask] - shift))
        shift += 2.0
    return out if np.ndim(t) else float(out[0])


def exact_phi_n1(g_dot, t, n=80):
    """Density factor for degree-1 data: 2 g'(t) + 2 int_0^t sinh(u) g'(t-u) du."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    rule = gauss_rule(n)
    out = 2.0 * np.asarray(g_dot(t_arr), dtype=float).copy()
    pos = t_arr > 0
    if np.any(pos):
        tp = t_arr[pos]
        half = 0.5 * tp
        nodes = half[:, None] * (rule.nodes[None, :] + 1.0)
        vals = np.sinh(nodes) * np.asarray(g_dot(tp[:, None] - nodes))
        out[pos] += 2.0 * half * (vals @ rule.weights)
    return out if np.ndim(t) else float(out[0])


# --- 1D Galerkin -------------------------------------------------------------

def _antideriv(f, t):
    """Integral of the smooth derivative of basis function f from -infinity.

    Coincides with f except for the p = 0 left-end bump, whose smooth
    derivative integrates to value - 1 on [0, inf).
    """
    t = np.asarray(t, dtype=float)
    v = f.value(t)
    if f.kind == "left_plain":
        return np.where(t >= f.window[0], v - 1.0, 0.0)
    return v


def _box_convolved_deriv(f, t, kernel):
    """(K * f')(t) for the box kernel: telescoped to antiderivative values."""
    return kernel.height * (_antideriv(f, t) - _antideriv(f, np.asarray(t) - kernel.cutoff))


def assemble_1d(basis, kernel=Kernel1D(), n_gauss=40):
    """Time-differentiated Galerkin matrix of the scalar convolution problem.

    Entry (k, i) integrates the box kernel against the (k, i) retarded time
    kernel; the kernel convolution telescopes, leaving a bandwidth-limited
    Gauss integral split at breakpoints and their kernel shifts.
    Translation-equal pairs are computed once.
    """
    L = len(basis)
    A = np.zeros((L, L))
    from .galerkin import _translation_key

    rule = gauss_rule(n_gauss)
    cache = {}
    for k in range(L):
        fk = basis[k]
        for i in range(L):
            fi = basis[i]
            a, b = timekernel.kernel_support(basis, k, i)
            if min(b, kernel.cutoff) - max(a, 0.0) <= 1e-14:
                continue
            key = _translation_key(fk, fi)
            if key in cache:
                A[k, i] = cache[key]
                continue
            lo, hi = fk.support
            cuts = {lo, hi}
            for c in fi.breakpoints:
                for shift in (0.0, kernel.cutoff):
                    if lo < c + shift < hi:
                        cuts.add(c + shift)
            for c in fk.breakpoints:
                if lo < c < hi:
                    cuts.add(c)
            cuts = sorted(cuts)
            total = 0.0
            for s0, s1 in zip(cuts[:-1], cuts[1:]):
                half = 0.5 * (s1 - s0)
                t = 0.5 * (s0 + s1) + half * rule.nodes
                total += half * float(
                    rule.weights @ (fk.value(t) * _box_convolved_deriv(fi, t, kernel))
                )
            cache[key] = total
            A[k, i] = total
    return A


def solve_1d_galerkin(grid, p, g_dot, kernel=Kernel1D(), n_gauss=40, n_rhs=40):
    """Galerkin coefficients of the scalar problem with data derivative g_dot."""
    from .galerkin import temporal_load

    basis = TemporalBasis(grid, p)
    A = assemble_1d(basis, kernel, n_gauss)
    rhs = temporal_load(basis, g_dot, n=n_rhs)
    coeffs = np.linalg.solve(A, rhs)
    return basis, coeffs


def residual_1d(basis, coeffs, g_dot, kernel=Kernel1D()):
    """Pointwise residual of the 1D solution.

    The convolution of the kernel with the density derivative telescopes to
    antiderivative differences, so no quadrature is needed.
    """

    def r(t):
        t = np.asarray(t, dtype=float)
        acc = -np.asarray(g_dot(t), dtype=float)
        for i, fi in enumerate(basis):
            c = coeffs[i]
            if c != 0.0:
                acc = acc + c * _box_convolved_deriv(fi, t, kernel)
        return acc

    return r
