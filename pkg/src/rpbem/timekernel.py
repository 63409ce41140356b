"""Univariate retarded kernels and their piecewise Chebyshev surrogates.

For a pair of temporal basis functions (test index k, ansatz index i) the
spatial double integral only sees time through

    kernel(r) = int_0^T  d/dt[b_i](t - r) * b_k(t) dt,

a smooth compactly supported function of the distance r. Evaluating it
directly needs a split Gauss rule per point, which is far too slow inside a
4D panel quadrature, so each kernel is fitted once with piecewise Chebyshev
polynomials and then evaluated by Clenshaw recurrences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import gauss_rule

__all__ = [
    "kernel_support",
    "time_kernel",
    "ChebSurrogate",
    "fit_surrogate",
    "eval_surrogate",
    "sup_error",
    "integrate_kernel",
]

_CHUNK = 16384


def kernel_support(basis, k, i):
    """Support interval [a, b] of the (k, i) kernel from the factor supports."""
    k_lo, k_hi = basis[k].support
    i_lo, i_hi = basis[i].support
    return (k_lo - i_hi, k_hi - i_lo)


def _segment_nodes(bk, bi, r, n_gauss):
    """Per-r integration segments of supp(b_k) cut by supp(b_i)+r breakpoints.

    r: (N,) array. Returns Gauss nodes (N, S, G), weights (G,), half-lengths
    (N, S) with empty segments collapsed to zero length.
    """
    lo = np.maximum(bk.support[0], bi.support[0] + r)
    hi = np.minimum(bk.support[1], bi.support[1] + r)
    cuts = np.concatenate(
        [
            np.broadcast_to(np.asarray(bk.breakpoints), (r.size, len(bk.breakpoints))),
            np.asarray(bi.breakpoints)[None, :] + r[:, None],
        ],
        axis=1,
    )
    cuts = np.clip(cuts, lo[:, None], hi[:, None])
    cuts.sort(axis=1)
    half = 0.5 * np.diff(cuts, axis=1)
    mid = 0.5 * (cuts[:, 1:] + cuts[:, :-1])
    rule = gauss_rule(n_gauss)
    nodes = mid[:, :, None] + half[:, :, None] * rule.nodes[None, None, :]
    return nodes, rule.weights, half


def time_kernel(basis, k, i, r, n_gauss=40):
    """Gauss-Legendre value of the (k, i) kernel at distance(s) r.

    The integrand is smooth on each segment between breakpoints of b_k and
    the shifted breakpoints of b_i, so the rule is applied per segment.
    Vectorized over r; exact zero outside the support interval.
    """
    bk = basis[k]
    bi = basis[i]
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros_like(r_arr)
    a, b = kernel_support(basis, k, i)
    inside = (r_arr > a) & (r_arr < b)
    idx = np.nonzero(inside)[0]
    for start in range(0, idx.size, _CHUNK):
        sel = idx[start : start + _CHUNK]
        nodes, w, half = _segment_nodes(bk, bi, r_arr[sel], n_gauss)
        vals = bk.value(nodes.ravel()) * bi.deriv((nodes - r_arr[sel, None, None]).ravel())
        vals = vals.reshape(nodes.shape)
        out[sel] = np.einsum("nsg,g,ns->n", vals, w, half)
    return out if np.ndim(r) else float(out[0])


@dataclass(frozen=True)
class ChebSurrogate:
    """Piecewise Chebyshev representation of one retarded time kernel.

    The support [a, b] is tiled by m equal subintervals; on each one the
    kernel is the series sum_v c_v T_v(x) - c_0/2 with x the affine image of
    r in [-1, 1]. Evaluation outside [a, b] returns zero.
    """

    a: float
    b: float
    m: int
    q: int
    coeffs: np.ndarray  # (m, q)
    source: tuple = (-1, -1)

    @property
    def h(self):
        return (self.b - self.a) / self.m

    def __call__(self, r):
        return eval_surrogate(self, r)


def chebyshev_fit(fn, a, b, m, q):
    """Fit fn on [a, b] with m subintervals and q Chebyshev coefficients each.

    Calls fn on exactly one array of q nodes per subinterval (m*q points in
    total). Returns the (m, q) coefficient table.
    """
    if m < 1 or q < 1:
        raise ValueError("need m >= 1 subintervals and q >= 1 coefficients")
    h = (b - a) / m
    kk = np.arange(1, q + 1)
    x = np.cos(np.pi * (kk - 0.5) / q)
    # cos(pi*v*(k-0.5)/q) table, rows v, cols k
    vv = np.arange(q)
    cos_table = np.cos(np.pi * vv[:, None] * (kk[None, :] - 0.5) / q)
    coeffs = np.empty((m, q))
    for j in range(m):
        lo = a + j * h
        nodes = 0.5 * (x + 1.0) * h + lo
        fvals = fn(nodes)
        coeffs[j] = (2.0 / q) * cos_table @ fvals
    return coeffs


def fit_surrogate(basis, k, i, m, q, n_gauss=40, kernel_fn=None):
    """Chebyshev surrogate of the (k, i) kernel on its full support."""
    a, b = kernel_support(basis, k, i)
    if kernel_fn is None:
        def kernel_fn(r):
            return time_kernel(basis, k, i, r, n_gauss)

    coeffs = chebyshev_fit(kernel_fn, a, b, m, q)
    return ChebSurrogate(a, b, m, q, coeffs, (k, i))


def eval_surrogate(s, r):
    """Clenshaw evaluation of a surrogate; zero outside [a, b]."""
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros_like(r_arr)
    inside = (r_arr >= s.a) & (r_arr <= s.b)
    if np.any(inside):
        rr = r_arr[inside]
        h = s.h
        j = np.minimum((np.floor((rr - s.a) / h)).astype(np.intp), s.m - 1)
        x = (rr - (s.a + j * h)) * (2.0 / h) - 1.0
        b1 = np.zeros_like(rr)
        b2 = np.zeros_like(rr)
        two_x = 2.0 * x
        C = s.coeffs
        for v in range(s.q - 1, 0, -1):
            b1, b2 = two_x * b1 - b2 + C[j, v], b1
        out[inside] = x * b1 - b2 + 0.5 * C[j, 0]
    return out if np.ndim(r) else float(out[0])


def sup_error(s, basis, k, i, n_samples=1000, n_gauss=40):
    """Max deviation from the direct kernel over equispaced sample points."""
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    r = np.linspace(s.a, s.b, n_samples)
    exact = time_kernel(basis, k, i, r, n_gauss)
    return float(np.max(np.abs(exact - eval_surrogate(s, r))))


def integrate_kernel(basis, k, i, lo=None, hi=None, n_gauss=40, extra_breaks=()):
    """Integral of the (k, i) kernel over [lo, hi] (default: full support).

    Splits at breakpoint differences of the two factors, where the kernel
    switches between smooth pieces, plus any caller-supplied cut points.
    """
    a, b = kernel_support(basis, k, i)
    lo = a if lo is None else max(lo, a)
    hi = b if hi is None else min(hi, b)
    if hi <= lo:
        return 0.0
    bk = basis[k]
    bi = basis[i]
    cuts = {lo, hi}
    for ck in bk.breakpoints:
        for ci in bi.breakpoints:
            d = ck - ci
            if lo < d < hi:
                cuts.add(d)
    for c in extra_breaks:
        if lo < c < hi:
            cuts.add(float(c))
    cuts = sorted(cuts)
    rule = gauss_rule(n_gauss)
    total = 0.0
    for s0, s1 in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (s1 - s0)
        nodes = 0.5 * (s0 + s1) + half * rule.nodes
        total += half * float(rule.weights @ time_kernel(basis, k, i, nodes, n_gauss))
    return total
