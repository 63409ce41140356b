"""Scalar special functions and orthogonal polynomial evaluation.

Everything here is pure and vectorized over numpy arrays; scalars in give
scalars out.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _special

__all__ = [
    "erf",
    "artanh",
    "legendre",
    "legendre_with_deriv",
    "clenshaw",
]


def erf(x):
    """Gauss error function, accurate to ~1 ulp, saturating to +-1 for large |x|."""
    return _special.erf(x)


def artanh(x):
    """Inverse hyperbolic tangent, 0.5*log((1+x)/(1-x)).

    Raises ValueError for |x| >= 1; callers that approach the endpoints must
    clamp first.
    """
    x = np.asarray(x)
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("artanh requires |x| < 1")
    out = np.arctanh(x)
    return out if out.ndim else float(out)


def legendre(m, x):
    """Legendre polynomial P_m(x) by the three-term recurrence.

    Tolerates x slightly outside [-1, 1] (quadrature round-off).
    """
    x = np.asarray(x, dtype=float)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    for k in range(m):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p if p.ndim else float(p)


def legendre_with_deriv(m, x):
    """(P_m(x), P_m'(x)) via the joint recurrence.

    The derivative recurrence P'_{k+1} = P'_{k-1} + (2k+1) P_k avoids any
    division by (1 - x^2), so the endpoints are exact.
    """
    x = np.asarray(x, dtype=float)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    d_prev = np.zeros_like(x)
    d = np.zeros_like(x)
    for k in range(m):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d_prev, d = d, d_prev + (2 * k + 1) * p_prev
    if p.ndim:
        return p, d
    return float(p), float(d)


def clenshaw(coeffs, x):
    """Evaluate sum_{v=0}^{q-1} c_v T_v(x) - c_0/2 by Clenshaw's recurrence."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size == 0:
        raise ValueError("clenshaw needs at least one coefficient")
    x = np.asarray(x, dtype=float)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    two_x = 2.0 * x
    for v in range(coeffs.size - 1, 0, -1):
        b1, b2 = two_x * b1 - b2 + coeffs[v], b1
    out = x * b1 - b2 + 0.5 * coeffs[0]
    return out if out.ndim else float(out)
