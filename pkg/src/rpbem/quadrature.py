"""Gauss-Legendre rules, 4D tensor quadrature, and regularizing transforms
for singular triangle-pair integrals.

Both triangles are parametrized over the reference element
{(u, v): 0 <= v <= u <= 1} by chi(u, v) = A + u (B - A) + v (C - B). For
pairs that touch (identical, shared edge, shared vertex) the product domain
is split into subdomains (6 / 5 / 2 of them) on which relative coordinates
turn the 1/|x-y| singularity into a bounded integrand; the Jacobian of each
subdomain map appears as a polynomial weight on the unit 4-cube. Disjoint
pairs use the plain per-triangle collapsed-square map.

Reference tables (cube points mapped to reference-element coordinate pairs
plus weights) depend only on (pair class, n) and are cached; applying them
to a concrete pair is a handful of dense array operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "GaussRule",
    "gauss_rule",
    "gauss01",
    "tensor4",
    "RegularizedIntegrand",
    "regularize",
    "panel_pair_integral",
    "reference_table",
]


@dataclass(frozen=True)
class GaussRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self):
        return self.nodes.size


@lru_cache(maxsize=None)
def _leggauss(n):
    if n < 1:
        raise ValueError("Gauss rule needs n >= 1")
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(n):
    """n-point Gauss-Legendre rule on (-1, 1)."""
    x, w = _leggauss(n)
    return GaussRule(x, w)


def gauss01(n):
    """n-point Gauss-Legendre nodes/weights shifted to (0, 1)."""
    x, w = _leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def tensor4(rule, integrand):
    """Tensor-product integral over the unit 4-cube.

    ``integrand`` receives four flat coordinate arrays of length n^4 and
    must return the values; n^4 points total.
    """
    x01 = 0.5 * (rule.nodes + 1.0)
    w01 = 0.5 * rule.weights
    g = np.meshgrid(x01, x01, x01, x01, indexing="ij")
    wts = np.einsum("i,j,k,l->ijkl", w01, w01, w01, w01).ravel()
    vals = integrand(*(c.ravel() for c in g))
    return float(wts @ np.asarray(vals))


# --- Sauter-style subdomain maps -------------------------------------------
#
# Each entry maps cube coordinates (xi, e1, e2, e3) to reference-element
# points xhat, yhat for the two factors; w is the subdomain Jacobian.

def _regions_identical(xi, e1, e2, e3):
    w = xi**3 * e1**2 * e2
    out = []
    x_a = xi * (1.0 - e1 + e1 * e2)
    y_a = xi * (1.0 - e1)
    out.append(((xi, x_a), (xi * (1.0 - e1 * e2 * e3), y_a), w))
    out.append(((xi * (1.0 - e1 * e2 * e3), y_a), (xi, x_a), w))
    x_b = xi * e1 * (1.0 - e2 + e2 * e3)
    y_b = xi * e1 * (1.0 - e2)
    out.append(((xi, x_b), (xi * (1.0 - e1 * e2), y_b), w))
    out.append(((xi * (1.0 - e1 * e2), y_b), (xi, x_b), w))
    out.append(((xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)), (xi, y_b), w))
    out.append(((xi, y_b), (xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)), w))
    return out


def _regions_common_edge(xi, e1, e2, e3):
    w1 = xi**3 * e1**2
    w = xi**3 * e1**2 * e2
    return [
        ((xi, xi * e1 * e3), (xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)), w1),
        ((xi, xi * e1), (xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)), w),
        ((xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)), (xi, xi * e1 * e2 * e3), w),
        ((xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)), (xi, xi * e1), w),
        ((xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)), (xi, xi * e1 * e2), w),
    ]


def _regions_common_vertex(xi, e1, e2, e3):
    w = xi**3 * e2
    return [
        ((xi, xi * e1), (xi * e2, xi * e2 * e3), w),
        ((xi * e2, xi * e2 * e3), (xi, xi * e1), w),
    ]


def _regions_disjoint(u1, v1, u2, v2):
    # collapsed-square map per triangle: (u, uv) with Jacobian u
    return [(((u1, u1 * v1)), (u2, u2 * v2), u1 * u2)]


_REGION_BUILDERS = {
    "identical": _regions_identical,
    "common_edge": _regions_common_edge,
    "common_vertex": _regions_common_vertex,
    "disjoint": _regions_disjoint,
}


@lru_cache(maxsize=8)
def reference_table(tag, n):
    """Cube points for one pair class: xhat (K, 2), yhat (K, 2), weights (K,).

    The weights include the 1D Gauss weights and the subdomain Jacobians;
    the only missing factor is 4*area(tau1)*area(tau2) of the affine maps.
    """
    x01, w01 = gauss01(n)
    g = np.meshgrid(x01, x01, x01, x01, indexing="ij")
    coords = [c.ravel() for c in g]
    wts = np.einsum("i,j,k,l->ijkl", w01, w01, w01, w01).ravel()
    xs, ys, ws = [], [], []
    for xhat, yhat, w in _REGION_BUILDERS[tag](*coords):
        xs.append(np.column_stack(np.broadcast_arrays(*xhat)))
        ys.append(np.column_stack(np.broadcast_arrays(*yhat)))
        ws.append(wts * w)
    xhat = np.vstack(xs)
    yhat = np.vstack(ys)
    w = np.concatenate(ws)
    xhat.setflags(write=False)
    yhat.setflags(write=False)
    w.setflags(write=False)
    return xhat, yhat, w


def _tri_area(verts):
    return 0.5 * np.linalg.norm(np.cross(verts[1] - verts[0], verts[2] - verts[0]))


def map_reference(verts, uhat):
    """chi(u, v) = A + u (B - A) + v (C - B) applied to reference points (K, 2)."""
    a, b, c = verts
    return a + np.outer(uhat[:, 0], b - a) + np.outer(uhat[:, 1], c - b)


def reference_barycentric(uhat):
    """Barycentric weights (lambda_A, lambda_B, lambda_C) at reference points."""
    return np.column_stack([1.0 - uhat[:, 0], uhat[:, 0] - uhat[:, 1], uhat[:, 1]])


def _match_vertices(mesh, t1, t2):
    """Vertex index triples reordered so shared entities come first.

    identical: same order both sides. common edge: shared pair (A, B) first
    in both, same orientation. common vertex: shared vertex first.
    """
    tri1 = list(mesh.triangles[t1])
    tri2 = list(mesh.triangles[t2])
    shared = [v for v in tri1 if v in tri2]
    if len(shared) == 3:
        return tri1, tri1, "identical"
    if len(shared) == 2:
        a, b = shared
        o1 = [a, b] + [v for v in tri1 if v not in shared]
        o2 = [a, b] + [v for v in tri2 if v not in shared]
        return o1, o2, "common_edge"
    if len(shared) == 1:
        a = shared[0]
        o1 = [a] + [v for v in tri1 if v != a]
        o2 = [a] + [v for v in tri2 if v != a]
        return o1, o2, "common_vertex"
    return tri1, tri2, "disjoint"


@dataclass
class RegularizedIntegrand:
    """A concrete pair's pullback to the unit 4-cube.

    ``points(n)`` returns physical quadrature data: x (K, 3), y (K, 3) and
    combined weights (K,) that already include the affine Jacobian
    4*area(tau1)*area(tau2).
    """

    tag: str
    verts1: np.ndarray  # (3, 3) matched ordering
    verts2: np.ndarray
    order1: list  # vertex ids in matched order
    order2: list

    def points(self, n):
        xhat, yhat, w = reference_table(self.tag, n)
        x = map_reference(self.verts1, xhat)
        y = map_reference(self.verts2, yhat)
        jac = 4.0 * _tri_area(self.verts1) * _tri_area(self.verts2)
        return x, y, jac * w

    def reference(self, n):
        return reference_table(self.tag, n)


def regularize(mesh, pair, t1, t2):
    """Build the regularized cube map for a classified panel pair."""
    o1, o2, tag = _match_vertices(mesh, t1, t2)
    if pair is not None and pair.tag != tag:
        raise ValueError(f"pair classified as {pair.tag!r} but shares {tag!r} layout")
    return RegularizedIntegrand(
        tag,
        mesh.vertices[np.asarray(o1)],
        mesh.vertices[np.asarray(o2)],
        o1,
        o2,
    )


def panel_pair_integral(mesh, t1, t2, kernel, basis_values=None, n=8, pair=None):
    """Tensor-Gauss value of the regularized pair integral

        int_{tau1} int_{tau2} basis(x, y) * kernel(|x-y|) / (4 pi |x-y|).
    """
    reg = regularize(mesh, pair, t1, t2)
    x, y, w = reg.points(n)
    d = x - y
    r = np.sqrt(np.einsum("ij,ij->i", d, d))
    vals = kernel(r) / (4.0 * np.pi * r)
    if basis_values is not None:
        vals = vals * basis_values(x, y)
    return float(w @ vals)
