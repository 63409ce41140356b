import numpy as np
import pytest

from rpbem.geometry import SurfaceMesh
from rpbem.quadrature import (
    gauss01,
    gauss_rule,
    map_reference,
    panel_pair_integral,
    reference_table,
    regularize,
    tensor4,
)

TRI = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])


def test_gauss_rule_n1():
    r = gauss_rule(1)
    assert r.nodes[0] == pytest.approx(0.0, abs=1e-15)
    assert r.weights[0] == pytest.approx(2.0, abs=1e-15)


def test_gauss_rule_n2():
    r = gauss_rule(2)
    assert np.allclose(sorted(r.nodes), [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    assert np.allclose(r.weights, [1.0, 1.0], atol=1e-15)


def test_gauss_rule_invalid():
    with pytest.raises(ValueError):
        gauss_rule(0)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 12])
def test_gauss_exactness(n):
    r = gauss_rule(n)
    assert r.weights.sum() == pytest.approx(2.0, abs=1e-14)
    assert np.allclose(r.nodes + r.nodes[::-1], 0.0, atol=1e-14)
    odd = float(r.weights @ r.nodes ** (2 * n - 1))
    assert abs(odd) < 1e-14
    even = float(r.weights @ r.nodes ** (2 * n - 2))
    exact = 2.0 / (2 * n - 1)
    assert even == pytest.approx(exact, abs=1e-13)


def test_tensor4_constant():
    assert tensor4(gauss_rule(3), lambda a, b, c, d: np.ones_like(a)) == pytest.approx(1.0)


def test_tensor4_separable_polynomial():
    val = tensor4(gauss_rule(2), lambda a, b, c, d: a * b * c * d)
    assert val == pytest.approx(1.0 / 16.0, abs=1e-14)


def test_tensor4_degree_exactness():
    val = tensor4(gauss_rule(3), lambda a, b, c, d: (a**5) * (b**4) * (c**3) * d)
    exact = (1 / 6) * (1 / 5) * (1 / 4) * (1 / 2)
    assert val == pytest.approx(exact, rel=1e-13)


def _product_reference(f, n=12):
    """Collapsed-square quadrature of f over both reference triangles."""
    x, w = gauss01(n)
    U1, V1, U2, V2 = np.meshgrid(x, x, x, x, indexing="ij")
    W = np.einsum("i,j,k,l->ijkl", w, w, w, w)
    return float(np.sum(W * U1 * U2 * f(U1, U1 * V1, U2, U2 * V2)))


@pytest.mark.parametrize("tag", ["identical", "common_edge", "common_vertex", "disjoint"])
def test_subdomain_maps_tile_product_domain(tag):
    """Every class decomposition must integrate polynomials exactly."""
    polys = [
        lambda a, b, c, d: np.ones_like(a),
        lambda a, b, c, d: a**2 * d + b * c**3,
        lambda a, b, c, d: (a - c) ** 2 * (b + d) + a * b * c * d,
    ]
    for f in polys:
        xh, yh, w = reference_table(tag, 12)
        got = float(w @ f(xh[:, 0], xh[:, 1], yh[:, 0], yh[:, 1]))
        assert got == pytest.approx(_product_reference(f), abs=1e-13)


def test_disjoint_constant_kernel_exact_any_order():
    verts = np.vstack([TRI, TRI + np.array([3.0, 0.0, 0.0])])
    mesh = SurfaceMesh(verts, [[0, 1, 2], [3, 4, 5]])
    exact = mesh.areas[0] * mesh.areas[1]
    for n in (1, 2, 4):
        val = panel_pair_integral(
            mesh, 0, 1, lambda r: 4.0 * np.pi * r, n=n
        )
        assert val == pytest.approx(exact, rel=1e-14)


def single_layer_constant_potential(x, tri):
    """Closed-form int_tri 1/(4 pi |x - y|) dy via analytic edge integrals."""
    out = np.zeros(x.shape[0])
    a_, b_, c_ = tri
    for (P, Q) in ((a_, b_), (b_, c_), (c_, a_)):
        E1 = P[None, :] - x
        E2 = np.broadcast_to((Q - P)[None, :], E1.shape)
        cr = np.cross(E1, E2)
        cross2 = np.einsum("ij,ij->i", cr, cr)
        area_i = 0.5 * np.sqrt(cross2)
        aa = np.einsum("ij,ij->i", E1, E1)
        bb = np.einsum("ij,ij->i", E1, E2)
        cc = np.einsum("ij,ij->i", E2, E2)
        sc = np.sqrt(cc)
        q0 = np.sqrt(aa)
        q1 = np.sqrt(np.maximum(aa + 2 * bb + cc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            num = np.where(bb + cc < 0, cross2 / (sc * q1 - (bb + cc)), sc * q1 + bb + cc)
            den = np.where(bb < 0, cross2 / (sc * q0 - bb), sc * q0 + bb)
            I = np.log(num / den) / sc
        I = np.where(cross2 > 0, I, 0.0)
        out += (2 * area_i / (4 * np.pi)) * I
    return out


def brute_force_identical_single_layer(tri, levels=12, n1d=12):
    """Outer edge-graded quadrature over the analytic inner potential."""
    cuts = np.array([0.0] + [2.0 ** (-k) for k in range(levels, 0, -1)] + [1.0])
    bks = np.unique(np.concatenate([0.5 * cuts, 1.0 - 0.5 * cuts[::-1]]))
    x01, w01 = gauss01(n1d)
    xs, ws = [], []
    for a, b in zip(bks[:-1], bks[1:]):
        xs.append(a + (b - a) * x01)
        ws.append((b - a) * w01)
    xs = np.concatenate(xs)
    ws = np.concatenate(ws)
    U, V = np.meshgrid(xs, xs, indexing="ij")
    WW = (ws[:, None] * ws[None, :]).ravel()
    Uf = U.ravel()
    X = (
        tri[0][None, :]
        + Uf[:, None] * (tri[1] - tri[0])[None, :]
        + (Uf * V.ravel())[:, None] * (tri[2] - tri[1])[None, :]
    )
    area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    g = single_layer_constant_potential(X, tri)
    return float(np.sum(WW * Uf * 2.0 * area * g))


def test_identical_singular_integral_matches_independent_oracle():
    mesh = SurfaceMesh(TRI, [[0, 1, 2]])
    val = panel_pair_integral(mesh, 0, 0, lambda r: np.ones_like(r), n=16)
    oracle = brute_force_identical_single_layer(TRI)
    assert val == pytest.approx(oracle, abs=1e-6)
    assert val == pytest.approx(oracle, rel=1e-8)


def test_identical_self_convergence():
    mesh = SurfaceMesh(TRI, [[0, 1, 2]])
    vals = {
        n: panel_pair_integral(mesh, 0, 0, lambda r: np.ones_like(r), n=n)
        for n in (10, 14, 20)
    }
    assert abs(vals[10] - vals[14]) < 1e-6
    assert abs(vals[14] - vals[20]) < 1e-8


def test_common_edge_finite_and_stable():
    verts = np.vstack([TRI, [[1.0, -1.0, 0.5]]])
    mesh = SurfaceMesh(verts, [[0, 1, 2], [0, 1, 3]])
    vals = [
        panel_pair_integral(mesh, 0, 1, lambda r: np.ones_like(r), n=n)
        for n in (8, 12, 16)
    ]
    assert np.isfinite(vals).all()
    assert abs(vals[1] - vals[2]) < 5e-7
    assert abs(vals[2]) > 1e-3  # sanity: a genuinely nonzero value


def test_regularize_rejects_mismatched_tag():
    from rpbem.geometry import classify_pair

    mesh = SurfaceMesh(TRI, [[0, 1, 2]])
    pair = classify_pair(mesh, 0, 0)
    reg = regularize(mesh, pair, 0, 0)
    assert reg.tag == "identical"


def test_kernel_zero_gives_zero():
    mesh = SurfaceMesh(TRI, [[0, 1, 2]])
    val = panel_pair_integral(mesh, 0, 0, lambda r: np.zeros_like(r), n=6)
    assert val == 0.0
