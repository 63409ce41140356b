import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpbem.geometry import (
    PanelPairClass,
    SurfaceMesh,
    classify_pair,
    load_mesh,
    make_sphere,
    make_torus,
    near_far,
    save_mesh,
    triangle_distance_range,
)

CASE_BASE = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
CASE_FAR = np.array([[1.0, 0.0, 0.0], [1.0, 0.9, 0.0], [0.0, 1.0, 0.2]])


def test_icosahedron_counts():
    mesh = make_sphere(0)
    assert mesh.n_triangles == 20
    assert mesh.n_vertices == 12


def test_sphere_refinement_counts_and_area():
    mesh = make_sphere(2)
    assert mesh.n_triangles == 320
    area = mesh.areas.sum()
    assert abs(area - 4.0 * np.pi) / (4.0 * np.pi) < 0.03


def test_sphere_vertices_on_unit_sphere():
    mesh = make_sphere(2)
    r = np.linalg.norm(mesh.vertices, axis=1)
    assert np.max(np.abs(r - 1.0)) < 1e-14


def test_sphere_normals_outward():
    mesh = make_sphere(1)
    c = mesh.corners
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    assert np.all(np.einsum("ij,ij->i", n, mesh.centroids) > 0)


def test_torus_counts_euler_area():
    mesh = make_torus(2.0, 0.5, 24, 24)
    assert mesh.n_triangles == 1152
    V = mesh.n_vertices
    E = len({tuple(sorted(e)) for t in mesh.triangles for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))})
    F = mesh.n_triangles
    assert V - E + F == 0
    area = mesh.areas.sum()
    exact = 4.0 * np.pi**2 * 2.0 * 0.5
    assert abs(area - exact) / exact < 0.03


def test_torus_invalid_radii():
    with pytest.raises(ValueError):
        make_torus(0.5, 2.0, 8, 8)
    with pytest.raises(ValueError):
        make_torus(2.0, 0.5, 2, 8)


def test_off_roundtrip(tmp_path):
    mesh = make_sphere(1)
    path = tmp_path / "sphere.off"
    save_mesh(mesh, path)
    back = load_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)


def test_off_rejects_quad_face(tmp_path):
    path = tmp_path / "quad.off"
    path.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
    with pytest.raises(ValueError, match="face 0"):
        load_mesh(path)


def test_off_rejects_empty(tmp_path):
    path = tmp_path / "empty.off"
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        load_mesh(path)


def test_classify_identical():
    mesh = SurfaceMesh(CASE_BASE, [[0, 1, 2]])
    assert classify_pair(mesh, 0, 0).tag == "identical"


def test_classify_case3_near_field():
    verts = np.vstack([CASE_BASE, CASE_FAR + 2.0])
    mesh = SurfaceMesh(verts, [[0, 1, 2], [3, 4, 5]])
    pair = classify_pair(mesh, 0, 1)
    assert pair.tag == "disjoint"
    h = mesh.diameters.max()
    assert near_far(pair, h) == "near"


def test_classify_case4_far_field():
    verts = np.vstack([CASE_BASE, CASE_FAR + 20.0])
    mesh = SurfaceMesh(verts, [[0, 1, 2], [3, 4, 5]])
    pair = classify_pair(mesh, 0, 1)
    assert pair.tag == "disjoint"
    h = mesh.diameters.max()
    assert near_far(pair, h) == "far"


def test_near_far_threshold_and_ties():
    p = PanelPairClass("disjoint", 0.1, (0.1, 0.5))
    assert near_far(p, 1.0, eta=2.0) == "near"
    p = PanelPairClass("disjoint", 34.0, (34.0, 35.0))
    assert near_far(p, 1.0, eta=2.0) == "far"
    p = PanelPairClass("disjoint", 2.0, (2.0, 2.5))
    assert near_far(p, 1.0, eta=2.0) == "near"  # boundary goes to near
    with pytest.raises(ValueError):
        near_far(PanelPairClass("identical"), 1.0)


def test_classification_symmetric():
    mesh = make_sphere(1)
    rng = np.random.default_rng(0)
    for _ in range(25):
        t1, t2 = rng.integers(0, mesh.n_triangles, 2)
        a = classify_pair(mesh, int(t1), int(t2))
        b = classify_pair(mesh, int(t2), int(t1))
        assert a.tag == b.tag
        assert a.distance == pytest.approx(b.distance, abs=1e-13)


def test_distance_range_bounds():
    mesh = make_sphere(1)
    diam = mesh.diameters
    rng = np.random.default_rng(1)
    for _ in range(40):
        t1, t2 = rng.integers(0, mesh.n_triangles, 2)
        p = classify_pair(mesh, int(t1), int(t2))
        if p.tag != "disjoint":
            continue
        dmin, dmax = p.d_range
        assert 0 < dmin <= dmax
        assert dmax - dmin <= diam[t1] + diam[t2] + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_dmax_attained_at_vertex_pair(seed):
    rng = np.random.default_rng(seed)
    tri1 = rng.uniform(-1, 1, (3, 3))
    tri2 = rng.uniform(-1, 1, (3, 3)) + np.array([3.0, 0.0, 0.0])
    _, dmax = triangle_distance_range(tri1, tri2)
    brute = max(
        np.linalg.norm(tri1[i] - tri2[j]) for i in range(3) for j in range(3)
    )
    assert dmax == pytest.approx(brute, rel=1e-13)


def test_dmin_matches_sampled_minimum():
    rng = np.random.default_rng(7)
    for _ in range(10):
        tri1 = rng.uniform(-1, 1, (3, 3))
        tri2 = rng.uniform(-1, 1, (3, 3)) + np.array([0.0, 0.0, 2.5])
        dmin, _ = triangle_distance_range(tri1, tri2)
        # dense barycentric sampling oracle (upper bound on the true minimum)
        u = np.linspace(0, 1, 40)
        uu, vv = np.meshgrid(u, u, indexing="ij")
        keep = uu + vv <= 1.0
        bary = np.column_stack([uu[keep], vv[keep], 1 - uu[keep] - vv[keep]])
        pts1 = bary @ tri1
        pts2 = bary @ tri2
        sampled = np.min(
            np.linalg.norm(pts1[:, None, :] - pts2[None, :, :], axis=-1)
        )
        assert dmin <= sampled + 1e-12
        assert sampled - dmin < 0.05  # sampling resolution


def test_mesh_rejects_degenerate_triangle():
    with pytest.raises(ValueError, match="degenerate"):
        SurfaceMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])


def test_mesh_rejects_bad_index():
    with pytest.raises(ValueError, match="out of range"):
        SurfaceMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 3]])
