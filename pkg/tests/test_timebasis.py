import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpbem.timebasis import (
    TemporalBasis,
    TimeGrid,
    build_basis,
    bump,
    partition_of_unity,
    smooth_step,
)

MODEL = TimeGrid([0.0, 2.0, 3.0, 4.5, 7.0])


def test_smooth_step_branches():
    assert smooth_step(0.0) == pytest.approx(0.5, abs=1e-15)
    assert smooth_step(-1.0) == 0.0
    assert smooth_step(1.0) == 1.0
    assert smooth_step(-5.0) == 0.0
    assert smooth_step(5.0) == 1.0


def test_smooth_step_half():
    # 0.5 maps to erf(ln 3)/2 + 1/2 = 0.93986871 (30-digit reference value)
    assert smooth_step(0.5) == pytest.approx(0.939868709913664, abs=1e-14)


def test_bump_values():
    assert bump(0, 1, 2, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert bump(0, 1, 2, -0.1) == 0.0
    assert bump(0, 1, 2, 2.1) == 0.0
    assert bump(0, 1, 2, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_bump_degenerate_interval():
    with pytest.raises(ValueError):
        bump(0, 0, 1, 0.5)
    with pytest.raises(ValueError):
        bump(0, 1, 1, 0.5)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid([0.5, 1.0])
    with pytest.raises(ValueError):
        TimeGrid([0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        TimeGrid([0.0])


def test_partition_of_unity_sums_to_one():
    rng = np.random.default_rng(0)
    t = rng.uniform(0.0, 7.0, 1000)
    mus = partition_of_unity(MODEL)
    total = sum(mu.value(t) for mu in mus)
    assert np.max(np.abs(total - 1.0)) < 1e-13


def test_partition_left_end_value():
    mus = partition_of_unity(MODEL)
    assert mus[0].value(0.0) == pytest.approx(1.0, abs=1e-15)


def test_partition_interior_peak():
    grid = TimeGrid([0.0, 2.0, 3.0, 4.5, 7.0])
    mus = partition_of_unity(grid)
    assert mus[1].value(2.0) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 3.0), min_size=1, max_size=6))
def test_partition_of_unity_random_grids(increments):
    pts = np.concatenate([[0.0], np.cumsum(increments)])
    grid = TimeGrid(pts)
    t = np.linspace(0.0, grid.horizon, 257)
    total = sum(mu.value(t) for mu in partition_of_unity(grid))
    assert np.max(np.abs(total - 1.0)) < 1e-13


def test_basis_count_p0():
    basis = build_basis(TimeGrid.uniform(1.0, 4), 0)
    assert len(basis) == 4
    kinds = [f.kind for f in basis]
    assert kinds == ["left", "interior", "interior", "right"]


def test_basis_count_p1():
    basis = build_basis(TimeGrid.uniform(1.0, 4), 1)
    assert len(basis) == 1 + 2 * 2 + 2 == 7


def test_basis_count_formula():
    for l in (2, 3, 5, 9):
        for p in (0, 1, 2, 3):
            basis = build_basis(TimeGrid.uniform(2.0, l), p)
            assert len(basis) == TemporalBasis.dof_count(l, p)
            assert len(basis) == max(1, p - 1) + (l - 2) * (p + 1) + (p + 1)


def test_temporal_dof_count_matches_reported_value():
    # 120 grid points at p = 1 must give 239 unknowns
    assert TemporalBasis.dof_count(120, 1) == 239


def test_model_grid_degree3_function_exists():
    basis = build_basis(MODEL, 3)
    match = [
        f
        for f in basis
        if f.kind == "interior" and f.degree == 3 and np.allclose(f.window, (0.0, 2.0, 3.0))
    ]
    assert len(match) == 1
    f = match[0]
    t = np.linspace(0.0, 3.0, 50)
    from rpbem.specfun import legendre

    expected = bump(0.0, 2.0, 3.0, t) * legendre(3, 2.0 * t / 3.0 - 1.0)
    assert np.allclose(f.value(t), expected, atol=1e-14)


def test_eval_outside_window_is_exactly_zero():
    basis = build_basis(MODEL, 2)
    for f in basis:
        lo, hi = f.support
        ts = np.array([lo - 1e-9, lo - 2.0, hi + 1e-9, hi + 2.0])
        assert np.all(f.value(ts) == 0.0)
        assert np.all(f.deriv(ts) == 0.0)


def test_deriv_matches_finite_difference():
    basis = build_basis(MODEL, 2)
    rng = np.random.default_rng(1)
    h = 1e-6
    for f in basis:
        lo, hi = f.support
        t = rng.uniform(lo + 1e-3, hi - 1e-3, 100)
        fd = (f.value(t + h) - f.value(t - h)) / (2.0 * h)
        d = f.deriv(t)
        scale = np.maximum(np.abs(d), 1e-3 * np.max(np.abs(d)) + 1e-12)
        assert np.max(np.abs(d - fd) / scale) < 1e-6


def test_interior_derivative_integrates_to_zero():
    from rpbem.quadrature import gauss_rule

    basis = build_basis(MODEL, 1)
    rule = gauss_rule(60)
    for f in basis:
        if f.kind != "interior":
            continue
        total = 0.0
        for a, b in zip(f.breakpoints[:-1], f.breakpoints[1:]):
            half = 0.5 * (b - a)
            t = 0.5 * (a + b) + half * rule.nodes
            total += half * float(rule.weights @ f.deriv(t))
        assert abs(total) < 1e-10


def test_continuity_across_breakpoints():
    basis = build_basis(MODEL, 2)
    eps = 1e-9
    for f in basis:
        lo, hi = f.support
        for bp in f.breakpoints:
            # skip domain-boundary jumps of the zero extension
            if f.kind == "right" and bp == hi:
                continue
            left = f.value(bp - eps) if bp > lo else 0.0
            right = f.value(bp + eps) if bp < hi else 0.0
            center = f.value(bp)
            tol = 1e-6  # smooth-step slope times eps stays well below this
            if bp > lo:
                assert abs(center - left) < tol
            if bp < hi:
                assert abs(center - right) < tol
            dleft = f.deriv(bp - eps) if bp > lo else 0.0
            dright = f.deriv(bp + eps) if bp < hi else 0.0
            if lo < bp < hi:
                assert abs(dleft - dright) < 1e-6
