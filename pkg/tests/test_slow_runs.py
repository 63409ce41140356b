"""Longer experiment variants and oracle regeneration, excluded from the
default run (enable with `pytest -m slow`)."""

import numpy as np
import pytest

from rpbem.experiments import ExperimentConfig, cmd_adapt_3d, cmd_converge

pytestmark = pytest.mark.slow


def test_regenerate_small_oracle(tmp_path):
    from oracles import brute_force_blocks, load_small_oracle, small_instance

    mesh, basis = small_instance()
    fresh = brute_force_blocks(mesh, basis, n=24, psi_gauss=32)
    frozen = load_small_oracle()
    assert np.max(np.abs(fresh - frozen)) < 1e-12


def test_adapt_3d_refines_wavefront_window(tmp_path):
    cfg = ExperimentConfig(
        out_dir=str(tmp_path),
        refinement=1,
        horizon=25.0,
        p=1,
        max_iter=4,
        n_sing=6,
        n_near=5,
        n_far=4,
        n_rhs_space=6,
        n_indicator=8,
    )
    res = cmd_adapt_3d(cfg)
    grids = res["state"].grids
    for a, b in zip(grids[:-1], grids[1:]):
        assert set(np.round(a.points, 10)) <= set(np.round(b.points, 10))
    final = np.asarray(grids[-1].points)
    d = np.diff(final)
    centers = 0.5 * (final[1:] + final[:-1])
    inside = d[(centers > 1.0) & (centers < 3.0)]
    outside = d[centers > 10.0]
    assert inside.size and outside.size
    assert inside.mean() < outside.mean() / 2.0


def test_converge_second_harmonic_rhs(tmp_path):
    cfg = ExperimentConfig(
        out_dir=str(tmp_path),
        refinement=1,
        levels=(3, 5, 9),
        p_list=(1,),
        n_sing=6,
        n_near=5,
        n_far=4,
    )
    res = cmd_converge(cfg, rhs_names=("harmonic-osc",))
    rels = [rel for _, _, rel in res[("harmonic-osc", 1)]]
    assert all(b < a for a, b in zip(rels, rels[1:]))
