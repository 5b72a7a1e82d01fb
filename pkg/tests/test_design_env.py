"""Augmented design rows and cached environments against recomputation."""

import numpy as np

from ttpes.model import to_latent
from ttpes.training import EnvironmentCache, build_augmented, twodot_problem, onedot_problem

from test_model import random_model


def batch(model, npoints=12, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(npoints, model.ninputs))
    energies = rng.normal(size=npoints)
    forces = rng.normal(size=(npoints, model.ninputs))
    return x, energies, forces


def test_plain_rows_match_feature_tables():
    model = random_model(seed=1)
    x, energies, forces = batch(model)
    design = build_augmented(model, x, energies, forces)
    nmodes = model.nmodes
    q = to_latent(x, model.transform)
    plain, = model.basis.tables(q, model.centers(), order=0)
    grouped = design.rows.reshape(len(x), nmodes + 1, nmodes, model.nbasis)
    assert np.array_equal(grouped[:, nmodes], plain)
    assert design.nrows == len(x) * (nmodes + 1)


def test_single_mode_design_has_two_rows_per_point():
    model = random_model(ninputs=1, nmodes=1, seed=2)
    x, energies, forces = batch(model)
    design = build_augmented(model, x, energies, forces)
    assert design.nrows == 2 * len(x)


def test_design_predictions_match_model():
    # Contraction of the design rows reproduces latent forces and energies.
    model = random_model(seed=3)
    x, energies, forces = batch(model, seed=4)
    design = build_augmented(model, x, energies, forces)
    pred = model.tt.contract_rows(design.rows)
    grouped = pred.reshape(len(x), model.nmodes + 1)
    force_latent = -model.latent_gradient(x)
    assert np.max(np.abs(grouped[:, : model.nmodes] - force_latent)) < 1e-12
    assert np.max(np.abs(grouped[:, model.nmodes] - model.evaluate(x))) < 1e-12


def test_design_targets():
    model = random_model(seed=5)
    x, energies, forces = batch(model, seed=6)
    design = build_augmented(model, x, energies, forces)
    grouped = design.targets.reshape(len(x), model.nmodes + 1)
    assert np.allclose(grouped[:, : model.nmodes], forces @ model.transform)
    assert np.array_equal(grouped[:, model.nmodes], energies)


def test_leftmost_block_is_ones():
    model = random_model(seed=7)
    model.tt = model.tt.canonicalize(0)
    x, energies, forces = batch(model, seed=8)
    design = build_augmented(model, x, energies, forces)
    cache = EnvironmentCache(design, model.tt, 0, "twodot")
    assert np.array_equal(cache.left(0), np.ones((design.nrows, 1)))


def test_incremental_blocks_match_recomputation():
    model = random_model(nmodes=4, ninputs=4, seed=9)
    model.tt = model.tt.canonicalize(0)
    x, energies, forces = batch(model, seed=10)
    design = build_augmented(model, x, energies, forces)
    cache = EnvironmentCache(design, model.tt, 0, "onedot")
    # March the center right and back, comparing blocks each move.
    for _ in range(model.nmodes - 1):
        model.tt.shift_center_right()
        cache.move_right()
        site = cache.site
        assert np.max(np.abs(cache.left(site) - cache.recompute(site, "left"))) < 1e-12
        right = cache.right(site + 1)
        assert np.max(np.abs(right - cache.recompute(site + 1, "right"))) < 1e-12
    for _ in range(model.nmodes - 1):
        model.tt.shift_center_left()
        cache.move_left()
        site = cache.site
        assert np.max(np.abs(cache.left(site) - cache.recompute(site, "left"))) < 1e-12


def test_environment_prediction_cross_check():
    # Full prediction through blocks equals the model contraction.
    model = random_model(nmodes=3, ninputs=3, seed=11)
    model.tt = model.tt.canonicalize(1)
    x, energies, forces = batch(model, seed=12)
    design = build_augmented(model, x, energies, forces)
    cache = EnvironmentCache(design, model.tt, 1, "onedot")
    problem = onedot_problem(cache, 1, design.targets)
    pred = problem.predict(model.tt.cores[1])
    direct = model.tt.contract_rows(design.rows)
    assert np.max(np.abs(pred - direct)) < 1e-12


def test_twodot_prediction_cross_check():
    model = random_model(nmodes=3, ninputs=3, seed=13)
    model.tt = model.tt.canonicalize(0)
    x, energies, forces = batch(model, seed=14)
    design = build_augmented(model, x, energies, forces)
    cache = EnvironmentCache(design, model.tt, 0, "twodot")
    problem = twodot_problem(cache, 0, design.targets)
    merged = np.einsum("anb,bmc->anmc", model.tt.cores[0], model.tt.cores[1])
    pred = problem.predict(merged)
    direct = model.tt.contract_rows(design.rows)
    assert np.max(np.abs(pred - direct)) < 1e-12


def test_center_mismatch_rejected():
    model = random_model(seed=15)
    model.tt = model.tt.canonicalize(2)
    x, energies, forces = batch(model, seed=16)
    design = build_augmented(model, x, energies, forces)
    try:
        EnvironmentCache(design, model.tt, 0, "twodot")
    except ValueError as err:
        assert "center" in str(err)
    else:
        raise AssertionError("expected a center mismatch error")
