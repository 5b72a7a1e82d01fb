"""Sweeping and the fit driver: monotonicity, dense optimum, determinism."""

import numpy as np
import pytest

from ttpes.exceptions import NumericalError
from ttpes.model import encode_sop, initialize_model
from ttpes.potentials import rotated_coupled_ho
from ttpes.sampling import Dataset, SamplerConfig, metropolis_sample
from ttpes.training import (
    Phase,
    SweepPlan,
    build_augmented,
    compute_loss,
    fit,
    paper_schedule,
    sweep,
)


def toy_dataset(nmodes=2, n_train=60, n_val=20, v_max=6.0, seed=0, freqs=None):
    pot = rotated_coupled_ho(freqs or ([1.0, 1.6][:nmodes] + [2.1] * max(0, nmodes - 2)))
    config = SamplerConfig(
        v_max=v_max, delta=0.3, n_train=n_train, n_validation=n_val, seed=seed
    )
    return pot, metropolis_sample(pot, config)


def cg_phase(kind="onedot", max_bond=None, eps=1e-12):
    return Phase(
        name="test",
        epochs=1,
        sweep_every=1,
        sweep_kind=kind,
        solver="cg",
        cg_eps_rel=eps,
        max_bond=max_bond,
    )


def test_sweep_requires_center_zero():
    pot, data = toy_dataset()
    rng = np.random.default_rng(0)
    x, e, f = data.split("train")
    model = initialize_model(2, 2, 5, 2, x, rng, mean_energy=float(np.mean(e)))
    model.tt = model.tt.canonicalize(1)
    design = build_augmented(model, x, e, f)
    with pytest.raises(ValueError, match="canonical at site 0"):
        sweep(model, design, cg_phase())


def test_sweep_on_exact_model_keeps_zero_loss():
    pot, data = toy_dataset()
    x, e, f = data.split("train")
    model = encode_sop(pot, nbasis=5)
    model.tt = model.tt.canonicalize(0)
    design = build_augmented(model, x, e, f)
    info = sweep(model, design, cg_phase())
    scale = float(np.max(np.abs(e))) ** 2
    assert max(info["site_losses"]) < 1e-18 * max(scale, 1.0)
    loss, _, _ = compute_loss(model, x, e, f)
    assert loss < 1e-18 * max(scale, 1.0)


def test_onedot_cg_sweep_is_site_monotone():
    pot, data = toy_dataset(n_train=200, n_val=0, seed=3)
    rng = np.random.default_rng(4)
    x, e, f = data.split("train")
    model = initialize_model(2, 2, 7, 3, x, rng, mean_energy=float(np.mean(e)))
    model.tt = model.tt.canonicalize(0)
    design = build_augmented(model, x, e, f)
    info = sweep(model, design, cg_phase())
    losses = info["site_losses"]
    for before, after in zip(losses, losses[1:]):
        assert after <= before + 1e-12


def test_twodot_full_rank_matches_dense_regression():
    # f=2, unbounded rank: a two-dot CG solve spans the full N^2 weight space,
    # so the sweep must land on the dense least-squares optimum.
    pot, data = toy_dataset(n_train=150, n_val=0, seed=5)
    rng = np.random.default_rng(6)
    x, e, f = data.split("train")
    model = initialize_model(2, 2, 4, 2, x, rng, mean_energy=float(np.mean(e)))
    model.tt = model.tt.canonicalize(0)
    design = build_augmented(model, x, e, f)
    sweep(model, design, cg_phase(kind="twodot", max_bond=None))

    # Dense oracle: regression of targets on the N^2 product features.
    products = np.einsum("pn,pm->pnm", design.rows[:, 0], design.rows[:, 1])
    flat = products.reshape(design.nrows, -1)
    dense_w, *_ = np.linalg.lstsq(flat, design.targets, rcond=None)
    pred_dense = flat @ dense_w
    pred_model = model.tt.contract_rows(design.rows)
    scale = max(1.0, float(np.max(np.abs(pred_dense))))
    assert np.max(np.abs(pred_model - pred_dense)) / scale < 1e-8


def test_twodot_growth_respects_bond_cap():
    pot, data = toy_dataset(n_train=100, n_val=0, seed=7)
    rng = np.random.default_rng(8)
    x, e, f = data.split("train")
    model = initialize_model(2, 2, 6, 2, x, rng)
    model.tt = model.tt.canonicalize(0)
    design = build_augmented(model, x, e, f)
    sweep(model, design, cg_phase(kind="twodot", max_bond=3))
    assert model.tt.max_bond <= 3


def test_zero_epoch_plan_returns_model_unchanged():
    pot, data = toy_dataset()
    rng = np.random.default_rng(9)
    x, e, f = data.split("train")
    model = initialize_model(2, 2, 5, 2, x, rng)
    plan = SweepPlan(phases=[Phase(name="empty", epochs=0)])
    fitted, trace = fit(model, data, plan, seed=0)
    assert len(trace) == 0
    assert np.array_equal(fitted.transform, model.transform)
    assert all(np.array_equal(a, b) for a, b in zip(fitted.tt.cores, model.tt.cores))


def test_fit_trace_row_count_and_phases():
    pot, data = toy_dataset(n_train=40, n_val=10, seed=10)
    rng = np.random.default_rng(11)
    x, e, f = data.split("train")
    model = initialize_model(2, 2, 5, 2, x, rng, mean_energy=float(np.mean(e)))
    plan = SweepPlan(
        phases=[
            Phase(name="a", epochs=3, minibatches=2, sweep_every=2),
            Phase(name="b", epochs=2, minibatches=2),
        ]
    )
    fitted, trace = fit(model, data, plan, seed=1)
    assert len(trace) == 5
    assert [r.phase for r in trace.rows] == ["a", "a", "a", "b", "b"]
    assert [r.epoch for r in trace.rows] == [1, 2, 3, 4, 5]


def test_fit_determinism_bitwise(tmp_path):
    pot, data = toy_dataset(n_train=50, n_val=10, seed=12)
    rng = np.random.default_rng(13)
    x, e, f = data.split("train")
    model = initialize_model(2, 2, 5, 2, x, rng, mean_energy=float(np.mean(e)))
    plan = SweepPlan(
        phases=[Phase(name="a", epochs=4, minibatches=3, sweep_every=2, max_bond=3)]
    )
    first, trace_a = fit(model, data, plan, seed=7)
    second, trace_b = fit(model, data, plan, seed=7)
    assert all(np.array_equal(a, b) for a, b in zip(first.tt.cores, second.tt.cores))
    assert np.array_equal(first.transform, second.transform)
    for ra, rb in zip(trace_a.rows, trace_b.rows):
        assert (ra.loss, ra.loss_energy, ra.loss_force, ra.val_rmse, ra.max_bond) == (
            rb.loss,
            rb.loss_energy,
            rb.loss_force,
            rb.val_rmse,
            rb.max_bond,
        )


def test_fit_loss_decreases_on_toy_problem():
    pot, data = toy_dataset(n_train=120, n_val=30, seed=14)
    rng = np.random.default_rng(15)
    x, e, f = data.split("train")
    model = initialize_model(2, 2, 7, 2, x, rng, mean_energy=float(np.mean(e)))
    plan = SweepPlan(
        phases=[
            Phase(name="warm", epochs=30, minibatches=2, sweep_every=10, max_bond=2),
            Phase(
                name="refine",
                epochs=5,
                train_basis=False,
                train_transform=False,
                sweep_every=1,
                cg_eps_rel=1e-10,
                converge_tol=1e-12,
            ),
        ]
    )
    fitted, trace = fit(model, data, plan, seed=3)
    assert trace.rows[-1].loss < trace.rows[0].loss * 1e-2


def test_fit_nan_abort_dumps_checkpoint():
    pot, data = toy_dataset(n_train=30, n_val=5, seed=16)
    rng = np.random.default_rng(17)
    x, e, f = data.split("train")
    model = initialize_model(2, 2, 5, 2, x, rng)
    model.tt.cores[0][0, 0, 0] = np.nan
    dumped = []
    plan = SweepPlan(phases=[Phase(name="a", epochs=1, minibatches=1)])
    with pytest.raises(NumericalError, match="non-finite"):
        fit(model, data, plan, seed=0, checkpoint_fn=lambda ep, m: dumped.append(ep))
    assert dumped


def test_paper_schedule_shape():
    plan = paper_schedule(max_bond=14)
    assert [p.name for p in plan.phases] == ["warmup", "growth", "refine"]
    assert plan.phases[0].epochs == 1000
    assert plan.phases[0].sweep_every == 50
    assert plan.phases[1].epochs == 15000
    assert plan.phases[1].sweep_every == 500
    assert plan.phases[1].max_bond == 14
    assert plan.phases[1].minibatches == 5
    assert plan.phases[2].train_basis is False
