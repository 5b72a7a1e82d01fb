"""Loss values and closed-form parameter gradients vs finite differences."""

import numpy as np
import pytest

from ttpes.model import encode_sop
from ttpes.potentials import rotated_coupled_ho
from ttpes.sampling import SamplerConfig, metropolis_sample
from ttpes.training import basis_grads, compute_loss
from ttpes.training.optimizers import tangent_project

from test_model import random_model


def small_batch(model, npoints=8, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(npoints, model.ninputs))
    energies = rng.normal(size=npoints)
    forces = rng.normal(size=(npoints, model.ninputs))
    return x, energies, forces


def test_zero_model_zero_targets():
    model = random_model(seed=0)
    model.tt.cores = [np.zeros_like(c) for c in model.tt.cores]
    x = np.random.default_rng(1).normal(size=(5, 3))
    loss, le, lf = compute_loss(model, x, np.zeros(5), np.zeros((5, 3)))
    assert loss == le == lf == 0.0


def test_single_point_energy_residual():
    # One point, energy off by 2, forces exact -> L = 0.5 * 2^2 = 2.
    model = random_model(seed=2)
    x = np.random.default_rng(3).normal(size=(1, 3))
    energy = model.evaluate(x) - 2.0
    forces = model.force(x)
    loss, le, lf = compute_loss(model, x, energy, forces)
    assert abs(le - 2.0) < 1e-12
    assert lf < 1e-22
    assert abs(loss - 2.0) < 1e-12


def test_empty_batch_rejected():
    model = random_model(seed=4)
    with pytest.raises(ValueError, match="empty"):
        compute_loss(model, np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3)))


def test_exact_encoding_has_zero_loss_and_gradient():
    pot = rotated_coupled_ho([1.0, 1.7])
    model = encode_sop(pot, nbasis=5)
    data = metropolis_sample(
        pot, SamplerConfig(v_max=6.0, delta=0.3, n_train=40, seed=1)
    )
    x, energies, forces = data.split("train")
    scale = float(np.max(np.abs(energies))) ** 2
    loss, _, _ = compute_loss(model, x, energies, forces)
    assert loss < 1e-18 * max(scale, 1.0)
    grad_w, grad_b, grad_t = basis_grads(model, x, energies, forces)
    norm = np.sqrt(
        np.sum(grad_w**2) + np.sum(grad_b**2) + np.sum(grad_t**2)
    )
    assert norm < 1e-10 * max(np.sqrt(scale), 1.0)


def test_constant_entries_have_zero_bias_gradient():
    model = random_model(seed=5)
    x, energies, forces = small_batch(model, seed=6)
    _, grad_b, _ = basis_grads(model, x, energies, forces)
    assert np.max(np.abs(grad_b[:, 0])) == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_basis_gradients_match_finite_differences(seed):
    model = random_model(ninputs=3, nmodes=2, nbasis=5, bond=2, seed=20 + seed)
    x, energies, forces = small_batch(model, seed=30 + seed)
    grad_w, grad_b, grad_t = basis_grads(model, x, energies, forces)
    h = 1e-6

    def loss_of(m):
        return compute_loss(m, x, energies, forces)[0]

    for arr, grad in (("weights", grad_w), ("biases", grad_b)):
        target = getattr(model.basis, arr)
        fd = np.zeros_like(target)
        for idx in np.ndindex(*target.shape):
            saved = target[idx]
            target[idx] = saved + h
            up = loss_of(model)
            target[idx] = saved - h
            down = loss_of(model)
            target[idx] = saved
            fd[idx] = (up - down) / (2 * h)
        scale = np.maximum(np.abs(fd), 1.0)
        assert np.max(np.abs(fd - grad) / scale) < 1e-5, arr

    # The transform gradient is Euclidean; compare against directional
    # derivatives along tangent directions (orthonormality-preserving moves).
    rng = np.random.default_rng(40 + seed)
    for _ in range(6):
        direction = tangent_project(model.transform, rng.normal(size=model.transform.shape))
        direction /= np.linalg.norm(direction)
        base = model.transform.copy()

        def retracted(step):
            moved = base + step * direction
            q, r = np.linalg.qr(moved)
            return q * np.sign(np.diag(r))[None, :]

        m = model.copy()
        m.transform = retracted(h)
        up = loss_of(m)
        m.transform = retracted(-h)
        down = loss_of(m)
        fd_dir = (up - down) / (2 * h)
        analytic = float(np.sum(grad_t * direction))
        assert abs(fd_dir - analytic) < 1e-5 * max(1.0, abs(fd_dir))


def test_full_transform_gradient_matches_unconstrained_fd():
    # Without the orthonormality wall: compare the raw Euclidean gradient by
    # bypassing validation (direct attribute pokes on a copied model).
    model = random_model(ninputs=3, nmodes=3, nbasis=4, bond=2, seed=50)
    x, energies, forces = small_batch(model, seed=51)
    _, _, grad_t = basis_grads(model, x, energies, forces)
    h = 1e-6
    fd = np.zeros_like(model.transform)
    for idx in np.ndindex(*model.transform.shape):
        saved = model.transform[idx]
        model.transform[idx] = saved + h
        up = compute_loss(model, x, energies, forces)[0]
        model.transform[idx] = saved - h
        down = compute_loss(model, x, energies, forces)[0]
        model.transform[idx] = saved
        fd[idx] = (up - down) / (2 * h)
    scale = np.maximum(np.abs(fd), 1.0)
    assert np.max(np.abs(fd - grad_t) / scale) < 1e-5
