"""Model evaluation, forces, latent map, SOP encoding."""

import numpy as np
import pytest

from ttpes.basis import Monomial
from ttpes.model import (
    ModelState,
    encode_sop,
    initialize_model,
    random_orthonormal,
    to_latent,
)
from ttpes.potentials import SopPotential, coupled_anharmonic, rotated_coupled_ho
from ttpes.tensortrain import TensorTrain


def random_model(ninputs=3, nmodes=3, nbasis=4, bond=3, seed=0):
    rng = np.random.default_rng(seed)
    samples = rng.normal(size=(30, ninputs))
    model = initialize_model(ninputs, nmodes, nbasis, bond, samples, rng)
    model.transform = random_orthonormal(ninputs, nmodes, rng)
    model.basis.weights = rng.uniform(0.6, 1.4, size=(nmodes, nbasis))
    model.basis.biases = rng.normal(0.0, 0.2, size=(nmodes, nbasis))
    model.tt = TensorTrain(
        [
            rng.normal(size=(1 if i == 0 else bond, nbasis, 1 if i == nmodes - 1 else bond))
            for i in range(nmodes)
        ]
    )
    return model


def test_to_latent_identity():
    x = np.random.default_rng(0).normal(size=6)
    assert np.array_equal(to_latent(x, np.eye(6)), x)


def test_to_latent_preserves_norm_square_transform():
    rng = np.random.default_rng(1)
    u = random_orthonormal(6, 6, rng)
    for _ in range(10):
        x = rng.normal(size=6)
        x /= np.linalg.norm(x)
        assert abs(np.linalg.norm(to_latent(x, u)) - 1.0) < 1e-12


def test_to_latent_dimension_mismatch():
    with pytest.raises(ValueError):
        to_latent(np.ones(4), np.eye(6))


def test_constant_model_evaluate_and_force():
    rng = np.random.default_rng(2)
    model = random_model(seed=2)
    model.tt = TensorTrain.constant(3, 4, 2.5)
    x = rng.normal(size=(10, 3))
    assert np.allclose(model.evaluate(x), 2.5, atol=1e-13)
    assert np.max(np.abs(model.force(x))) < 1e-13


def test_evaluate_matches_dense_weight_contraction():
    model = random_model(seed=3)
    x = np.random.default_rng(4).normal(size=(50, 3))
    q = to_latent(x, model.transform)
    rows, = model.basis.tables(q, model.centers(), order=0)
    weight = model.tt.expand()
    dense = np.einsum("bi,bj,bk,ijk->b", rows[:, 0], rows[:, 1], rows[:, 2], weight)
    assert np.max(np.abs(model.evaluate(x) - dense)) < 1e-12


def test_force_matches_finite_differences():
    model = random_model(seed=5)
    rng = np.random.default_rng(6)
    h = 1e-5
    for _ in range(50):
        x = rng.normal(0.0, 1.0, size=3)
        force = model.force(x)
        fd = np.empty(3)
        for j in range(3):
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            fd[j] = -(model.evaluate(xp) - model.evaluate(xm)) / (2 * h)
        scale = max(1.0, np.max(np.abs(fd)))
        assert np.max(np.abs(force - fd)) / scale < 1e-5


def test_encode_constant_sop():
    sop = SopPotential(3, [(4.5, {})])
    model = encode_sop(sop, nbasis=5)
    assert model.tt.bond_dims == [1, 1]
    x = np.random.default_rng(7).normal(size=(20, 3))
    assert np.allclose(model.evaluate(x), 4.5, atol=1e-13)


def test_encode_separable_quadratic_is_rank_two():
    freqs = [1.0, 1.5, 0.7]
    sop = rotated_coupled_ho(freqs)
    model = encode_sop(sop, nbasis=4)
    assert model.tt.bond_dims == [2, 2]
    x = np.random.default_rng(8).normal(size=(200, 3))
    want = sop.energy(x)
    got = model.evaluate(x)
    assert np.max(np.abs(got - want)) < 1e-12 * max(1.0, np.max(np.abs(want)))


def test_encode_random_sop_exact():
    rng = np.random.default_rng(9)
    nmodes = 4
    terms = []
    for _ in range(5):
        factors = {}
        for mode in rng.choice(nmodes, size=rng.integers(1, nmodes + 1), replace=False):
            factors[int(mode)] = Monomial(int(rng.integers(1, 4)))
        terms.append((float(rng.normal()), factors))
    sop = SopPotential(nmodes, terms)
    model = encode_sop(sop, nbasis=8)
    assert model.tt.max_bond <= 5 + 2
    x = rng.normal(0.0, 0.8, size=(1000, nmodes))
    want = sop.energy(x)
    got = model.evaluate(x)
    assert np.max(np.abs(got - want)) < 1e-10 * np.max(np.abs(want))


def test_encode_rotated_sop_uses_rotation_as_transform():
    rng = np.random.default_rng(10)
    rotation = random_orthonormal(2, 2, rng)
    sop = rotated_coupled_ho([1.0, 2.0], rotation=rotation)
    model = encode_sop(sop, nbasis=4)
    assert np.allclose(model.transform, rotation)
    x = rng.normal(size=(100, 2))
    assert np.max(np.abs(model.evaluate(x) - sop.energy(x))) < 1e-11


def test_encode_quadratic_force_is_analytic():
    freqs = [1.0, 2.0]
    sop = rotated_coupled_ho(freqs)
    model = encode_sop(sop, nbasis=4)
    x = np.random.default_rng(11).normal(size=(40, 2))
    want = -x * np.asarray(freqs) ** 2
    assert np.max(np.abs(model.force(x) - want)) < 1e-11


def test_encode_budget_error():
    terms = [(1.0, {0: Monomial(k)}) for k in range(1, 6)]
    sop = SopPotential(2, terms)
    with pytest.raises(ValueError, match="basis entries"):
        encode_sop(sop, nbasis=4)


def test_encode_anharmonic_model_exact():
    pot = coupled_anharmonic(
        3,
        [1.0, 1.3, 1.7],
        morse_depth=[3.0, 2.0, 4.0],
        morse_rate=[0.4, 0.5, 0.3],
        cubic={(0, 1): 0.08, (1, 2): -0.06},
    )
    model = encode_sop(pot, nbasis=12)
    x = np.random.default_rng(12).normal(0.0, 1.0, size=(500, 3))
    want = pot.energy(x)
    assert np.max(np.abs(model.evaluate(x) - want)) < 1e-10 * np.max(np.abs(want))


def test_orthonormality_validation():
    model = random_model(seed=13)
    bad = model.transform.copy()
    bad[0, 0] += 1e-6
    with pytest.raises(ValueError, match="orthonormal"):
        ModelState(transform=bad, basis=model.basis, tt=model.tt)
