"""Analytic potentials: forces, Hessians, stability scan."""

import numpy as np
import pytest

from ttpes.model import random_orthonormal
from ttpes.potentials import SopPotential, coupled_anharmonic, rotated_coupled_ho
from ttpes.basis import Monomial


def test_rotated_ho_stationary_origin():
    rng = np.random.default_rng(0)
    rot = random_orthonormal(3, 3, rng)
    pot = rotated_coupled_ho([1.0, 1.5, 2.0], rotation=rot)
    assert pot.energy(np.zeros(3)) == 0.0
    assert np.max(np.abs(pot.forces(np.zeros(3)))) == 0.0


def test_rotated_ho_hessian_eigenvalues():
    rng = np.random.default_rng(1)
    freqs = np.array([0.8, 1.2, 1.9])
    rot = random_orthonormal(3, 3, rng)
    pot = rotated_coupled_ho(freqs, rotation=rot)
    eigvals = np.sort(np.linalg.eigvalsh(pot.hessian(np.zeros(3))))
    assert np.allclose(eigvals, np.sort(freqs**2), atol=1e-12)
    assert np.allclose(pot.harmonic_frequencies(), np.sort(freqs), atol=1e-12)


def test_rotated_ho_rejects_nonorthogonal_rotation():
    with pytest.raises(ValueError, match="orthogonal"):
        rotated_coupled_ho([1.0, 1.0], rotation=np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_anharmonic_reduces_to_separable():
    freqs = [1.0, 1.4]
    pot = coupled_anharmonic(2, freqs)
    x = np.random.default_rng(2).normal(size=(50, 2))
    want = 0.5 * (x**2 * np.asarray(freqs) ** 2).sum(axis=1)
    assert np.max(np.abs(pot.energy(x) - want)) < 1e-12


def test_anharmonic_forces_match_finite_differences():
    pot = coupled_anharmonic(
        3,
        [1.0, 1.3, 1.7],
        morse_depth=[3.0, 2.0, 4.0],
        morse_rate=[0.4, 0.5, 0.3],
        cubic={(0, 1): 0.08, (1, 2): -0.06},
    )
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(100):
        x = rng.normal(0.0, 1.0, size=3)
        force = pot.forces(x)
        fd = np.empty(3)
        for j in range(3):
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            fd[j] = -(pot.energy(xp) - pot.energy(xm)) / (2 * h)
        scale = max(1.0, np.max(np.abs(fd)))
        assert np.max(np.abs(force - fd)) / scale < 1e-7


def test_anharmonic_hessian_matches_finite_differences():
    pot = coupled_anharmonic(
        2, [1.0, 1.5], morse_depth=2.0, morse_rate=0.5, cubic={(0, 1): 0.1}
    )
    x0 = np.array([0.3, -0.4])
    h = 1e-5
    hess = pot.hessian(x0)
    for a in range(2):
        for b in range(2):
            xa, xb = x0.copy(), x0.copy()
            xa[a] += h
            xb[a] -= h
            fd = (pot.forces(xb)[b] - pot.forces(xa)[b]) / (2 * h)
            assert abs(fd - hess[a, b]) < 1e-6


def test_anharmonic_unstable_parameters_rejected():
    with pytest.raises(ValueError, match="bounded below"):
        coupled_anharmonic(2, [1.0, 1.0], cubic={(0, 1): 5.0})


def test_sop_term_mode_validation():
    with pytest.raises(ValueError, match="undeclared mode"):
        SopPotential(2, [(1.0, {3: Monomial(2)})])


def test_sop_spec_round_trip():
    pot = coupled_anharmonic(
        2, [1.1, 0.9], morse_depth=1.5, morse_rate=0.4, cubic={(0, 1): 0.05}
    )
    clone = SopPotential.from_spec(pot.to_spec())
    x = np.random.default_rng(4).normal(size=(20, 2))
    assert np.array_equal(pot.energy(x), clone.energy(x))
    assert np.array_equal(pot.forces(x), clone.forces(x))
