"""Tensor train: contraction against dense oracles, gauge moves."""

import numpy as np
import pytest

from ttpes.exceptions import GuardExceededError
from ttpes.tensortrain import TensorTrain


def random_tt(nsites, nbasis, bond, seed=0):
    rng = np.random.default_rng(seed)
    cores = []
    for i in range(nsites):
        ml = 1 if i == 0 else bond
        mr = 1 if i == nsites - 1 else bond
        cores.append(rng.normal(size=(ml, nbasis, mr)))
    return TensorTrain(cores)


def dense_contract(tt, rows):
    """Brute-force oracle: materialize the weight and contract per point."""
    weight = tt.expand()
    out = []
    for row in rows:
        acc = weight
        for i in range(tt.nsites):
            acc = np.tensordot(row[i], acc, axes=([0], [0]))
        out.append(acc)
    return np.array(out)


def test_constant_encoding():
    tt = TensorTrain.constant(4, 5, 3.25)
    rows = np.random.default_rng(0).normal(size=(8, 4, 5))
    rows[:, :, 0] = 1.0  # constant channel
    assert np.allclose(tt.contract_rows(rows), 3.25, rtol=0, atol=1e-14)


def test_rank_one_expand_is_outer_product():
    tt = random_tt(3, 4, 1, seed=2)
    vecs = [tt.cores[i].reshape(4) for i in range(3)]
    expected = np.einsum("a,b,c->abc", *vecs)
    assert np.allclose(tt.expand(), expected, atol=1e-14)


def test_two_site_expand_is_matrix_product():
    tt = random_tt(2, 4, 3, seed=3)
    expected = np.einsum("anb,bmc->nm", tt.cores[0], tt.cores[1])
    assert np.allclose(tt.expand(), expected, atol=1e-14)


def test_contract_matches_dense_oracle():
    tt = random_tt(3, 4, 3, seed=1)
    rows = np.random.default_rng(5).normal(size=(20, 3, 4))
    got = tt.contract_rows(rows)
    want = dense_contract(tt, rows)
    assert np.max(np.abs(got - want)) < 1e-12


@pytest.mark.parametrize("nsites,nbasis,bond", [(2, 3, 2), (3, 5, 4), (4, 4, 3)])
def test_contract_dense_equivalence_sweep(nsites, nbasis, bond):
    tt = random_tt(nsites, nbasis, bond, seed=nsites * 10 + bond)
    rows = np.random.default_rng(7).normal(size=(10, nsites, nbasis))
    assert np.max(np.abs(tt.contract_rows(rows) - dense_contract(tt, rows))) < 1e-12


def test_expand_guard():
    tt = random_tt(4, 8, 2)
    with pytest.raises(GuardExceededError):
        tt.expand(guard=1000)


def test_canonicalize_preserves_values():
    tt = random_tt(4, 4, 3, seed=11)
    probes = np.random.default_rng(13).normal(size=(100, 4, 4))
    base = tt.contract_rows(probes)
    scale = np.max(np.abs(base))
    for center in range(4):
        canon = tt.canonicalize(center)
        assert canon.center == center
        assert np.max(np.abs(canon.contract_rows(probes) - base)) < 1e-10 * scale
        errs = canon.isometry_errors()
        assert max(errs) < 1e-10


def test_center_round_trip_preserves_bonds():
    tt = random_tt(5, 3, 3, seed=17).canonicalize(0)
    dims = tt.bond_dims
    for _ in range(4):
        tt.shift_center_right()
    for _ in range(4):
        tt.shift_center_left()
    assert tt.bond_dims == dims
    assert tt.center == 0


def test_recanonicalize_same_center_keeps_values():
    tt = random_tt(4, 4, 2, seed=23).canonicalize(2)
    again = tt.canonicalize(2)
    probes = np.random.default_rng(29).normal(size=(50, 4, 4))
    a = tt.contract_rows(probes)
    b = again.contract_rows(probes)
    assert np.max(np.abs(a - b)) < 1e-10 * max(1.0, np.max(np.abs(a)))
