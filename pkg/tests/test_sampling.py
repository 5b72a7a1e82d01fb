"""Metropolis sampler law and dataset file round trips."""

import numpy as np
import pytest

from ttpes.exceptions import SamplingError, SchemaError
from ttpes.potentials import rotated_coupled_ho
from ttpes.sampling import (
    Dataset,
    SamplerConfig,
    load_dataset,
    metropolis_sample,
    pdf_weight,
    save_dataset,
)


def test_pdf_weight_values():
    assert pdf_weight(0.0, 17000.0, 500.0) == 1.0
    assert pdf_weight(17500.0, 17000.0, 500.0) == 0.0
    # Halfway point of the published preset: (17500 - 8750) / 17500.
    assert pdf_weight(8750.0, 17000.0, 500.0) == 0.5
    assert pdf_weight(1e9, 17000.0, 500.0) == 0.0


def induced_energy_cdf(v, v_max, delta):
    """Exact V-law CDF for a 1-D quadratic under the inverted-potential weight.

    The invariant x-density is proportional to P(V(x)) with V = k x^2 / 2, so
    the V-density is P(V)/sqrt(V) and the CDF integrates to
    2 A sqrt(V) - (2/3) V^(3/2) up to normalization, with A = v_max + delta.
    """
    a = v_max + delta
    v = np.clip(np.asarray(v, dtype=float), 0.0, v_max)
    raw = 2.0 * a * np.sqrt(v) - (2.0 / 3.0) * v**1.5
    norm = 2.0 * a * np.sqrt(v_max) - (2.0 / 3.0) * v_max**1.5
    return raw / norm


def ks_statistic(samples, cdf):
    samples = np.sort(samples)
    n = samples.size
    theory = cdf(samples)
    empirical_hi = np.arange(1, n + 1) / n
    empirical_lo = np.arange(0, n) / n
    return max(np.max(np.abs(empirical_hi - theory)), np.max(np.abs(theory - empirical_lo)))


def test_sampler_energy_law_1d_quadratic():
    pot = rotated_coupled_ho([1.0])
    config = SamplerConfig(
        v_max=8.0, delta=0.25, n_train=10_000, burn_in=500, stride=5, seed=7
    )
    data = metropolis_sample(pot, config)
    assert np.max(data.energies) <= config.v_max
    stat = ks_statistic(
        data.energies, lambda v: induced_energy_cdf(v, config.v_max, config.delta)
    )
    assert stat < 0.05


def test_sampler_never_records_above_ceiling():
    pot = rotated_coupled_ho([1.0])
    config = SamplerConfig(
        v_max=0.5, delta=0.1, n_train=2000, burn_in=100, stride=2, seed=3
    )
    data = metropolis_sample(pot, config)
    assert np.max(data.energies) <= 0.5


def test_constant_potential_accepts_everything():
    # Zero-frequency modes are not allowed; emulate flatness with a huge ceiling.
    pot = rotated_coupled_ho([1e-3])
    config = SamplerConfig(
        v_max=1e9, delta=1e8, n_train=500, burn_in=10, stride=1, seed=1,
        step_sizes=[1e-4],
    )
    data = metropolis_sample(pot, config)
    assert data.provenance["acceptance_rate"] > 0.999999


def test_sampler_zero_acceptance_raises():
    pot = rotated_coupled_ho([1.0])
    config = SamplerConfig(
        v_max=1e-8, delta=1e-9, n_train=10_000, burn_in=0, stride=1, seed=0,
        step_sizes=[1e6],
    )
    with pytest.raises(SamplingError, match="no acceptance"):
        metropolis_sample(pot, config)


def test_sampler_determinism():
    pot = rotated_coupled_ho([1.0, 2.0])
    config = SamplerConfig(v_max=5.0, delta=0.2, n_train=100, seed=42)
    a = metropolis_sample(pot, config)
    b = metropolis_sample(pot, config)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.energies, b.energies)
    assert np.array_equal(a.forces, b.forces)


def test_forces_are_analytic_gradients():
    pot = rotated_coupled_ho([1.0, 1.5])
    config = SamplerConfig(v_max=5.0, delta=0.2, n_train=50, seed=5)
    data = metropolis_sample(pot, config)
    data.check_forces(pot)  # raises on mismatch


def test_split_sizes():
    pot = rotated_coupled_ho([1.0])
    config = SamplerConfig(v_max=5.0, delta=0.2, n_train=30, n_validation=10, n_test=5, seed=2)
    data = metropolis_sample(pot, config)
    assert len(data) == 45
    assert data.split("train")[0].shape == (30, 1)
    assert data.split("validation")[0].shape == (10, 1)
    assert data.split("test")[0].shape == (5, 1)


def test_empty_dataset():
    pot = rotated_coupled_ho([1.0])
    config = SamplerConfig(v_max=5.0, delta=0.2, n_train=0, seed=2)
    data = metropolis_sample(pot, config)
    assert len(data) == 0


def test_dataset_round_trip_bytes(tmp_path):
    pot = rotated_coupled_ho([1.0, 2.0])
    config = SamplerConfig(v_max=5.0, delta=0.2, n_train=40, n_validation=10, seed=9)
    data = metropolis_sample(pot, config)
    first = tmp_path / "data.csv"
    save_dataset(data, first)
    loaded = load_dataset(first, potential=pot)
    assert np.array_equal(loaded.x, data.x)
    assert np.array_equal(loaded.energies, data.energies)
    assert np.array_equal(loaded.forces, data.forces)
    assert loaded.splits == data.splits
    second = tmp_path / "again.csv"
    save_dataset(loaded, second)
    assert first.read_bytes() == second.read_bytes()
    assert (
        (tmp_path / "data.csv.json").read_bytes()
        == (tmp_path / "again.csv.json").read_bytes()
    )


def test_load_rejects_corrupted_header(tmp_path):
    pot = rotated_coupled_ho([1.0])
    data = metropolis_sample(pot, SamplerConfig(v_max=5.0, delta=0.2, n_train=5, seed=1))
    path = tmp_path / "data.csv"
    save_dataset(data, path)
    body = path.read_text().splitlines()
    body[0] = "a,b,c"
    path.write_text("\n".join(body) + "\n")
    with pytest.raises(SchemaError, match="header"):
        load_dataset(path)


def test_load_requires_sidecar(tmp_path):
    path = tmp_path / "orphan.csv"
    path.write_text("x1,V,F1\n0.0,0.0,0.0\n")
    with pytest.raises(SchemaError, match="sidecar"):
        load_dataset(path)
