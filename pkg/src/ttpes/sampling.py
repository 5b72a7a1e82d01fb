"""Configuration sampling from the inverted-potential density, plus dataset files.

The sampling weight favors low-energy regions and vanishes above the energy
ceiling: ``P(V) = max((V_max + delta - V) / (V_max + delta), 0)``, with states
above ``V_max`` additionally excluded outright.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .exceptions import SamplingError, SchemaError

FORCE_CHECK_RTOL = 1e-10


def pdf_weight(energy, v_max: float, delta: float):
    """Inverted-potential sampling weight in [0, 1]."""
    energy = np.asarray(energy, dtype=float)
    ceiling = v_max + delta
    return np.maximum((ceiling - energy) / ceiling, 0.0)


@dataclass
class SamplerConfig:
    """Metropolis random-walk settings.

    Attributes:
        v_max: recording ceiling; states above it are never kept.
        delta: softening of the weight above v_max (weight hits 0 at v_max+delta).
        n_train / n_validation / n_test: split sizes, recorded in this order.
        step_scale: proposal width as a fraction of each mode's harmonic
            turning length at v_max (used when step_sizes is None).
        step_sizes: explicit per-mode proposal widths, overriding step_scale.
        burn_in: discarded leading steps.
        stride: thinning stride between recorded samples.
        seed: chain seed.
        start: chain start; defaults to the origin (potential minimum).
        energy_unit / length_unit: metadata written to the sidecar.
    """

    v_max: float
    delta: float
    n_train: int
    n_validation: int = 0
    n_test: int = 0
    step_scale: float = 0.1
    step_sizes: list | None = None
    burn_in: int = 1000
    stride: int = 10
    seed: int = 0
    start: list | None = None
    energy_unit: str = "arb"
    length_unit: str = "arb"

    def __post_init__(self):
        if self.v_max <= 0 or self.delta <= 0:
            raise ValueError("v_max and delta must be positive")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")

    def digest(self) -> str:
        doc = asdict(self)
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Dataset:
    """Sampled points with energies, analytic forces and split metadata."""

    x: np.ndarray
    energies: np.ndarray
    forces: np.ndarray
    splits: dict  # name -> (start, stop) row range
    energy_unit: str = "arb"
    length_unit: str = "arb"
    provenance: dict = field(default_factory=dict)

    @property
    def ninputs(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.x.shape[0]

    def split(self, name: str):
        """(x, energies, forces) view of one split."""
        start, stop = self.splits[name]
        return self.x[start:stop], self.energies[start:stop], self.forces[start:stop]

    def check_forces(self, potential, rtol: float = FORCE_CHECK_RTOL, max_rows: int = 50):
        """Spot-check stored forces against the generating potential."""
        idx = np.linspace(0, len(self) - 1, min(max_rows, len(self)), dtype=int)
        want = potential.forces(self.x[idx])
        scale = max(float(np.max(np.abs(want))), 1e-300)
        err = float(np.max(np.abs(self.forces[idx] - want)))
        if err > rtol * scale:
            raise ValueError(f"stored forces deviate from potential (err {err:.2e})")


def _zero_acceptance_window(config: SamplerConfig) -> int:
    return max(5000, 50 * config.stride)


def metropolis_sample(potential, config: SamplerConfig) -> Dataset:
    """Random-walk Metropolis chain under the inverted-potential weight.

    Proposals are isotropic Gaussians (per-mode widths); acceptance uses the
    weight ratio only, so detailed balance holds for the weight's density.
    Points are recorded after burn-in at the thinning stride, with analytic
    forces attached.  Reproducible from the seed.

    Raises:
        SamplingError: when no proposal is accepted over a long window.
    """
    nmodes = potential.nmodes
    rng = np.random.default_rng(config.seed)
    total = config.n_train + config.n_validation + config.n_test

    if config.step_sizes is not None:
        steps = np.broadcast_to(np.asarray(config.step_sizes, float), (nmodes,)).copy()
    else:
        # Harmonic turning length per mode at the ceiling energy.
        diag = np.sqrt(np.clip(np.diag(potential.hessian(np.zeros(nmodes))), 1e-12, None))
        steps = config.step_scale * np.sqrt(2.0 * config.v_max) / diag

    x = np.zeros(nmodes) if config.start is None else np.asarray(config.start, float)
    energy = float(potential.energy(x))
    weight = float(pdf_weight(energy, config.v_max, config.delta))
    if energy > config.v_max or weight <= 0.0:
        raise SamplingError("chain start lies above the sampling ceiling")

    xs, energies = [], []
    accepted = proposed = 0
    since_accept = 0
    window = _zero_acceptance_window(config)
    step_index = 0
    while len(xs) < total:
        proposal = x + rng.normal(0.0, steps)
        e_new = float(potential.energy(proposal))
        w_new = float(pdf_weight(e_new, config.v_max, config.delta))
        if e_new > config.v_max:
            w_new = 0.0
        proposed += 1
        if w_new > 0.0 and rng.random() < min(1.0, w_new / weight):
            x, energy, weight = proposal, e_new, w_new
            accepted += 1
            since_accept = 0
        else:
            since_accept += 1
            if since_accept >= window:
                raise SamplingError(
                    f"no acceptance in {window} proposals; adjust step sizes"
                )
        step_index += 1
        if step_index > config.burn_in and step_index % config.stride == 0:
            xs.append(x.copy())
            energies.append(energy)

    xs = np.asarray(xs) if xs else np.zeros((0, nmodes))
    energies = np.asarray(energies)
    forces = potential.forces(xs) if len(xs) else np.zeros((0, nmodes))

    bounds = {}
    cursor = 0
    for name, count in (
        ("train", config.n_train),
        ("validation", config.n_validation),
        ("test", config.n_test),
    ):
        bounds[name] = (cursor, cursor + count)
        cursor += count

    hessian = potential.hessian(np.zeros(nmodes))
    dataset = Dataset(
        x=xs,
        energies=energies,
        forces=forces,
        splits=bounds,
        energy_unit=config.energy_unit,
        length_unit=config.length_unit,
        provenance={
            "potential": getattr(potential, "label", "unknown"),
            "config_digest": config.digest(),
            "v_max": config.v_max,
            "delta": config.delta,
            "seed": config.seed,
            "acceptance_rate": accepted / proposed if proposed else 0.0,
            "hessian": hessian.tolist(),
            "minimum": [0.0] * nmodes,
        },
    )
    if len(dataset):
        dataset.check_forces(potential)
        assert float(np.max(dataset.energies, initial=0.0)) <= config.v_max
    return dataset


# -- file format -----------------------------------------------------------


def _sidecar_path(path) -> Path:
    return Path(path).with_suffix(Path(path).suffix + ".json")


def save_dataset(dataset: Dataset, path) -> None:
    """CSV (header x1..xn,V,F1..Fn) plus a JSON sidecar with metadata."""
    path = Path(path)
    n = dataset.ninputs
    header = ",".join(
        [f"x{i + 1}" for i in range(n)] + ["V"] + [f"F{i + 1}" for i in range(n)]
    )
    lines = [header]
    for row in range(len(dataset)):
        fields = (
            [repr(float(v)) for v in dataset.x[row]]
            + [repr(float(dataset.energies[row]))]
            + [repr(float(v)) for v in dataset.forces[row]]
        )
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n")
    sidecar = {
        "schema": "ttpes-dataset-1",
        "units": {"energy": dataset.energy_unit, "length": dataset.length_unit},
        "splits": {k: list(v) for k, v in dataset.splits.items()},
        "provenance": dataset.provenance,
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=1) + "\n")


def load_dataset(path, potential=None) -> Dataset:
    """Read a dataset file pair; optionally spot-check forces."""
    path = Path(path)
    try:
        sidecar = json.loads(_sidecar_path(path).read_text())
    except FileNotFoundError as err:
        raise SchemaError(f"missing dataset sidecar for {path}") from err
    if sidecar.get("schema") != "ttpes-dataset-1":
        raise SchemaError(f"unexpected dataset schema {sidecar.get('schema')!r}")

    text = path.read_text().strip().splitlines()
    header = text[0].split(",")
    if len(header) % 2 != 1 or header[len(header) // 2] != "V":
        raise SchemaError(f"malformed dataset header in {path}")
    n = len(header) // 2
    if header != [f"x{i + 1}" for i in range(n)] + ["V"] + [f"F{i + 1}" for i in range(n)]:
        raise SchemaError(f"malformed dataset header in {path}")
    body = np.array(
        [[float(v) for v in line.split(",")] for line in text[1:]], dtype=float
    ).reshape(len(text) - 1, 2 * n + 1)
    dataset = Dataset(
        x=body[:, :n],
        energies=body[:, n],
        forces=body[:, n + 1 :],
        splits={k: tuple(v) for k, v in sidecar["splits"].items()},
        energy_unit=sidecar["units"]["energy"],
        length_unit=sidecar["units"]["length"],
        provenance=sidecar.get("provenance", {}),
    )
    if potential is not None:
        dataset.check_forces(potential)
    return dataset
