"""Model checkpoint serialization: a single JSON document per model.

Floats are written with Python's shortest round-trip representation, so a
save/load cycle reproduces every array bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .basis import BasisFamily, factor_from_spec, factor_to_spec, kind_code, kind_name
from .exceptions import SchemaError
from .model import ModelState
from .tensortrain import TensorTrain

SCHEMA = "ttpes-model-1"


def model_to_dict(model: ModelState) -> dict:
    basis = model.basis
    return {
        "schema": SCHEMA,
        "dims": {
            "inputs": model.ninputs,
            "modes": model.nmodes,
            "basis": model.nbasis,
            "bonds": model.tt.bond_dims,
        },
        "transform": model.transform.tolist(),
        "basis": {
            "kinds": [[kind_name(k) for k in row] for row in basis.kinds],
            "weights": basis.weights.tolist(),
            "biases": basis.biases.tolist(),
            "reference_points": basis.reference_points.tolist(),
            "custom": [
                {"mode": int(i), "index": int(rho), "fn": factor_to_spec(fn)}
                for (i, rho), fn in sorted(basis.custom.items())
            ],
        },
        "tt": {
            "center": model.tt.center,
            "cores": [
                {"shape": list(core.shape), "data": core.ravel().tolist()}
                for core in model.tt.cores
            ],
        },
        "units": {"energy": model.energy_unit, "length": model.length_unit},
    }


def model_from_dict(doc: dict) -> ModelState:
    if doc.get("schema") != SCHEMA:
        raise SchemaError(f"expected schema {SCHEMA!r}, got {doc.get('schema')!r}")
    basis_doc = doc["basis"]
    kinds = np.array(
        [[kind_code(k) for k in row] for row in basis_doc["kinds"]], dtype=np.int8
    )
    basis = BasisFamily(
        kinds=kinds,
        weights=np.asarray(basis_doc["weights"], dtype=float),
        biases=np.asarray(basis_doc["biases"], dtype=float),
        reference_points=np.asarray(basis_doc["reference_points"], dtype=float),
        custom={
            (entry["mode"], entry["index"]): factor_from_spec(entry["fn"])
            for entry in basis_doc.get("custom", [])
        },
    )
    cores = [
        np.asarray(core["data"], dtype=float).reshape(core["shape"])
        for core in doc["tt"]["cores"]
    ]
    tt = TensorTrain(cores, center=doc["tt"].get("center"))
    return ModelState(
        transform=np.asarray(doc["transform"], dtype=float),
        basis=basis,
        tt=tt,
        energy_unit=doc["units"]["energy"],
        length_unit=doc["units"]["length"],
    )


def save_model(model: ModelState, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> ModelState:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"checkpoint {path} is not valid JSON: {err}") from err
    return model_from_dict(doc)
