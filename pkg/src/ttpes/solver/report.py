"""Eigenvalue results and the level comparison report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VARIANCE_FLOOR = -1e-10


@dataclass
class EigenResult:
    """Sorted eigenvalues with convergence diagnostics.

    Attributes:
        energies: ascending eigenvalues.
        converged: per-state convergence flags.
        variances: per-state <H^2> - <H>^2 estimates (>= numerical floor).
        sweeps: sweep count of the chain solver (0 for dense solves).
        bond_dims: final state bond dimensions ([] for dense solves).
        states: in-memory chain states when produced by the sweep solver.
    """

    energies: np.ndarray
    converged: list
    variances: np.ndarray
    sweeps: int = 0
    bond_dims: list = field(default_factory=list)
    states: list | None = None

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self.variances = np.asarray(self.variances, dtype=float)
        if np.any(np.diff(self.energies) < 0):
            raise ValueError("energies must be ascending")
        if np.any(self.variances < VARIANCE_FLOOR):
            raise ValueError("variance estimates below the numerical floor")

    @property
    def zpe(self) -> float:
        return float(self.energies[0])

    def excitations(self) -> np.ndarray:
        return self.energies - self.energies[0]


@dataclass
class LevelReport:
    """Level table with optional per-level deviations against a reference.

    The mean absolute error covers excited levels only (excitation-energy
    deviations; the zero-point entry is excluded).
    """

    energies: np.ndarray
    reference: np.ndarray | None
    converged: list
    sweeps: int
    mae: float | None

    @property
    def zpe(self) -> float:
        return float(self.energies[0])

    def rows(self):
        exc = self.energies - self.energies[0]
        ref_exc = (
            None if self.reference is None else self.reference - self.reference[0]
        )
        out = []
        for i, energy in enumerate(self.energies):
            row = {"index": i, "energy": float(energy), "excitation": float(exc[i])}
            if ref_exc is not None and i < len(ref_exc):
                row["reference"] = float(ref_exc[i])
                row["deviation"] = float(exc[i] - ref_exc[i])
            else:
                row["reference"] = None
                row["deviation"] = None
            out.append(row)
        return out

    def to_csv(self, path) -> None:
        lines = ["index,energy,excitation,reference,deviation"]
        for row in self.rows():
            ref = "" if row["reference"] is None else repr(row["reference"])
            dev = "" if row["deviation"] is None else repr(row["deviation"])
            lines.append(
                f"{row['index']},{row['energy']!r},{row['excitation']!r},{ref},{dev}"
            )
        Path(path).write_text("\n".join(lines) + "\n")

    def to_json(self, path) -> None:
        doc = {
            "zpe": self.zpe,
            "levels": len(self.energies),
            "mae_excited": self.mae,
            "converged": [bool(c) for c in self.converged],
            "sweeps": self.sweeps,
        }
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def level_report(result: EigenResult, reference: EigenResult | None = None) -> LevelReport:
    """Build the level table; with a reference, add deviations and the MAE."""
    mae = None
    ref_energies = None
    if reference is not None:
        ref_energies = reference.energies
        n = min(len(result.energies), len(ref_energies))
        if n > 1:
            dev = (result.energies[:n] - result.energies[0]) - (
                ref_energies[:n] - ref_energies[0]
            )
            mae = float(np.mean(np.abs(dev[1:])))
        else:
            mae = 0.0
    return LevelReport(
        energies=result.energies.copy(),
        reference=None if ref_energies is None else ref_energies.copy(),
        converged=list(result.converged),
        sweeps=result.sweeps,
        mae=mae,
    )
