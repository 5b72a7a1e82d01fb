"""Vibrational eigenvalues: dense oracle and the sweep eigensolver."""

from .dense import dense_eigs, dense_hamiltonian
from .dmrg import Mps, dmrg_states
from .report import EigenResult, LevelReport, level_report

__all__ = [
    "EigenResult",
    "LevelReport",
    "Mps",
    "dense_eigs",
    "dense_hamiltonian",
    "dmrg_states",
    "level_report",
]
