"""Grid bases and matrix product operators for the converted Hamiltonian."""

from .dvr import DvrBasis, build_ho_dvr, eigenbasis_quadrature, hermite_functions
from .mpo import (
    Mpo,
    compress_mpo,
    contract_cores,
    exact_grid_mpo,
    kinetic_mpo,
    load_mpo,
    mpo_add,
    one_mode_integrals,
    one_mode_integrals_exact,
    potential_mpo,
    save_mpo,
)

__all__ = [
    "DvrBasis",
    "Mpo",
    "build_ho_dvr",
    "compress_mpo",
    "contract_cores",
    "eigenbasis_quadrature",
    "exact_grid_mpo",
    "hermite_functions",
    "kinetic_mpo",
    "load_mpo",
    "mpo_add",
    "one_mode_integrals",
    "one_mode_integrals_exact",
    "potential_mpo",
    "save_mpo",
]
