"""Tensor-train potential energy surfaces.

Sample configurations from an analytic potential, train a tensor-train
potential with a learnable orthonormal coordinate transform on energies and
forces, convert the result to a matrix product operator over a grid basis,
and solve for vibrational eigenvalues.
"""

__version__ = "0.1.0"

from .basis import BasisFamily, GaussianFactor, Monomial, MorseFactor
from .checkpoint import load_model, save_model
from .model import ModelState, encode_sop, initialize_model, to_latent
from .potentials import SopPotential, coupled_anharmonic, rotated_coupled_ho
from .tensortrain import TensorTrain

__all__ = [
    "BasisFamily",
    "GaussianFactor",
    "Monomial",
    "MorseFactor",
    "ModelState",
    "SopPotential",
    "TensorTrain",
    "coupled_anharmonic",
    "encode_sop",
    "initialize_model",
    "load_model",
    "rotated_coupled_ho",
    "save_model",
    "to_latent",
]
