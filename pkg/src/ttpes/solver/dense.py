"""Dense diagonalization path: the small-scale oracle for the chain solver."""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from ..exceptions import GuardExceededError
from ..operator.mpo import Mpo
from .report import EigenResult

SYMMETRY_TOL = 1e-10
DENSE_ROW_GUARD = 40_000


def dense_hamiltonian(hmpo: Mpo, guard_rows: int = DENSE_ROW_GUARD) -> np.ndarray:
    """Materialize the operator matrix; must come out symmetric.

    Raises:
        GuardExceededError: above ``guard_rows`` rows.
        ValueError: if the materialized operator is not symmetric.
    """
    total = int(np.prod(hmpo.dims))
    if total > guard_rows:
        raise GuardExceededError(f"{total} rows exceed the dense guard {guard_rows}")
    matrix = hmpo.dense(guard=total * total + 1)
    asym = float(np.max(np.abs(matrix - matrix.T)))
    scale = max(float(np.max(np.abs(matrix))), 1.0)
    if asym > SYMMETRY_TOL * scale:
        raise ValueError(f"operator is not symmetric (deviation {asym:.2e})")
    return 0.5 * (matrix + matrix.T)


def dense_eigs(matrix: np.ndarray, k: int) -> EigenResult:
    """Lowest k eigenpairs of a symmetric matrix.

    Uses the full symmetric solver below ~2000 rows, else iterative Lanczos.
    """
    matrix = np.asarray(matrix, dtype=float)
    asym = float(np.max(np.abs(matrix - matrix.T)))
    if asym > SYMMETRY_TOL * max(float(np.max(np.abs(matrix))), 1.0):
        raise ValueError(f"matrix is not symmetric (deviation {asym:.2e})")
    n = matrix.shape[0]
    k = min(k, n)
    if n <= 2000 or k > n - 2:
        eigvals, eigvecs = scipy.linalg.eigh(matrix)
        eigvals, eigvecs = eigvals[:k], eigvecs[:, :k]
    else:
        eigvals, eigvecs = scipy.sparse.linalg.eigsh(matrix, k=k, which="SA")
        order = np.argsort(eigvals)
        eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    residuals = matrix @ eigvecs - eigvecs * eigvals[None, :]
    variances = np.sum(residuals**2, axis=0)
    return EigenResult(
        energies=eigvals.copy(),
        converged=[True] * k,
        variances=variances,
        sweeps=0,
        bond_dims=[],
    )
