"""Harmonic-oscillator discrete variable representation per latent mode.

The grid is the spectrum of the position operator truncated to d oscillator
eigenfunctions; position-dependent operators become diagonal on it, with
values at the grid points, while the kinetic matrix stays exact in the
transformed basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DvrBasis:
    """One mode's grid basis.

    Attributes:
        grid: (d,) grid points, eigenvalues of the truncated position
            operator shifted by the center.
        transform: (d, d) unitary, oscillator eigenbasis -> grid basis
            (columns are position eigenvectors, sign-fixed).
        kinetic: (d, d) matrix of -(hbar^2/2) d^2/dq^2 in the grid basis.
        frequency / center / hbar: construction parameters.
    """

    grid: np.ndarray
    transform: np.ndarray
    kinetic: np.ndarray
    frequency: float
    center: float
    hbar: float = 1.0

    @property
    def size(self) -> int:
        return self.grid.size


def build_ho_dvr(size: int, frequency: float, center: float = 0.0, hbar: float = 1.0) -> DvrBasis:
    """Grid basis from diagonalizing the position operator.

    In the oscillator eigenbasis the position operator is tridiagonal with
    off-diagonal sqrt(hbar (k+1) / (2 w)); its eigenvalues (plus the center)
    are the grid points, which coincide with scaled Gauss-Hermite nodes.  The
    kinetic matrix comes from the exact momentum-squared representation,
    diagonal hbar w (k + 1/2) with second off-diagonal
    -(hbar w / 2) sqrt((k+1)(k+2)), rotated into the grid basis.
    """
    if size < 2:
        raise ValueError("need at least two grid points")
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    k = np.arange(size - 1)
    off = np.sqrt(hbar * (k + 1) / (2.0 * frequency))
    position = np.zeros((size, size))
    position[k, k + 1] = off
    position[k + 1, k] = off
    eigvals, eigvecs = np.linalg.eigh(position)
    # Sign convention: the ground-state row is positive (quadrature weights).
    signs = np.sign(eigvecs[0])
    signs[signs == 0] = 1.0
    eigvecs = eigvecs * signs[None, :]

    psq = np.zeros((size, size))
    idx = np.arange(size)
    psq[idx, idx] = hbar * frequency * (idx + 0.5)
    k2 = np.arange(size - 2)
    band = -0.5 * hbar * frequency * np.sqrt((k2 + 1) * (k2 + 2))
    psq[k2, k2 + 2] = band
    psq[k2 + 2, k2] = band

    kinetic = eigvecs.T @ (0.5 * psq) @ eigvecs
    kinetic = 0.5 * (kinetic + kinetic.T)
    return DvrBasis(
        grid=eigvals + center,
        transform=eigvecs,
        kinetic=kinetic,
        frequency=frequency,
        center=center,
        hbar=hbar,
    )


def hermite_functions(order: int, xi: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions h_0..h_{order-1} against weight e^{-xi^2}.

    Returns (order, len(xi)); satisfies ∫ h_j h_k e^{-xi^2} dxi = delta_jk.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty((order, xi.size))
    out[0] = np.pi**-0.25
    if order > 1:
        out[1] = np.sqrt(2.0) * xi * out[0]
    for k in range(1, order - 1):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * xi * out[k] - np.sqrt(
            k / (k + 1)
        ) * out[k - 1]
    return out


def eigenbasis_quadrature(dvr: DvrBasis, values_fn, quad_order: int = 160) -> np.ndarray:
    """Exact (d, d) one-mode integrals <j| f |k> in the oscillator eigenbasis.

    High-order Gauss-Hermite quadrature; the DVR diagonal rule approximates
    the grid-basis transform of this matrix, so the pair quantifies the
    diagonal-approximation error for non-polynomial integrands.
    """
    nodes, weights = np.polynomial.hermite.hermgauss(quad_order)
    scale = np.sqrt(dvr.frequency / dvr.hbar)
    points = dvr.center + nodes / scale
    herm = hermite_functions(dvr.size, nodes)
    fvals = np.asarray(values_fn(points), dtype=float)
    return np.einsum("jq,kq,q,q->jk", herm, herm, fvals, weights)
