"""Matrix product operators on the per-mode grid bases.

Cores are rank-4 arrays ``(M_left, d_bra, d_ket, M_right)`` with unit boundary
bonds.  The potential operator comes from contracting trained train cores
with one-mode integrals; the kinetic operator has the standard
bond-dimension-2 block structure; sums are direct sums with optional SVD
compression.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..basis import BasisFamily
from ..exceptions import GuardExceededError, SchemaError
from ..model import ModelState
from ..tensortrain import TensorTrain
from .dvr import DvrBasis, eigenbasis_quadrature

DENSE_GUARD = 1_000_000


class Mpo:
    """Operator in chain form over f modes."""

    def __init__(self, cores: list[np.ndarray]):
        self.cores = [np.asarray(c, dtype=float) for c in cores]
        if self.cores[0].shape[0] != 1 or self.cores[-1].shape[-1] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for a, b in zip(self.cores, self.cores[1:]):
            if a.shape[-1] != b.shape[0]:
                raise ValueError(f"bond mismatch between {a.shape} and {b.shape}")

    @property
    def nsites(self) -> int:
        return len(self.cores)

    @property
    def dims(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def bond_dims(self) -> list[int]:
        return [c.shape[-1] for c in self.cores[:-1]]

    def expectation(self, bra_config, ket_config) -> float:
        """<bra| operator |ket> for product-basis configurations.

        Left-to-right contraction of the selected slices: O(M^2 f).
        """
        vec = np.ones(1)
        for core, bra, ket in zip(self.cores, bra_config, ket_config):
            if not (0 <= bra < core.shape[1] and 0 <= ket < core.shape[2]):
                raise IndexError("configuration index out of range")
            vec = vec @ core[:, bra, ket, :]
        return float(vec[0])

    def dense(self, guard: int = DENSE_GUARD) -> np.ndarray:
        """Materialize the full operator matrix (oracle for small shapes)."""
        total = int(np.prod(self.dims))
        if total * total > guard:
            raise GuardExceededError(
                f"dense operator would hold {total}^2 entries (guard {guard})"
            )
        block = np.ones((1, 1, 1))
        for core in self.cores:
            block = np.einsum("abm,mxyn->axbyn", block, core)
            block = block.reshape(
                block.shape[0] * block.shape[1],
                block.shape[2] * block.shape[3],
                block.shape[4],
            )
        return block[:, :, 0]

    def copy(self) -> "Mpo":
        return Mpo([c.copy() for c in self.cores])


def one_mode_integrals(
    basis: BasisFamily, centers: np.ndarray, dvr: DvrBasis, mode: int
) -> np.ndarray:
    """(d, N, d) integrals of the mode's feature functions in the grid basis.

    Under the grid-diagonal rule these are delta(bra, ket) times the feature
    value at the grid point; see :func:`one_mode_integrals_exact` for the
    quadrature reference.
    """
    if not 0 <= mode < basis.nmodes:
        raise ValueError(f"mode {mode} out of range")
    q = dvr.grid[:, None].repeat(basis.nmodes, axis=1)
    rows, = basis.tables(q, centers, order=0)  # (d, f, N); only `mode` used
    out = np.zeros((dvr.size, basis.size, dvr.size))
    idx = np.arange(dvr.size)
    out[idx, :, idx] = rows[:, mode, :]
    return out


def one_mode_integrals_exact(
    basis: BasisFamily,
    centers: np.ndarray,
    dvr: DvrBasis,
    mode: int,
    quad_order: int = 160,
) -> np.ndarray:
    """Quadrature (non-diagonal) variant of :func:`one_mode_integrals`.

    Exposes the error of the diagonal approximation; not used on the default
    conversion path.
    """
    out = np.empty((dvr.size, basis.size, dvr.size))
    for rho in range(basis.size):
        def feature(points, rho=rho):
            q = points[:, None].repeat(basis.nmodes, axis=1)
            rows, = basis.tables(q, centers, order=0)
            return rows[:, mode, rho]

        eig = eigenbasis_quadrature(dvr, feature, quad_order)
        out[:, rho, :] = dvr.transform.T @ eig @ dvr.transform
    return out


def contract_cores(tt: TensorTrain, integrals: list[np.ndarray]) -> Mpo:
    """Potential operator: train cores contracted with one-mode integrals."""
    if len(integrals) != tt.nsites:
        raise ValueError("need one integral block per site")
    cores = []
    for core, block in zip(tt.cores, integrals):
        if block.shape[1] != core.shape[1]:
            raise ValueError(
                f"integral channel count {block.shape[1]} does not match train {core.shape[1]}"
            )
        cores.append(np.einsum("arb,xry->axyb", core, block))
    return Mpo(cores)


def potential_mpo(model: ModelState, dvrs: list[DvrBasis]) -> Mpo:
    """Grid-basis potential operator of a trained model (diagonal rule)."""
    if len(dvrs) != model.nmodes:
        raise ValueError("need one grid basis per latent mode")
    centers = model.centers()
    integrals = [
        one_mode_integrals(model.basis, centers, dvr, mode)
        for mode, dvr in enumerate(dvrs)
    ]
    return contract_cores(model.tt, integrals)


def kinetic_mpo(dvrs: list[DvrBasis]) -> Mpo:
    """Sum of one-mode kinetic terms as a bond-dimension-2 operator.

    Block structure per site: [[1, 0], [T_i, 1]] with boundary rows [T_1, 1]
    and column [1; T_f], which telescopes to sum_i T_i.
    """
    nsites = len(dvrs)
    if nsites == 1:
        t = dvrs[0].kinetic
        return Mpo([t.reshape(1, *t.shape, 1)])
    cores = []
    for i, dvr in enumerate(dvrs):
        d = dvr.size
        eye = np.eye(d)
        t = dvr.kinetic
        if i == 0:
            core = np.zeros((1, d, d, 2))
            core[0, :, :, 0] = t
            core[0, :, :, 1] = eye
        elif i == nsites - 1:
            core = np.zeros((2, d, d, 1))
            core[0, :, :, 0] = eye
            core[1, :, :, 0] = t
        else:
            core = np.zeros((2, d, d, 2))
            core[0, :, :, 0] = eye
            core[1, :, :, 0] = t
            core[1, :, :, 1] = eye
        cores.append(core)
    return Mpo(cores)


def mpo_add(a: Mpo, b: Mpo, compress_tol: float | None = None) -> Mpo:
    """Direct sum of two operators on identical site dimensions.

    Bond dimensions add; pass ``compress_tol`` to follow with an SVD
    compression at that relative tolerance.
    """
    if a.nsites != b.nsites:
        raise ValueError("site count mismatch")
    if a.dims != b.dims:
        raise ValueError("site dimension mismatch")
    if a.nsites == 1:
        return Mpo([a.cores[0] + b.cores[0]])
    cores = []
    for i, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        la, d, _, ra = ca.shape
        lb, _, _, rb = cb.shape
        if i == 0:
            core = np.concatenate([ca, cb], axis=3)
        elif i == a.nsites - 1:
            core = np.concatenate([ca, cb], axis=0)
        else:
            core = np.zeros((la + lb, d, d, ra + rb))
            core[:la, :, :, :ra] = ca
            core[la:, :, :, ra:] = cb
        cores.append(core)
    out = Mpo(cores)
    if compress_tol is not None:
        out = compress_mpo(out, compress_tol)
    return out


def compress_mpo(mpo: Mpo, tol: float) -> Mpo:
    """Two-pass SVD compression at relative singular-value tolerance ``tol``.

    A tolerance of 0 still drops only numerically-zero values (1e-14
    relative floor), preserving the operator to machine precision.
    """
    cutoff = max(tol, 1e-14)
    cores = [c.copy() for c in mpo.cores]
    # Left-to-right orthogonalization pass.
    for i in range(len(cores) - 1):
        ml, db, dk, mr = cores[i].shape
        mat = cores[i].reshape(ml * db * dk, mr)
        q, r = np.linalg.qr(mat)
        rank = q.shape[1]
        cores[i] = q.reshape(ml, db, dk, rank)
        cores[i + 1] = np.einsum("ab,bxyc->axyc", r, cores[i + 1])
    # Right-to-left truncation pass.
    for i in range(len(cores) - 1, 0, -1):
        ml, db, dk, mr = cores[i].shape
        mat = cores[i].reshape(ml, db * dk * mr)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        if s[0] > 0:
            rank = max(1, int(np.count_nonzero(s > cutoff * s[0])))
        else:
            rank = 1
        cores[i] = vt[:rank].reshape(rank, db, dk, mr)
        carry = u[:, :rank] * s[:rank][None, :]
        cores[i - 1] = np.einsum("axyb,bc->axyc", cores[i - 1], carry)
    return Mpo(cores)


def exact_grid_mpo(
    potential, dvrs: list[DvrBasis], guard: int = DENSE_GUARD, cutoff: float = 1e-12
) -> Mpo:
    """Reference operator: evaluate the potential on the full grid and
    factor it by sequential SVD with a machine-precision cutoff only.

    ``potential`` is either a callable mapping (B, f) points to (B,) values
    or an object with an ``energy`` method.  The result is diagonal in the
    grid basis with the maximal (uncompressed) bond structure.
    """
    energy = potential.energy if hasattr(potential, "energy") else potential
    sizes = [dvr.size for dvr in dvrs]
    total = int(np.prod(sizes))
    if total > guard:
        raise GuardExceededError(
            f"exact grid would need {total} evaluations (guard {guard})"
        )
    mesh = np.stack(
        np.meshgrid(*[dvr.grid for dvr in dvrs], indexing="ij"), axis=-1
    ).reshape(total, len(sizes))
    values = np.asarray(energy(mesh), dtype=float).reshape(sizes)

    cores = []
    remainder = values.reshape(1, -1)
    bond = 1
    for i, d in enumerate(sizes[:-1]):
        mat = remainder.reshape(bond * d, -1)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        if s[0] > 0:
            rank = max(1, int(np.count_nonzero(s > cutoff * s[0])))
        else:
            rank = 1
        cores.append(u[:, :rank].reshape(bond, d, rank))
        remainder = s[:rank, None] * vt[:rank]
        bond = rank
    cores.append(remainder.reshape(bond, sizes[-1], 1))

    mpo_cores = []
    for core in cores:
        ml, d, mr = core.shape
        out = np.zeros((ml, d, d, mr))
        idx = np.arange(d)
        out[:, idx, idx, :] = core
        mpo_cores.append(out)
    return Mpo(mpo_cores)


# -- file format -------------------------------------------------------------

MPO_SCHEMA = "ttpes-mpo-1"


def save_mpo(mpo: Mpo, path) -> None:
    doc = {
        "schema": MPO_SCHEMA,
        "sites": mpo.nsites,
        "cores": [
            {"shape": list(core.shape), "data": core.ravel().tolist()}
            for core in mpo.cores
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_mpo(path) -> Mpo:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path} is not valid JSON: {err}") from err
    if doc.get("schema") != MPO_SCHEMA:
        raise SchemaError(f"expected schema {MPO_SCHEMA!r}, got {doc.get('schema')!r}")
    cores = [
        np.asarray(core["data"], dtype=float).reshape(core["shape"])
        for core in doc["cores"]
    ]
    return Mpo(cores)
