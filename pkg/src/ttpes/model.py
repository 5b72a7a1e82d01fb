"""Trainable potential: feature rows contracted through a tensor train.

The model is ``V(x) = rows(x @ transform) . weights`` where ``transform`` is
an orthonormal (n, f) matrix mapping inputs to latent coordinates, ``rows``
the per-mode feature table and ``weights`` a tensor train.  Evaluation and
forces are closed-form; no automatic differentiation is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import KIND_CUSTOM, BasisFamily, draw_reference_points
from .potentials import SopPotential
from .tensortrain import TensorTrain

ORTHONORMALITY_TOL = 1e-10


def check_orthonormal(transform: np.ndarray, tol: float = ORTHONORMALITY_TOL) -> float:
    """Frobenius deviation of transform' @ transform from the identity."""
    transform = np.asarray(transform, dtype=float)
    err = float(np.linalg.norm(transform.T @ transform - np.eye(transform.shape[1])))
    if err > tol:
        raise ValueError(f"transform columns are not orthonormal (error {err:.2e})")
    return err


def random_orthonormal(n: int, f: int, rng: np.random.Generator) -> np.ndarray:
    """Random (n, f) matrix with orthonormal columns (QR of a Gaussian)."""
    mat = rng.normal(size=(n, f))
    q, r = np.linalg.qr(mat)
    return q * np.sign(np.diag(r))[None, :]


def to_latent(x: np.ndarray, transform: np.ndarray) -> np.ndarray:
    """Map input row vectors to latent coordinates q = x @ transform."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != transform.shape[0]:
        raise ValueError(
            f"point has {x.shape[-1]} coordinates, transform expects {transform.shape[0]}"
        )
    return x @ transform


@dataclass
class ModelState:
    """Transform + feature family + tensor train, with unit metadata.

    Attributes:
        transform: (n, f) orthonormal input-to-latent matrix.
        basis: per-mode feature family (f modes, N entries each).
        tt: tensor-train weights over the f modes.
        energy_unit / length_unit: bookkeeping labels carried through files.
    """

    transform: np.ndarray
    basis: BasisFamily
    tt: TensorTrain
    energy_unit: str = "arb"
    length_unit: str = "arb"

    def __post_init__(self):
        self.transform = np.asarray(self.transform, dtype=float)
        self.validate()

    @property
    def ninputs(self) -> int:
        return self.transform.shape[0]

    @property
    def nmodes(self) -> int:
        return self.transform.shape[1]

    @property
    def nbasis(self) -> int:
        return self.basis.size

    def validate(self):
        check_orthonormal(self.transform)
        if self.basis.nmodes != self.nmodes:
            raise ValueError("basis mode count disagrees with transform")
        if self.tt.nsites != self.nmodes:
            raise ValueError("tensor train site count disagrees with transform")
        if self.tt.nbasis != self.basis.size:
            raise ValueError("tensor train channel count disagrees with basis size")
        if self.basis.reference_points.shape[1] != self.ninputs:
            raise ValueError("reference points live in the wrong input dimension")

    # -- evaluation -------------------------------------------------------

    def centers(self) -> np.ndarray:
        """Per-mode feature centers for the current transform."""
        return self.basis.centers(self.transform)

    def evaluate(self, x: np.ndarray) -> np.ndarray | float:
        """Potential prediction at one point (n,) or a batch (B, n)."""
        single = np.asarray(x).ndim == 1
        q = to_latent(np.atleast_2d(x), self.transform)
        rows, = self.basis.tables(q, self.centers(), order=0)
        out = self.tt.contract_rows(rows)
        return float(out[0]) if single else out

    def latent_gradient(self, x: np.ndarray) -> np.ndarray:
        """d(prediction)/dq, shape (B, f), via prefix/suffix contractions."""
        q = to_latent(np.atleast_2d(x), self.transform)
        rows, d1 = self.basis.tables(q, self.centers(), order=1)
        drows = self.basis.weights[None] * d1
        return tt_directional_rows(self.tt, rows, drows)

    def force(self, x: np.ndarray) -> np.ndarray:
        """Predicted forces -dV/dx = (-dV/dq) @ transform'."""
        single = np.asarray(x).ndim == 1
        grad_q = self.latent_gradient(x)
        forces = -grad_q @ self.transform.T
        return forces[0] if single else forces

    def copy(self) -> "ModelState":
        return ModelState(
            transform=self.transform.copy(),
            basis=self.basis.copy(),
            tt=self.tt.copy(),
            energy_unit=self.energy_unit,
            length_unit=self.length_unit,
        )


def tt_directional_rows(
    tt: TensorTrain, rows: np.ndarray, drows: np.ndarray
) -> np.ndarray:
    """Contractions with one mode's rows replaced by derivative rows.

    Returns (B, f): entry (b, i) is the chain contraction of ``rows[b]`` with
    mode i substituted by ``drows[b, i]``.  Prefix/suffix reuse keeps the cost
    at O(f N M^2) per point instead of f independent contractions.
    """
    npoints, nsites, _ = rows.shape
    mats = [np.einsum("bn,anc->bac", rows[:, i], tt.cores[i]) for i in range(nsites)]
    prefix = [np.ones((npoints, 1))]
    for i in range(nsites - 1):
        prefix.append(np.einsum("ba,bac->bc", prefix[-1], mats[i]))
    suffix = [np.ones((npoints, 1))]
    for i in range(nsites - 1, 0, -1):
        suffix.append(np.einsum("bac,bc->ba", mats[i], suffix[-1]))
    suffix.reverse()  # suffix[i] contracts sites i+1..f-1

    out = np.empty((npoints, nsites))
    for i in range(nsites):
        dmat = np.einsum("bn,anc->bac", drows[:, i], tt.cores[i])
        out[:, i] = np.einsum("ba,bac,bc->b", prefix[i], dmat, suffix[i])
    return out


def initialize_model(
    ninputs: int,
    nmodes: int,
    nbasis: int,
    bond_dim: int,
    train_inputs: np.ndarray,
    rng: np.random.Generator,
    mean_energy: float = 0.0,
    transform: np.ndarray | None = None,
    energy_unit: str = "arb",
    length_unit: str = "arb",
) -> ModelState:
    """Fresh model: identity-padded transform, data-drawn centers, random train.

    Args:
        train_inputs: (S, n) training coordinates used for reference points.
        mean_energy: seeds the constant channel so initial predictions sit
            near the data mean.
        transform: optional starting transform; defaults to the first f
            columns of the identity.
    """
    if nmodes > ninputs:
        raise ValueError("latent dimension cannot exceed input dimension")
    if transform is None:
        transform = np.eye(ninputs)[:, :nmodes]
    reference = draw_reference_points(train_inputs, nbasis, rng)
    basis = BasisFamily.standard(nmodes, nbasis, reference)
    tt = TensorTrain.random(nmodes, nbasis, bond_dim, rng, constant_offset=mean_energy)
    return ModelState(
        transform=np.asarray(transform, dtype=float),
        basis=basis,
        tt=tt,
        energy_unit=energy_unit,
        length_unit=length_unit,
    )


def encode_sop(sop: SopPotential, nbasis: int) -> ModelState:
    """Exactly encode a sum-of-products potential as a model.

    Every distinct one-mode factor is installed as an explicit basis entry
    (scales 1, offsets 0, zero centers) and the train is assembled with
    shared identity channels: bond dimension at most the term count plus two.
    The transform is the potential's rotation when present, else the identity.

    Raises:
        ValueError: if a mode needs more basis entries than ``nbasis``.
    """
    nmodes = sop.nmodes
    factor_index: list[dict] = [dict() for _ in range(nmodes)]
    for term in sop.terms:
        for mode, fn in term.factors:
            table = factor_index[mode]
            if fn not in table:
                index = len(table) + 1  # channel 0 stays the constant
                if index >= nbasis:
                    raise ValueError(
                        f"mode {mode} needs {len(table) + 2} basis entries, "
                        f"budget is {nbasis}"
                    )
                table[fn] = index

    basis = BasisFamily.standard(nmodes, nbasis, np.zeros((nbasis, nmodes)))
    for mode, table in enumerate(factor_index):
        for fn, rho in table.items():
            basis.kinds[mode, rho] = KIND_CUSTOM
            basis.custom[(mode, rho)] = fn

    constant_total = 0.0
    routed = []  # (term, first, last, factor map)
    for term in sop.terms:
        if not term.modes:
            constant_total += term.coefficient
            continue
        routed.append((term, min(term.modes), max(term.modes), dict(term.factors)))

    # Channel layout per bond: [prefix?, straddling terms..., done?].
    def bond_channels(bond: int) -> list:
        channels = []
        if any(first > bond for _, first, _, _ in routed):
            channels.append("prefix")
        for tid, (_, first, last, _) in enumerate(routed):
            if first <= bond < last:
                channels.append(tid)
        if constant_total != 0.0 or any(last <= bond for _, _, last, _ in routed):
            channels.append("done")
        return channels or ["done"]

    layouts = [["prefix"]] + [bond_channels(b) for b in range(nmodes - 1)] + [["done"]]
    cores = []
    for site in range(nmodes):
        left, right = layouts[site], layouts[site + 1]
        core = np.zeros((len(left), nbasis, len(right)))
        lpos = {c: k for k, c in enumerate(left)}
        rpos = {c: k for k, c in enumerate(right)}
        if "prefix" in lpos and "prefix" in rpos:
            core[lpos["prefix"], 0, rpos["prefix"]] = 1.0
        if "done" in lpos and "done" in rpos:
            core[lpos["done"], 0, rpos["done"]] = 1.0
        if site == 0 and constant_total != 0.0:
            core[lpos["prefix"], 0, rpos["done"]] += constant_total
        for tid, (term, first, last, factors) in enumerate(routed):
            if site < first or site > last:
                continue
            rho = factor_index[site][factors[site]] if site in factors else 0
            if first == last == site:
                core[lpos["prefix"], rho, rpos["done"]] += term.coefficient
            elif site == first:
                core[lpos["prefix"], rho, rpos[tid]] = term.coefficient
            elif site == last:
                core[lpos[tid], rho, rpos["done"]] = 1.0
            else:
                core[lpos[tid], rho, rpos[tid]] = 1.0
        cores.append(core)

    transform = sop.rotation if sop.rotation is not None else np.eye(nmodes)
    return ModelState(
        transform=np.asarray(transform, dtype=float),
        basis=basis,
        tt=TensorTrain(cores),
    )
