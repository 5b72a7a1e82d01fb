"""Sweep eigensolver on matrix product states with penalty deflation.

Ground states come from standard two-site energy minimization with cached
environments (switching to one-site once the bond cap is reached); excited
states are found sequentially by adding a penalty ``w |<lower|psi>|^2`` for
every converged lower state, which pushes the minimizer into the orthogonal
complement while keeping every energy a variational upper bound.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from ..exceptions import ConvergenceError
from ..operator.mpo import Mpo
from .report import EigenResult

LOCAL_DENSE_LIMIT = 1500
LOCAL_EIG_TOL = 1e-10
SVD_CUTOFF = 1e-14


class Mps:
    """Matrix product state with a canonical center (cores (ml, d, mr))."""

    def __init__(self, cores: list[np.ndarray], center: int = 0):
        self.cores = [np.asarray(c, dtype=float) for c in cores]
        self.center = center

    @classmethod
    def random(cls, dims: list[int], bond: int, rng: np.random.Generator) -> "Mps":
        """Normalized random state, canonical at site 0."""
        nsites = len(dims)
        cores = []
        left = 1
        for i, d in enumerate(dims):
            right = 1 if i == nsites - 1 else min(bond, left * d)
            cores.append(rng.normal(size=(left, d, right)))
            left = right
        psi = cls(cores, center=nsites - 1)
        while psi.center > 0:
            psi.shift_left()
        psi.normalize()
        return psi

    @property
    def nsites(self) -> int:
        return len(self.cores)

    @property
    def bond_dims(self) -> list[int]:
        return [c.shape[-1] for c in self.cores[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims) if self.nsites > 1 else 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.cores[self.center]))

    def normalize(self):
        norm = self.norm()
        if norm == 0.0:
            raise ValueError("cannot normalize a zero state")
        self.cores[self.center] = self.cores[self.center] / norm

    def shift_right(self):
        i = self.center
        ml, d, mr = self.cores[i].shape
        q, r = np.linalg.qr(self.cores[i].reshape(ml * d, mr))
        self.cores[i] = q.reshape(ml, d, q.shape[1])
        self.cores[i + 1] = np.einsum("ab,bsc->asc", r, self.cores[i + 1])
        self.center = i + 1

    def shift_left(self):
        i = self.center
        ml, d, mr = self.cores[i].shape
        q, r = np.linalg.qr(self.cores[i].reshape(ml, d * mr).T)
        rank = q.shape[1]
        self.cores[i] = q.T.reshape(rank, d, mr)
        self.cores[i - 1] = np.einsum("asb,bc->asc", self.cores[i - 1], r.T)
        self.center = i - 1

    def overlap(self, other: "Mps") -> float:
        env = np.ones((1, 1))
        for a, b in zip(self.cores, other.cores):
            env = np.einsum("xy,xsc,ysd->cd", env, a, b)
        return float(env[0, 0])

    def copy(self) -> "Mps":
        return Mps([c.copy() for c in self.cores], center=self.center)


def _trace_moments(hmpo: Mpo) -> tuple[float, float]:
    """(tr(H)/D, tr(H^2)/D) from per-site transfer matrices."""
    dim = float(np.prod(hmpo.dims))
    v1 = np.ones(1)
    v2 = np.ones(1)
    for core in hmpo.cores:
        t1 = np.einsum("wssv->wv", core)
        v1 = v1 @ t1
        t2 = np.einsum("wstv,xtsy->wxvy", core, core)
        t2 = t2.reshape(
            core.shape[0] * core.shape[0], core.shape[3] * core.shape[3]
        )
        v2 = v2 @ t2
    return float(v1[0]) / dim, float(v2[0]) / dim


def _expectation(hmpo: Mpo, psi: Mps) -> float:
    env = np.ones((1, 1, 1))
    for a, w in zip(psi.cores, hmpo.cores):
        env = np.einsum("xwa,xpc,wpsv,asb->cvb", env, a, w, a, optimize=True)
    return float(env[0, 0, 0])


def _expectation_squared(hmpo: Mpo, psi: Mps) -> float:
    env = np.ones((1, 1, 1, 1))
    for a, w in zip(psi.cores, hmpo.cores):
        env = np.einsum(
            "xuva,xpc,upsm,vstn,atb->cmnb", env, a, w, w, a, optimize=True
        )
    return float(env[0, 0, 0, 0])


class _StateSolver:
    """One DMRG energy minimization with penalties against lower states."""

    def __init__(self, hmpo: Mpo, psi: Mps, lower: list[Mps], weight: float):
        self.hmpo = hmpo
        self.psi = psi
        self.lower = lower
        self.weight = weight
        nsites = psi.nsites
        self.lenv = [None] * (nsites + 1)
        self.renv = [None] * (nsites + 1)
        self.lenv[0] = np.ones((1, 1, 1))
        self.renv[nsites] = np.ones((1, 1, 1))
        self.olenv = [[None] * (nsites + 1) for _ in lower]
        self.orenv = [[None] * (nsites + 1) for _ in lower]
        for s in range(len(lower)):
            self.olenv[s][0] = np.ones((1, 1))
            self.orenv[s][nsites] = np.ones((1, 1))
        for i in range(nsites - 1, psi.center, -1):
            self._build_right(i)

    # -- environment plumbing -----------------------------------------

    def _build_left(self, i: int):
        a, w = self.psi.cores[i], self.hmpo.cores[i]
        self.lenv[i + 1] = np.einsum(
            "xwa,xpc,wpsv,asb->cvb", self.lenv[i], a, w, a, optimize=True
        )
        for s, state in enumerate(self.lower):
            self.olenv[s][i + 1] = np.einsum(
                "ab,apc,bpd->cd", self.olenv[s][i], a, state.cores[i]
            )

    def _build_right(self, i: int):
        a, w = self.psi.cores[i], self.hmpo.cores[i]
        self.renv[i] = np.einsum(
            "xpc,wpsv,asb,cvb->xwa", a, w, a, self.renv[i + 1], optimize=True
        )
        for s, state in enumerate(self.lower):
            self.orenv[s][i] = np.einsum(
                "apc,bpd,cd->ab", a, state.cores[i], self.orenv[s][i + 1]
            )

    def _penalty_vectors(self, i: int, twodot: bool) -> list[np.ndarray]:
        vecs = []
        j = i + 2 if twodot else i + 1
        for s, state in enumerate(self.lower):
            if twodot:
                vec = np.einsum(
                    "ab,bsc,ctd,ed->aste",
                    self.olenv[s][i],
                    state.cores[i],
                    state.cores[i + 1],
                    self.orenv[s][j],
                    optimize=True,
                )
            else:
                vec = np.einsum(
                    "ab,bsc,ec->ase",
                    self.olenv[s][i],
                    state.cores[i],
                    self.orenv[s][j],
                )
            vecs.append(vec.reshape(-1))
        return vecs

    # -- local eigenproblem ---------------------------------------------

    def _solve_local(self, i: int, twodot: bool) -> tuple[float, np.ndarray]:
        left = self.lenv[i]
        right = self.renv[i + 2] if twodot else self.renv[i + 1]
        w1 = self.hmpo.cores[i]
        if twodot:
            w2 = self.hmpo.cores[i + 1]
            theta0 = np.einsum(
                "asb,btc->astc", self.psi.cores[i], self.psi.cores[i + 1]
            )
        else:
            theta0 = self.psi.cores[i]
        shape = theta0.shape
        size = theta0.size
        penalties = self._penalty_vectors(i, twodot)

        def matvec(flat):
            theta = flat.reshape(shape)
            if twodot:
                t = np.einsum("xwa,astb->xwstb", left, theta, optimize=True)
                t = np.einsum("xwstb,wpsv->xptvb", t, w1, optimize=True)
                t = np.einsum("xptvb,vqtu->xpqub", t, w2, optimize=True)
                out = np.einsum("xpqub,zub->xpqz", t, right, optimize=True)
            else:
                t = np.einsum("xwa,asb->xwsb", left, theta, optimize=True)
                t = np.einsum("xwsb,wpsv->xpvb", t, w1, optimize=True)
                out = np.einsum("xpvb,zvb->xpz", t, right, optimize=True)
            out = out.reshape(-1)
            for vec in penalties:
                out += self.weight * vec * float(vec @ flat)
            return out

        if size <= LOCAL_DENSE_LIMIT:
            if twodot:
                dense = np.einsum(
                    "xwa,wpsv,vqtu,zub->xpqzastb", left, w1, w2, right, optimize=True
                )
            else:
                dense = np.einsum(
                    "xwa,wpsv,zvb->xpzasb", left, w1, right, optimize=True
                )
            dense = dense.reshape(size, size)
            for vec in penalties:
                dense += self.weight * np.outer(vec, vec)
            dense = 0.5 * (dense + dense.T)
            eigvals, eigvecs = scipy.linalg.eigh(dense)
            return float(eigvals[0]), eigvecs[:, 0].reshape(shape)

        operator = scipy.sparse.linalg.LinearOperator(
            (size, size), matvec=matvec, dtype=float
        )
        v0 = theta0.reshape(-1)
        try:
            eigvals, eigvecs = scipy.sparse.linalg.eigsh(
                operator, k=1, which="SA", v0=v0, tol=LOCAL_EIG_TOL
            )
        except scipy.sparse.linalg.ArpackNoConvergence as err:
            if err.eigenvalues.size:
                eigvals, eigvecs = err.eigenvalues, err.eigenvectors
            else:  # keep the incumbent core, report its energy
                flat = v0 / np.linalg.norm(v0)
                return float(flat @ matvec(flat)), theta0
        return float(eigvals[0]), eigvecs[:, 0].reshape(shape)

    # -- sweeping --------------------------------------------------------

    def _split_two(self, i: int, theta: np.ndarray, direction: str, max_bond: int):
        ml, d1, d2, mr = theta.shape
        u, s, vt = np.linalg.svd(
            theta.reshape(ml * d1, d2 * mr), full_matrices=False
        )
        if s[0] > 0:
            rank = max(1, int(np.count_nonzero(s > SVD_CUTOFF * s[0])))
        else:
            rank = 1
        rank = min(rank, max_bond)
        norm = np.linalg.norm(s[:rank])
        s = s[:rank] / norm
        if direction == "right":
            self.psi.cores[i] = u[:, :rank].reshape(ml, d1, rank)
            self.psi.cores[i + 1] = (s[:, None] * vt[:rank]).reshape(rank, d2, mr)
            self.psi.center = i + 1
            self._build_left(i)
        else:
            self.psi.cores[i] = (u[:, :rank] * s[None, :]).reshape(ml, d1, rank)
            self.psi.cores[i + 1] = vt[:rank].reshape(rank, d2, mr)
            self.psi.center = i
            self._build_right(i + 1)

    def sweep_once(self, max_bond: int, twodot: bool) -> float:
        psi = self.psi
        nsites = psi.nsites
        energy = None
        if nsites == 1:
            energy, theta = self._solve_local(0, False)
            psi.cores[0] = theta / np.linalg.norm(theta)
            return energy
        if twodot:
            for i in range(nsites - 1):
                energy, theta = self._solve_local(i, True)
                self._split_two(i, theta, "right", max_bond)
            for i in range(nsites - 2, -1, -1):
                energy, theta = self._solve_local(i, True)
                self._split_two(i, theta, "left", max_bond)
        else:
            for i in range(nsites - 1):
                energy, theta = self._solve_local(i, False)
                psi.cores[i] = theta / np.linalg.norm(theta)
                psi.shift_right()
                self._build_left(i)
            for i in range(nsites - 1, -1, -1):
                energy, theta = self._solve_local(i, False)
                psi.cores[i] = theta / np.linalg.norm(theta)
                if i > 0:
                    psi.shift_left()
                    self._build_right(i)
        return float(energy)

    def run(self, max_bond: int, max_sweeps: int, tol: float) -> tuple[float, bool, int]:
        previous = None
        for sweep_index in range(1, max_sweeps + 1):
            twodot = self.psi.nsites > 1 and self.psi.max_bond < max_bond
            energy = self.sweep_once(max_bond, twodot)
            if previous is not None and abs(previous - energy) <= tol * max(
                1.0, abs(energy)
            ):
                return energy, True, sweep_index
            previous = energy
        return previous, False, max_sweeps


def dmrg_states(
    hmpo: Mpo,
    k: int,
    max_bond: int,
    sweeps: int = 30,
    tol: float = 1e-10,
    seed: int = 0,
    penalty_weight: float | None = None,
) -> EigenResult:
    """Lowest k eigenstates of a symmetric chain operator.

    Args:
        hmpo: Hamiltonian operator in chain form (must contract symmetric).
        k: number of states.
        max_bond: state bond-dimension cap.
        sweeps: sweep budget per state.
        tol: per-sweep relative energy-change convergence threshold.
        seed: random initial states.
        penalty_weight: deflation weight; default 10x a spectral-span
            estimate from the operator's trace moments.

    Returns:
        EigenResult with ascending energies; non-converged states keep their
        best energies and are flagged.
    """
    rng = np.random.default_rng(seed)
    dims = hmpo.dims
    energies = []
    states: list[Mps] = []
    flags = []
    sweep_counts = []
    weight = penalty_weight

    for state_index in range(k):
        psi = Mps.random(dims, min(4, max_bond), rng)
        solver = _StateSolver(hmpo, psi, states, 0.0 if weight is None else weight)
        energy, converged, used = solver.run(max_bond, sweeps, tol)
        energies.append(energy)
        flags.append(converged)
        sweep_counts.append(used)
        states.append(psi)
        if weight is None:
            mean, second = _trace_moments(hmpo)
            spread = float(np.sqrt(max(second - mean**2, 0.0)))
            weight = 10.0 * max((mean - energy) + 3.0 * spread, 1e-6)

    order = np.argsort(energies)
    energies = np.asarray(energies)[order]
    states = [states[i] for i in order]
    flags = [flags[i] for i in order]
    variances = np.array(
        [
            max(_expectation_squared(hmpo, s) - _expectation(hmpo, s) ** 2, 0.0)
            for s in states
        ]
    )
    return EigenResult(
        energies=energies,
        converged=flags,
        variances=variances,
        sweeps=int(max(sweep_counts)),
        bond_dims=states[-1].bond_dims,
        states=states,
    )
