"""Tensor-train weight with gauge bookkeeping.

Cores are rank-3 arrays ``(M_left, N, M_right)`` with unit boundary bonds.
The canonical center marks the one non-isometric core; cores left of it are
left-isometric and cores right of it right-isometric.  Gauge moves use SVD
with a relative cutoff so numerical noise cannot inflate bond dimensions.
"""

from __future__ import annotations

import numpy as np

from .exceptions import GuardExceededError

# Relative singular-value floor applied during gauge moves.
SVD_CUTOFF = 1e-14

DENSE_GUARD = 1_000_000


def _split_matrix(mat: np.ndarray, cutoff: float, max_rank: int | None):
    """SVD split keeping singular values above cutoff * sigma_max (at least one)."""
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    if s[0] > 0.0:
        rank = int(np.count_nonzero(s > cutoff * s[0]))
    else:
        rank = 1
    rank = max(rank, 1)
    if max_rank is not None:
        rank = min(rank, max_rank)
    discarded = float(np.sum(s[rank:] ** 2))
    return u[:, :rank], s[:rank], vt[:rank], discarded


class TensorTrain:
    """Chain-factorized weight tensor over f modes with N channels each."""

    def __init__(self, cores: list[np.ndarray], center: int | None = None):
        self.cores = [np.asarray(c, dtype=float) for c in cores]
        self.center = center
        self._check_shapes()

    def _check_shapes(self):
        if self.cores[0].shape[0] != 1 or self.cores[-1].shape[-1] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for left, right in zip(self.cores, self.cores[1:]):
            if left.shape[-1] != right.shape[0]:
                raise ValueError(
                    f"adjacent cores disagree on bond: {left.shape} vs {right.shape}"
                )

    @property
    def nsites(self) -> int:
        return len(self.cores)

    @property
    def nbasis(self) -> int:
        return self.cores[0].shape[1]

    @property
    def bond_dims(self) -> list[int]:
        """Internal bond dimensions (length nsites - 1)."""
        return [c.shape[-1] for c in self.cores[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims) if self.nsites > 1 else 1

    @classmethod
    def random(
        cls,
        nsites: int,
        nbasis: int,
        bond_dim: int,
        rng: np.random.Generator,
        constant_offset: float = 0.0,
    ) -> "TensorTrain":
        """i.i.d. normal cores scaled by 1/sqrt(N*M); optional constant seed.

        The constant channel (index 0) of every core past the first is set to
        a pass-through and the first core's constant entry to
        ``constant_offset``, so the initial model predicts roughly that value.
        """
        scale = 1.0 / np.sqrt(nbasis * bond_dim)
        cores = []
        for i in range(nsites):
            ml = 1 if i == 0 else bond_dim
            mr = 1 if i == nsites - 1 else bond_dim
            core = rng.normal(0.0, scale, size=(ml, nbasis, mr))
            cores.append(core)
        if constant_offset != 0.0:
            for i in range(1, nsites):
                cores[i][0, 0, 0] = 1.0
            cores[0][0, 0, 0] = constant_offset
        return cls(cores)

    @classmethod
    def constant(cls, nsites: int, nbasis: int, value: float) -> "TensorTrain":
        """Bond-dimension-1 train encoding a constant via channel 0."""
        cores = [np.zeros((1, nbasis, 1)) for _ in range(nsites)]
        for core in cores:
            core[0, 0, 0] = 1.0
        cores[0][0, 0, 0] = value
        return cls(cores, center=0)

    def copy(self) -> "TensorTrain":
        return TensorTrain([c.copy() for c in self.cores], center=self.center)

    # -- contraction ----------------------------------------------------

    def contract_rows(self, rows: np.ndarray) -> np.ndarray:
        """Contract per-mode feature rows through the chain.

        Args:
            rows: (B, f, N) feature values per point and mode.

        Returns:
            (B,) contraction values.
        """
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 3 or rows.shape[1] != self.nsites or rows.shape[2] != self.nbasis:
            raise ValueError(f"rows shape {rows.shape} incompatible with train")
        vec = np.ones((rows.shape[0], 1))
        for i, core in enumerate(self.cores):
            mats = np.einsum("bn,anc->bac", rows[:, i], core)
            vec = np.einsum("ba,bac->bc", vec, mats)
        return vec[:, 0]

    def expand(self, guard: int = DENSE_GUARD) -> np.ndarray:
        """Materialize the full N^f weight tensor (testing oracle)."""
        full_size = self.nbasis**self.nsites
        if full_size > guard:
            raise GuardExceededError(
                f"dense weight would hold {full_size} entries (guard {guard})"
            )
        out = self.cores[0]
        for core in self.cores[1:]:
            out = np.tensordot(out, core, axes=([out.ndim - 1], [0]))
        return out.reshape((self.nbasis,) * self.nsites)

    # -- gauge ----------------------------------------------------------

    def shift_center_right(self, max_bond: int | None = None) -> float:
        """Move the center one site to the right; returns discarded weight."""
        i = self.center
        if i is None or i >= self.nsites - 1:
            raise ValueError("no center to shift or already at right edge")
        ml, nb, mr = self.cores[i].shape
        u, s, vt, discarded = _split_matrix(
            self.cores[i].reshape(ml * nb, mr), SVD_CUTOFF, max_bond
        )
        rank = s.size
        self.cores[i] = u.reshape(ml, nb, rank)
        carry = s[:, None] * vt
        self.cores[i + 1] = np.einsum("ab,bnc->anc", carry, self.cores[i + 1])
        self.center = i + 1
        return discarded

    def shift_center_left(self, max_bond: int | None = None) -> float:
        i = self.center
        if i is None or i <= 0:
            raise ValueError("no center to shift or already at left edge")
        ml, nb, mr = self.cores[i].shape
        u, s, vt, discarded = _split_matrix(
            self.cores[i].reshape(ml, nb * mr), SVD_CUTOFF, max_bond
        )
        rank = s.size
        self.cores[i] = vt.reshape(rank, nb, mr)
        carry = u * s[None, :]
        self.cores[i - 1] = np.einsum("anb,bc->anc", self.cores[i - 1], carry)
        self.center = i - 1
        return discarded

    def canonicalize(self, center: int) -> "TensorTrain":
        """Return a gauge-equivalent train with the requested center."""
        if not 0 <= center < self.nsites:
            raise ValueError(f"center {center} out of range")
        out = self.copy()
        if out.center is None:
            # Right-to-left pass makes everything right-isometric (center 0).
            out.center = out.nsites - 1
            while out.center > 0:
                out.shift_center_left()
        while out.center < center:
            out.shift_center_right()
        while out.center > center:
            out.shift_center_left()
        return out

    # -- diagnostics -----------------------------------------------------

    def isometry_errors(self) -> list[float]:
        """Per-core deviation from the gauge expected around the center."""
        errs = []
        for i, core in enumerate(self.cores):
            ml, nb, mr = core.shape
            if self.center is not None and i < self.center:
                mat = core.reshape(ml * nb, mr)
                errs.append(float(np.linalg.norm(mat.T @ mat - np.eye(mr))))
            elif self.center is not None and i > self.center:
                mat = core.reshape(ml, nb * mr)
                errs.append(float(np.linalg.norm(mat @ mat.T - np.eye(ml))))
            else:
                errs.append(0.0)
        return errs
