"""Force-and-energy augmented regression design and cached chain environments.

Each data point k expands into f+1 design rows indexed p = (k, r): rows
r < f substitute mode r's feature row by the negated derivative row (their
target is the r-th latent force component), and row r = f keeps all plain
rows (target: the energy).  Chain contractions of everything left/right of
the active site(s) are cached so local updates stay cheap during sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import ModelState, to_latent
from ..tensortrain import TensorTrain


@dataclass
class AugmentedDesign:
    """Flattened design rows and targets for the current basis parameters.

    Attributes:
        rows: (P, f, N) per-mode feature rows, P = npoints * (f + 1).
        targets: (P,) latent force components then energy, point-major.
        npoints: number of underlying data points.
    """

    rows: np.ndarray
    targets: np.ndarray
    npoints: int

    @property
    def nrows(self) -> int:
        return self.rows.shape[0]

    @property
    def nmodes(self) -> int:
        return self.rows.shape[1]


def build_augmented(model: ModelState, x, energies, forces) -> AugmentedDesign:
    """Assemble the augmented design for a batch under the current model.

    Must be rebuilt whenever the basis parameters or the transform change;
    the tensor train does not enter.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    energies = np.asarray(energies, dtype=float)
    forces = np.atleast_2d(np.asarray(forces, dtype=float))
    npoints = x.shape[0]
    nmodes = model.nmodes

    q = to_latent(x, model.transform)
    plain, d1 = model.basis.tables(q, model.centers(), order=1)
    deriv = model.basis.weights[None] * d1  # d(feature)/dq

    rows = np.broadcast_to(
        plain[:, None, :, :], (npoints, nmodes + 1, nmodes, plain.shape[2])
    ).copy()
    for r in range(nmodes):
        rows[:, r, r, :] = -deriv[:, r, :]

    targets = np.empty((npoints, nmodes + 1))
    targets[:, :nmodes] = forces @ model.transform
    targets[:, nmodes] = energies
    return AugmentedDesign(
        rows=rows.reshape(npoints * (nmodes + 1), nmodes, plain.shape[2]),
        targets=targets.reshape(-1),
        npoints=npoints,
    )


def _advance(block: np.ndarray, rows_i: np.ndarray, core: np.ndarray) -> np.ndarray:
    """left (P, Ml) x rows (P, N) x core (Ml, N, Mr) -> (P, Mr)."""
    mats = np.einsum("pn,anc->pac", rows_i, core)
    return np.einsum("pa,pac->pc", block, mats)


def _advance_right(block: np.ndarray, rows_i: np.ndarray, core: np.ndarray) -> np.ndarray:
    """rows (P, N) x core (Ml, N, Mr) x right (P, Mr) -> (P, Ml)."""
    mats = np.einsum("pn,anc->pac", rows_i, core)
    return np.einsum("pac,pc->pa", mats, block)


class EnvironmentCache:
    """Left/right partial contractions of design rows through the train.

    ``left(i)`` contracts sites 0..i-1, shape (P, M_{i-1}); ``right(j)``
    contracts sites j..f-1, shape (P, M_{j-1}).  Blocks are valid as long as
    the cores they cover keep their isometric gauge; the cache is rebuilt
    around the canonical center and advanced incrementally as it moves.
    """

    def __init__(self, design: AugmentedDesign, tt: TensorTrain, site: int, mode: str):
        if mode not in ("onedot", "twodot"):
            raise ValueError(f"unknown environment mode {mode!r}")
        if tt.center != site:
            raise ValueError(f"train center {tt.center} does not match site {site}")
        self.design = design
        self.tt = tt
        self.mode = mode
        self.site = site
        nrows = design.nrows
        self._left: list = [None] * (tt.nsites + 1)
        self._right: list = [None] * (tt.nsites + 1)
        self._left[0] = np.ones((nrows, 1))
        self._right[tt.nsites] = np.ones((nrows, 1))
        for i in range(site):
            self._left[i + 1] = _advance(
                self._left[i], design.rows[:, i], tt.cores[i]
            )
        first_right = site + (2 if mode == "twodot" else 1)
        for j in range(tt.nsites - 1, first_right - 1, -1):
            self._right[j] = _advance_right(
                self._right[j + 1], design.rows[:, j], tt.cores[j]
            )

    def left(self, i: int) -> np.ndarray:
        block = self._left[i]
        if block is None:
            raise ValueError(f"left block {i} is not valid at site {self.site}")
        return block

    def right(self, j: int) -> np.ndarray:
        block = self._right[j]
        if block is None:
            raise ValueError(f"right block {j} is not valid at site {self.site}")
        return block

    def move_right(self):
        """Advance after the center moved from ``site`` to ``site + 1``."""
        i = self.site
        self._left[i + 1] = _advance(
            self._left[i], self.design.rows[:, i], self.tt.cores[i]
        )
        self._right[i + (2 if self.mode == "twodot" else 1)] = None
        self.site = i + 1

    def move_left(self):
        """Advance after the center moved from ``site`` to ``site - 1``."""
        i = self.site
        # The rightmost core covered next is i+1 for two-dot pairs, i for one-dot.
        j = i + 1 if self.mode == "twodot" else i
        self._right[j] = _advance_right(
            self._right[j + 1], self.design.rows[:, j], self.tt.cores[j]
        )
        self._left[i] = None
        self.site = i - 1

    def recompute(self, i: int, side: str) -> np.ndarray:
        """From-scratch block for consistency checks."""
        nrows = self.design.nrows
        if side == "left":
            block = np.ones((nrows, 1))
            for s in range(i):
                block = _advance(block, self.design.rows[:, s], self.tt.cores[s])
        else:
            block = np.ones((nrows, 1))
            for s in range(self.tt.nsites - 1, i - 1, -1):
                block = _advance_right(block, self.design.rows[:, s], self.tt.cores[s])
        return block
