"""Local tensor-train core solvers for the sweeping optimizer.

Both the two-dot (merged pair, allows bond growth) and one-dot (single core)
problems are linear least squares in the local unknowns.  The conjugate
gradient path applies the normal-equation operator implicitly from the cached
environment blocks and feature rows, never materializing the Hessian or the
full local design; the gradient path takes one Adam step on the residual
contraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import NumericalError
from .optimizers import AdamState, adam_step


@dataclass
class LocalProblem:
    """Implicit least-squares problem for one or two active cores.

    ``predict(core)`` maps the local unknowns to per-row predictions and
    ``adjoint(values)`` applies the transpose; together they give the
    normal-equation operator without storing anything larger than the
    environment blocks themselves.
    """

    left: np.ndarray          # (P, Ml)
    rows_i: np.ndarray        # (P, N)
    rows_j: np.ndarray | None  # (P, N) for two-dot, None for one-dot
    right: np.ndarray         # (P, Mr)
    targets: np.ndarray       # (P,)

    def __post_init__(self):
        # (P, Ml * N) and (P, N * Mr) Khatri-Rao factors: the largest arrays
        # this solver ever holds.
        lf = np.einsum("pa,pn->pan", self.left, self.rows_i)
        self._lf = lf.reshape(lf.shape[0], -1)
        if self.rows_j is None:
            self._rf = self.right
        else:
            rf = np.einsum("pm,pc->pmc", self.rows_j, self.right)
            self._rf = rf.reshape(rf.shape[0], -1)

    @property
    def shape(self) -> tuple:
        if self.rows_j is None:
            return (self.left.shape[1], self.rows_i.shape[1], self.right.shape[1])
        return (
            self.left.shape[1],
            self.rows_i.shape[1],
            self.rows_j.shape[1],
            self.right.shape[1],
        )

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def predict(self, core: np.ndarray) -> np.ndarray:
        mat = core.reshape(self._lf.shape[1], self._rf.shape[1])
        return np.einsum("pb,pb->p", self._lf @ mat, self._rf)

    def adjoint(self, values: np.ndarray) -> np.ndarray:
        return (self._lf.T @ (values[:, None] * self._rf)).reshape(self.shape)

    def normal_apply(self, core: np.ndarray, tikhonov: float = 0.0) -> np.ndarray:
        out = self.adjoint(self.predict(core))
        if tikhonov:
            out = out + tikhonov * core
        return out

    def rhs(self) -> np.ndarray:
        return self.adjoint(self.targets)

    def normal_trace_scale(self) -> float:
        """Average diagonal of the normal operator, for Tikhonov scaling."""
        trace = float(np.sum((self._lf**2).sum(axis=1) * (self._rf**2).sum(axis=1)))
        return trace / self.size

    def dense_design(self) -> np.ndarray:
        """Materialized (P, size) design matrix; test/oracle use only."""
        return np.einsum("pa,pb->pab", self._lf, self._rf).reshape(
            self._lf.shape[0], -1
        )


def onedot_problem(cache, site: int, targets: np.ndarray) -> LocalProblem:
    return LocalProblem(
        left=cache.left(site),
        rows_i=cache.design.rows[:, site],
        rows_j=None,
        right=cache.right(site + 1),
        targets=targets,
    )


def twodot_problem(cache, site: int, targets: np.ndarray) -> LocalProblem:
    return LocalProblem(
        left=cache.left(site),
        rows_i=cache.design.rows[:, site],
        rows_j=cache.design.rows[:, site + 1],
        right=cache.right(site + 2),
        targets=targets,
    )


@dataclass
class CgResult:
    core: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


def solve_core_cg(
    problem: LocalProblem,
    initial: np.ndarray,
    k_max: int | None = None,
    eps: float = 0.0,
    tikhonov: float = 0.0,
) -> CgResult:
    """Conjugate gradient on the implicit normal equations.

    Starting from ``initial``, iterates until the normal-equation residual
    norm drops below ``eps`` or ``k_max`` iterations elapse.  Every iterate
    weakly decreases the quadratic objective, so early stopping is safe.
    The default cap is 8x the unknown count: rounding breaks CG's exact
    n-step termination once the normal operator is badly conditioned.

    Raises:
        NumericalError: on non-finite residuals or curvature (the caller may
            retry with a Tikhonov term).
    """
    if k_max is None:
        k_max = 8 * problem.size
    core = np.asarray(initial, dtype=float).copy()
    resid = problem.rhs() - problem.normal_apply(core, tikhonov)
    resid_sq = float(np.vdot(resid, resid))
    if not np.isfinite(resid_sq):
        raise NumericalError("non-finite residual entering CG")
    if np.sqrt(resid_sq) <= eps:
        return CgResult(core, 0, float(np.sqrt(resid_sq)), True)
    direction = resid.copy()
    iterations = 0
    for _ in range(k_max):
        applied = problem.normal_apply(direction, tikhonov)
        curvature = float(np.vdot(direction, applied))
        if not np.isfinite(curvature) or curvature <= 0.0:
            raise NumericalError(
                f"CG curvature {curvature!r} signals an ill-conditioned problem"
            )
        alpha = resid_sq / curvature
        core += alpha * direction
        resid -= alpha * applied
        new_sq = float(np.vdot(resid, resid))
        iterations += 1
        if not np.isfinite(new_sq):
            raise NumericalError("non-finite residual during CG")
        if np.sqrt(new_sq) <= eps:
            return CgResult(core, iterations, float(np.sqrt(new_sq)), True)
        direction = resid + (new_sq / resid_sq) * direction
        resid_sq = new_sq
    return CgResult(core, iterations, float(np.sqrt(resid_sq)), False)


def update_core_grad(
    problem: LocalProblem,
    core: np.ndarray,
    state: AdamState,
    lr: float,
    npoints: int,
) -> np.ndarray:
    """One Adam step on the local least-squares gradient.

    ``npoints`` is the underlying data-point count |D| normalizing the loss
    (the row count is |D| * (f + 1)).
    """
    resid = problem.predict(core) - problem.targets
    grad = problem.adjoint(resid) / npoints
    return adam_step(core, grad, state, lr)


def truncate_split(
    merged: np.ndarray,
    max_bond: int | None,
    direction: str,
    cutoff: float = 1e-14,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Split a two-dot core by SVD, truncating to ``max_bond``.

    The singular factor moves toward the next sweep target: for direction
    ``"right"`` the left core becomes left-isometric and the right core the
    new center, and vice versa.  Returns both cores and the discarded
    singular weight (sum of dropped squared singular values).
    """
    ml, nb, nb2, mr = merged.shape
    mat = merged.reshape(ml * nb, nb2 * mr)
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    if s[0] > 0.0:
        rank = max(1, int(np.count_nonzero(s > cutoff * s[0])))
    else:
        rank = 1
    if max_bond is not None:
        rank = min(rank, max_bond)
    discarded = float(np.sum(s[rank:] ** 2))
    if direction == "right":
        core_left = u[:, :rank].reshape(ml, nb, rank)
        core_right = (s[:rank, None] * vt[:rank]).reshape(rank, nb2, mr)
    elif direction == "left":
        core_left = (u[:, :rank] * s[:rank][None, :]).reshape(ml, nb, rank)
        core_right = vt[:rank].reshape(rank, nb2, mr)
    else:
        raise ValueError(f"unknown split direction {direction!r}")
    return core_left, core_right, discarded
