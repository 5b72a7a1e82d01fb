"""Sweeping optimizer: alternating basis updates and local train solves.

A sweep is one full left-to-right-to-left pass of local least-squares
updates along the chain, moving the canonical center by SVD gauge moves and
updating environments incrementally.  The fit driver interleaves mini-batch
Adam epochs on the basis parameters (with Riemannian steps on the transform)
with periodic sweeps, following a configurable phase schedule.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import NumericalError
from ..model import ModelState
from .design import AugmentedDesign, EnvironmentCache, build_augmented
from .gradients import basis_grads, compute_loss
from .optimizers import AdamState, adam_step, stiefel_step
from .updates import (
    LocalProblem,
    onedot_problem,
    solve_core_cg,
    truncate_split,
    twodot_problem,
    update_core_grad,
)

TIKHONOV_RETRY_SCALE = 1e-10


@dataclass
class Phase:
    """One schedule segment of the fit loop.

    Attributes:
        name: label recorded in the trace.
        epochs: number of epochs this phase runs (each epoch is one pass over
            the mini-batches, plus a sweep when due).
        train_basis / train_transform: enable Adam on (w, b) / the transform.
        minibatches: mini-batch count for the basis epochs.
        sweep_every: run a sweep every this many epochs (0 disables).
        sweep_kind: "onedot" or "twodot".
        solver: "cg" or "grad" local updates.
        cg_eps_rel: CG stopping threshold relative to the target norm.
        cg_kmax: CG iteration cap (default 2x the local unknown count).
        max_bond: bond cap for two-dot growth; once reached, sweeps switch
            to one-dot form.
        converge_tol: stop the phase early when the relative loss change
            between consecutive epochs drops below this.
    """

    name: str
    epochs: int
    train_basis: bool = True
    train_transform: bool = True
    minibatches: int = 5
    sweep_every: int = 0
    sweep_kind: str = "onedot"
    solver: str = "cg"
    cg_eps_rel: float = 1e-6
    cg_kmax: int | None = None
    max_bond: int | None = None
    converge_tol: float | None = None


@dataclass
class SweepPlan:
    """Ordered phases plus learning rates and checkpoint cadence."""

    phases: list
    lr_basis: float = 1e-3
    lr_transform: float = 1e-3
    checkpoint_every: int = 500

    def __post_init__(self):
        for phase in self.phases:
            if phase.epochs < 0:
                raise ValueError("phase epochs must be non-negative")
            if phase.sweep_kind not in ("onedot", "twodot"):
                raise ValueError(f"unknown sweep kind {phase.sweep_kind!r}")
            if phase.solver not in ("cg", "grad"):
                raise ValueError(f"unknown solver {phase.solver!r}")

    @property
    def total_epochs(self) -> int:
        return sum(p.epochs for p in self.phases)


def paper_schedule(
    max_bond: int,
    warmup_epochs: int = 1000,
    warmup_period: int = 50,
    growth_epochs: int = 15000,
    growth_period: int = 500,
    refine_sweeps: int = 50,
    minibatches: int = 5,
    refine_tol: float = 1e-12,
) -> SweepPlan:
    """Three-phase schedule: warm-up, periodic two-dot growth, CG refinement.

    Defaults mirror the published run: 1000 warm-up epochs alternating basis
    Adam with one-dot sweeps, two-dot sweeps every 500 epochs until 16000
    (switching to one-dot at the bond cap), then frozen-basis one-dot CG
    sweeps until tight convergence.
    """
    return SweepPlan(
        phases=[
            Phase(
                name="warmup",
                epochs=warmup_epochs,
                sweep_every=warmup_period,
                sweep_kind="onedot",
                solver="cg",
                cg_eps_rel=1e-6,
                minibatches=minibatches,
            ),
            Phase(
                name="growth",
                epochs=growth_epochs,
                sweep_every=growth_period,
                sweep_kind="twodot",
                solver="cg",
                cg_eps_rel=1e-6,
                max_bond=max_bond,
                minibatches=minibatches,
            ),
            Phase(
                name="refine",
                epochs=refine_sweeps,
                train_basis=False,
                train_transform=False,
                sweep_every=1,
                sweep_kind="onedot",
                solver="cg",
                cg_eps_rel=1e-10,
                converge_tol=refine_tol,
            ),
        ]
    )


def _solve_local(problem: LocalProblem, initial, phase_like) -> np.ndarray:
    """CG solve with a Tikhonov retry on ill-conditioning."""
    eps = phase_like.cg_eps_rel * float(np.linalg.norm(problem.targets))
    k_max = phase_like.cg_kmax
    try:
        return solve_core_cg(problem, initial, k_max=k_max, eps=eps).core
    except NumericalError:
        lam = TIKHONOV_RETRY_SCALE * problem.normal_trace_scale()
        return solve_core_cg(problem, initial, k_max=k_max, eps=eps, tikhonov=lam).core


def sweep(
    model: ModelState,
    design: AugmentedDesign,
    phase: Phase,
    lr: float = 1e-3,
    kind: str | None = None,
) -> dict:
    """One full left-right-left pass of local updates; mutates the train.

    The train must be canonical at site 0.  Returns diagnostics: per-site
    losses after each update (on the sweep's own design) and the discarded
    singular weight of every two-dot split.
    """
    tt = model.tt
    if tt.center != 0:
        raise ValueError("sweep requires the train canonical at site 0")
    kind = kind or phase.sweep_kind
    nsites = tt.nsites
    npoints = design.npoints
    targets = design.targets
    site_losses: list[float] = []
    discarded: list[float] = []
    grad_states: dict = {}

    def record(problem, core):
        resid = problem.predict(core) - targets
        site_losses.append(0.5 * float(np.sum(resid**2)) / npoints)

    def local_update(problem, initial, key):
        if phase.solver == "cg":
            return _solve_local(problem, initial, phase)
        state = grad_states.setdefault(key, AdamState.like(np.asarray(initial)))
        return update_core_grad(problem, np.asarray(initial), state, lr, npoints)

    if kind == "twodot" and nsites >= 2:
        cache = EnvironmentCache(design, tt, 0, "twodot")
        for i in range(nsites - 1):  # left to right
            problem = twodot_problem(cache, i, targets)
            merged = np.einsum("anb,bmc->anmc", tt.cores[i], tt.cores[i + 1])
            merged = local_update(problem, merged, ("L", i))
            record(problem, merged)
            left, right, drop = truncate_split(merged, phase.max_bond, "right")
            tt.cores[i], tt.cores[i + 1] = left, right
            tt.center = i + 1
            discarded.append(drop)
            if i < nsites - 2:
                cache.move_right()
        for i in range(nsites - 2, -1, -1):  # right to left
            problem = twodot_problem(cache, i, targets)
            merged = np.einsum("anb,bmc->anmc", tt.cores[i], tt.cores[i + 1])
            merged = local_update(problem, merged, ("R", i))
            record(problem, merged)
            left, right, drop = truncate_split(merged, phase.max_bond, "left")
            tt.cores[i], tt.cores[i + 1] = left, right
            tt.center = i
            discarded.append(drop)
            if i > 0:
                cache.move_left()
    else:
        cache = EnvironmentCache(design, tt, 0, "onedot")
        for i in range(nsites):  # left to right
            problem = onedot_problem(cache, i, targets)
            core = local_update(problem, tt.cores[i], ("L", i))
            tt.cores[i] = core
            record(problem, core)
            if i < nsites - 1:
                tt.shift_center_right()
                cache.move_right()
        for i in range(nsites - 1, -1, -1):  # right to left
            problem = onedot_problem(cache, i, targets)
            core = local_update(problem, tt.cores[i], ("R", i))
            tt.cores[i] = core
            record(problem, core)
            if i > 0:
                tt.shift_center_left()
                cache.move_left()

    return {"site_losses": site_losses, "discarded_weight": discarded}


@dataclass
class TraceRow:
    epoch: int
    loss: float
    loss_energy: float
    loss_force: float
    val_rmse: float
    max_bond: int
    phase: str
    seconds: float


TRACE_HEADER = "epoch,loss,loss_energy,loss_force,val_rmse,max_bond,phase,seconds"


@dataclass
class TrainTrace:
    """Append-only per-epoch training record."""

    rows: list = field(default_factory=list)

    def append(self, row: TraceRow):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path) -> None:
        lines = [TRACE_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.epoch},{float(r.loss)!r},{float(r.loss_energy)!r},"
                f"{float(r.loss_force)!r},{float(r.val_rmse)!r},{r.max_bond},"
                f"{r.phase},{float(r.seconds)!r}"
            )
        Path(path).write_text("\n".join(lines) + "\n")


def fit(
    model: ModelState,
    dataset,
    plan: SweepPlan,
    seed: int = 0,
    checkpoint_fn=None,
) -> tuple[ModelState, TrainTrace]:
    """Run the phase schedule on a dataset with train/validation splits.

    The input model is left untouched; the trained copy and the per-epoch
    trace are returned.  Everything stochastic derives from ``seed``, so two
    runs with identical inputs produce identical parameters and trace values.

    Raises:
        NumericalError: on a non-finite loss (after writing a final
            checkpoint through ``checkpoint_fn`` when provided).
    """
    x_train, e_train, f_train = dataset.split("train")
    if x_train.shape[0] == 0:
        raise ValueError("empty training split")
    try:
        x_val, e_val, _ = dataset.split("validation")
    except KeyError:
        x_val = np.zeros((0, x_train.shape[1]))
        e_val = np.zeros(0)

    model = model.copy()
    rng = np.random.default_rng(seed)
    state_w = AdamState.like(model.basis.weights)
    state_b = AdamState.like(model.basis.biases)
    state_t = AdamState.like(model.transform)
    trace = TrainTrace()
    epoch = 0

    for phase in plan.phases:
        previous_loss = None
        for _ in range(phase.epochs):
            epoch += 1
            started = time.perf_counter()

            if phase.train_basis or phase.train_transform:
                order = rng.permutation(x_train.shape[0])
                for idx in np.array_split(order, max(1, phase.minibatches)):
                    if idx.size == 0:
                        continue
                    grad_w, grad_b, grad_t = basis_grads(
                        model, x_train[idx], e_train[idx], f_train[idx]
                    )
                    if not (
                        np.all(np.isfinite(grad_w))
                        and np.all(np.isfinite(grad_b))
                        and np.all(np.isfinite(grad_t))
                    ):
                        if checkpoint_fn is not None:
                            checkpoint_fn(epoch, model)
                        raise NumericalError(
                            f"non-finite loss gradient at epoch {epoch} "
                            f"(phase {phase.name!r}); last checkpoint dumped"
                        )
                    if phase.train_basis:
                        model.basis.weights = adam_step(
                            model.basis.weights, grad_w, state_w, plan.lr_basis
                        )
                        model.basis.biases = adam_step(
                            model.basis.biases, grad_b, state_b, plan.lr_basis
                        )
                    if phase.train_transform:
                        model.transform = stiefel_step(
                            model.transform, grad_t, state_t, plan.lr_transform
                        )

            if phase.sweep_every and epoch % phase.sweep_every == 0:
                design = build_augmented(model, x_train, e_train, f_train)
                model.tt = model.tt.canonicalize(0)
                kind = phase.sweep_kind
                if (
                    kind == "twodot"
                    and phase.max_bond is not None
                    and model.tt.max_bond >= phase.max_bond
                ):
                    kind = "onedot"
                sweep(model, design, phase, lr=plan.lr_basis, kind=kind)

            loss, loss_energy, loss_force = compute_loss(
                model, x_train, e_train, f_train
            )
            if not np.isfinite(loss):
                if checkpoint_fn is not None:
                    checkpoint_fn(epoch, model)
                raise NumericalError(
                    f"non-finite loss at epoch {epoch} (phase {phase.name!r}); "
                    "last checkpoint dumped"
                )
            if x_val.shape[0]:
                val_rmse = float(
                    np.sqrt(np.mean((model.evaluate(x_val) - e_val) ** 2))
                )
            else:
                val_rmse = float("nan")
            trace.append(
                TraceRow(
                    epoch=epoch,
                    loss=loss,
                    loss_energy=loss_energy,
                    loss_force=loss_force,
                    val_rmse=val_rmse,
                    max_bond=model.tt.max_bond,
                    phase=phase.name,
                    seconds=time.perf_counter() - started,
                )
            )
            if checkpoint_fn is not None and epoch % plan.checkpoint_every == 0:
                checkpoint_fn(epoch, model)

            if (
                phase.converge_tol is not None
                and previous_loss is not None
                and abs(previous_loss - loss)
                <= phase.converge_tol * max(abs(previous_loss), 1e-300)
            ):
                break
            previous_loss = loss

    return model, trace
