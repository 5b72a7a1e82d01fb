"""Training: loss gradients, Riemannian updates, and DMRG-style sweeps."""

from .design import AugmentedDesign, EnvironmentCache, build_augmented
from .gradients import basis_grads, compute_loss
from .optimizers import AdamState, adam_step, qr_retract, stiefel_step, tangent_project
from .sweep import Phase, SweepPlan, TrainTrace, fit, paper_schedule, sweep
from .updates import (
    CgResult,
    LocalProblem,
    onedot_problem,
    solve_core_cg,
    truncate_split,
    twodot_problem,
    update_core_grad,
)

__all__ = [
    "AdamState",
    "AugmentedDesign",
    "CgResult",
    "EnvironmentCache",
    "LocalProblem",
    "Phase",
    "SweepPlan",
    "TrainTrace",
    "adam_step",
    "basis_grads",
    "build_augmented",
    "compute_loss",
    "fit",
    "onedot_problem",
    "paper_schedule",
    "qr_retract",
    "solve_core_cg",
    "stiefel_step",
    "sweep",
    "tangent_project",
    "truncate_split",
    "twodot_problem",
    "update_core_grad",
]
