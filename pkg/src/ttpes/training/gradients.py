"""Loss evaluation and closed-form gradients for the basis and the transform.

The loss is the mean over data points of half squared residuals on the
augmented rows (latent force components and energy together), i.e.
``L = (1/|D|) sum_p 0.5 * (pred_p - y_p)^2``.  Gradients are hand-derived:
the transform gradient collects the latent-coordinate path, the moving
feature-center path and the force-target path.
"""

from __future__ import annotations

import numpy as np

from ..model import ModelState, to_latent


def _hole_gradients(tt, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predictions and per-mode hole contractions.

    Returns ``(pred, holes)`` with pred (P,) and holes (P, f, N):
    ``holes[p, i]`` is the chain contraction with mode i's row removed, so
    ``pred = sum_rho rows[p, i, rho] * holes[p, i, rho]`` for every i.
    """
    nrows, nsites, nbasis = rows.shape
    mats = [np.einsum("pn,anc->pac", rows[:, i], tt.cores[i]) for i in range(nsites)]
    prefix = [np.ones((nrows, 1))]
    for i in range(nsites - 1):
        prefix.append(np.einsum("pa,pac->pc", prefix[-1], mats[i]))
    suffix = [np.ones((nrows, 1))]
    for i in range(nsites - 1, 0, -1):
        suffix.append(np.einsum("pac,pc->pa", mats[i], suffix[-1]))
    suffix.reverse()

    holes = np.empty_like(rows)
    for i in range(nsites):
        holes[:, i] = np.einsum(
            "pa,anc,pc->pn", prefix[i], tt.cores[i], suffix[i]
        )
    pred = np.einsum("pn,pn->p", rows[:, 0], holes[:, 0])
    return pred, holes


def compute_loss(model: ModelState, x, energies, forces):
    """(total, energy part, force part) of the mean half-squared-error loss."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    energies = np.asarray(energies, dtype=float)
    forces = np.atleast_2d(np.asarray(forces, dtype=float))

    pred_energy = model.evaluate(x)
    pred_latent_force = -model.latent_gradient(x)
    target_latent_force = forces @ model.transform

    npoints = x.shape[0]
    loss_energy = 0.5 * float(np.sum((pred_energy - energies) ** 2)) / npoints
    loss_force = (
        0.5 * float(np.sum((pred_latent_force - target_latent_force) ** 2)) / npoints
    )
    return loss_energy + loss_force, loss_energy, loss_force


def basis_grads(model: ModelState, x, energies, forces):
    """Exact loss gradients for (weights, biases, transform).

    Returns arrays shaped like ``model.basis.weights``, ``model.basis.biases``
    and ``model.transform``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    energies = np.asarray(energies, dtype=float)
    forces = np.atleast_2d(np.asarray(forces, dtype=float))
    npoints, ninputs = x.shape
    nmodes, nbasis = model.basis.weights.shape

    transform = model.transform
    weights = model.basis.weights
    centers = model.centers()
    reference = model.basis.reference_points

    q = to_latent(x, transform)
    plain, d1, d2 = model.basis.tables(q, centers, order=2)
    offset = q[:, :, None] - centers[None]  # dt/dw

    # Augmented rows and their parameter sensitivities, indexed [k, r, i, rho].
    nrows = npoints * (nmodes + 1)
    shape = (npoints, nmodes + 1, nmodes, nbasis)

    rows = np.broadcast_to(plain[:, None], shape).copy()
    dw = np.broadcast_to((d1 * offset)[:, None], shape).copy()  # d(row)/dw
    db = np.broadcast_to(d1[:, None], shape).copy()             # d(row)/db
    dt = np.broadcast_to((d1 * weights[None])[:, None], shape).copy()  # d(row)/dt * w

    deriv_row = -weights[None] * d1
    for r in range(nmodes):
        rows[:, r, r] = deriv_row[:, r]
        dw[:, r, r] = -(d1 + weights[None] * d2 * offset)[:, r]
        db[:, r, r] = -(weights[None] * d2)[:, r]
        dt[:, r, r] = -(weights[None] ** 2 * d2)[:, r]

    targets = np.empty((npoints, nmodes + 1))
    targets[:, :nmodes] = forces @ transform
    targets[:, nmodes] = energies

    pred, holes = _hole_gradients(model.tt, rows.reshape(nrows, nmodes, nbasis))
    resid = (pred - targets.reshape(-1)) / npoints
    eh = resid[:, None, None] * holes  # (P, f, N)

    grad_w = np.einsum("pir,pir->ir", eh, dw.reshape(nrows, nmodes, nbasis))
    grad_b = np.einsum("pir,pir->ir", eh, db.reshape(nrows, nmodes, nbasis))

    # Transform gradient, latent path: dt/dU[j, m] = w * (x_j - ref_j(rho)).
    s = eh * dt.reshape(nrows, nmodes, nbasis)  # (P, f, N)
    xk = np.repeat(x, nmodes + 1, axis=0)  # inputs per design row
    grad_t = np.einsum("pm,pj->jm", s.sum(axis=2), xk)
    grad_t -= np.einsum("pmr,rj->jm", s, reference)
    # Force-target path: y_(k, r) = (F @ U)_r for r < f.
    resid_mat = resid.reshape(npoints, nmodes + 1)
    grad_t -= np.einsum("kr,kj->jr", resid_mat[:, :nmodes], forces)

    return grad_w, grad_b, grad_t
