"""Adam updates, plus the Riemannian variant for the orthonormal transform."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import NumericalError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter tensor."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def like(cls, params: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(params), v=np.zeros_like(params))


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> np.ndarray:
    """One Adam update; mutates the state, returns the new parameters."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter, gradient and moment shapes disagree")
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grads
    state.v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = state.m / (1.0 - beta1**state.step)
    v_hat = state.v / (1.0 - beta2**state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps)


def tangent_project(transform: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Project a Euclidean gradient onto the tangent space at the transform.

    For column-orthonormal U the tangent projection is
    ``G - U * sym(U' G)`` with sym(A) = (A + A') / 2.
    """
    inner = transform.T @ grad
    return grad - transform @ ((inner + inner.T) / 2.0)


def qr_retract(mat: np.ndarray) -> np.ndarray:
    """Map a full-rank matrix to orthonormal columns via sign-fixed QR.

    The R diagonal is made positive so the retraction is a continuous,
    deterministic function; a zero diagonal signals a rank-deficient input.
    """
    q, r = np.linalg.qr(mat)
    diag = np.diag(r)
    if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
        raise NumericalError("retraction input is rank deficient")
    return q * np.sign(diag)[None, :]


def stiefel_step(
    transform: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> np.ndarray:
    """Riemannian Adam: tangent-projected gradient, moments, QR retraction."""
    tangent = tangent_project(transform, grad)
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * tangent
    state.v = beta2 * state.v + (1.0 - beta2) * tangent * tangent
    m_hat = state.m / (1.0 - beta1**state.step)
    v_hat = state.v / (1.0 - beta2**state.step)
    direction = m_hat / (np.sqrt(v_hat) + eps)
    return qr_retract(transform - lr * tangent_project(transform, direction))
