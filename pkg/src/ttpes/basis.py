"""Per-mode feature functions of the tensor-product potential model.

Each latent mode carries ``N`` scalar functions evaluated at an affine
argument ``t = w * (q - center) + b``.  The default family is one constant
channel, squashed Gaussians on the low indices and smooth ramps on the
high indices; individual entries can be overridden with explicit one-mode
functions (used for exact sum-of-products encodings).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .exceptions import SchemaError

EPSILON = 0.05

# Kind codes stored per (mode, index) entry.
KIND_CONSTANT = 0
KIND_SQUASH_GAUSSIAN = 1
KIND_SMOOTH_RAMP = 2
KIND_CUSTOM = 3

_KIND_NAMES = {
    KIND_CONSTANT: "constant",
    KIND_SQUASH_GAUSSIAN: "squash-gaussian",
    KIND_SMOOTH_RAMP: "smooth-ramp",
    KIND_CUSTOM: "custom",
}
_KIND_CODES = {name: code for code, name in _KIND_NAMES.items()}

# Exponent clamp: keeps np.exp finite; the clamped region lies far outside
# any physically sampled domain.
_EXP_CLAMP = 700.0


def _exp_neg_sq(t):
    return np.exp(-np.minimum(t * t, _EXP_CLAMP))


def squash_gaussian(t):
    """1 - exp(-t^2) + EPSILON * t^2, a Gaussian well with quadratic growth."""
    return 1.0 - _exp_neg_sq(t) + EPSILON * t * t


def squash_gaussian_d1(t):
    e = _exp_neg_sq(t)
    return 2.0 * t * e + 2.0 * EPSILON * t


def squash_gaussian_d2(t):
    e = _exp_neg_sq(t)
    return (2.0 - 4.0 * t * t) * e + 2.0 * EPSILON


def smooth_ramp(t):
    """t * sigmoid(t), linear for large positive t and ~0 for large negative t."""
    return t * expit(t)


def smooth_ramp_d1(t):
    s = expit(t)
    return s * (1.0 + t * (1.0 - s))


def smooth_ramp_d2(t):
    s = expit(t)
    return s * (1.0 - s) * (2.0 + t * (1.0 - 2.0 * s))


@dataclass(frozen=True)
class Monomial:
    """x**power with analytic derivatives."""

    power: int

    def value(self, x):
        return np.asarray(x, dtype=float) ** self.power

    def d1(self, x):
        if self.power == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.power * np.asarray(x, dtype=float) ** (self.power - 1)

    def d2(self, x):
        if self.power <= 1:
            return np.zeros_like(np.asarray(x, dtype=float))
        k = self.power
        return k * (k - 1) * np.asarray(x, dtype=float) ** (k - 2)


@dataclass(frozen=True)
class GaussianFactor:
    """exp(-alpha * (x - center)^2)."""

    alpha: float
    center: float = 0.0

    def value(self, x):
        u = np.asarray(x, dtype=float) - self.center
        return np.exp(-np.minimum(self.alpha * u * u, _EXP_CLAMP))

    def d1(self, x):
        u = np.asarray(x, dtype=float) - self.center
        return -2.0 * self.alpha * u * self.value(x)

    def d2(self, x):
        u = np.asarray(x, dtype=float) - self.center
        return (4.0 * self.alpha**2 * u * u - 2.0 * self.alpha) * self.value(x)


@dataclass(frozen=True)
class MorseFactor:
    """1 - exp(-rate * x), the Morse-type dissociative factor."""

    rate: float

    def _exp(self, x):
        return np.exp(np.clip(-self.rate * np.asarray(x, dtype=float), -_EXP_CLAMP, _EXP_CLAMP))

    def value(self, x):
        return 1.0 - self._exp(x)

    def d1(self, x):
        return self.rate * self._exp(x)

    def d2(self, x):
        return -self.rate**2 * self._exp(x)


_FACTOR_TYPES = {
    "monomial": Monomial,
    "gaussian": GaussianFactor,
    "morse": MorseFactor,
}


def factor_to_spec(fn) -> dict:
    """Serialize a one-mode factor to a plain dict."""
    for name, cls in _FACTOR_TYPES.items():
        if isinstance(fn, cls):
            spec = {"type": name}
            spec.update({k: getattr(fn, k) for k in fn.__dataclass_fields__})
            return spec
    raise SchemaError(f"unknown one-mode factor {fn!r}")


def factor_from_spec(spec: dict):
    kind = spec.get("type")
    if kind not in _FACTOR_TYPES:
        raise SchemaError(f"unknown one-mode factor type {kind!r}")
    kwargs = {k: v for k, v in spec.items() if k != "type"}
    return _FACTOR_TYPES[kind](**kwargs)


def standard_kind_layout(nbasis: int) -> np.ndarray:
    """Kind codes for one mode: constant, squashed Gaussians, smooth ramps.

    Index 0 is the constant channel; indices up to ceil(N/2)-1 (0-based) are
    squashed Gaussians and the remainder smooth ramps.  For ``nbasis == 1``
    only the constant survives.
    """
    kinds = np.full(nbasis, KIND_SMOOTH_RAMP, dtype=np.int8)
    half = -(-nbasis // 2)  # ceil(N/2)
    kinds[:half] = KIND_SQUASH_GAUSSIAN
    kinds[0] = KIND_CONSTANT
    return kinds


@dataclass
class BasisFamily:
    """Per-mode feature functions with trainable scales and offsets.

    Attributes:
        kinds: (f, N) int8 kind codes.
        weights: (f, N) argument scales ``w``.
        biases: (f, N) argument offsets ``b``.
        reference_points: (N, n) rows drawn from the training inputs; the
            mode-i center of entry rho is the i-th latent coordinate of row
            rho.  Immutable after initialization.
        custom: explicit one-mode functions keyed by (mode, index); these
            entries ignore the kind table's standard shapes.
    """

    kinds: np.ndarray
    weights: np.ndarray
    biases: np.ndarray
    reference_points: np.ndarray
    custom: dict = field(default_factory=dict)

    @property
    def nmodes(self) -> int:
        return self.kinds.shape[0]

    @property
    def size(self) -> int:
        return self.kinds.shape[1]

    @classmethod
    def standard(cls, nmodes: int, nbasis: int, reference_points: np.ndarray) -> "BasisFamily":
        """Default family: unit scales, zero offsets, data-drawn centers."""
        reference_points = np.asarray(reference_points, dtype=float)
        if reference_points.shape[0] != nbasis:
            raise ValueError(
                f"need {nbasis} reference points, got {reference_points.shape[0]}"
            )
        kinds = np.tile(standard_kind_layout(nbasis), (nmodes, 1))
        return cls(
            kinds=kinds,
            weights=np.ones((nmodes, nbasis)),
            biases=np.zeros((nmodes, nbasis)),
            reference_points=reference_points,
        )

    def centers(self, transform: np.ndarray) -> np.ndarray:
        """(f, N) per-mode centers: latent projections of the reference points."""
        return (self.reference_points @ transform).T

    def tables(self, q: np.ndarray, centers: np.ndarray, order: int = 0):
        """Evaluate the family and its argument derivatives on a batch.

        Args:
            q: (B, f) latent coordinates.
            centers: (f, N) per-mode centers, from :meth:`centers`.
            order: highest derivative order w.r.t. the affine argument t.

        Returns:
            Tuple of ``order + 1`` arrays of shape (B, f, N): function values
            and, when requested, first and second derivatives in t.  The
            derivative in q of entry (i, rho) is ``weights[i, rho]`` times the
            t-derivative.
        """
        q = np.asarray(q, dtype=float)
        t = self.weights[None] * (q[:, :, None] - centers[None]) + self.biases[None]
        out = [np.empty_like(t) for _ in range(order + 1)]

        for code, funcs in (
            (KIND_CONSTANT, (np.ones_like, np.zeros_like, np.zeros_like)),
            (KIND_SQUASH_GAUSSIAN, (squash_gaussian, squash_gaussian_d1, squash_gaussian_d2)),
            (KIND_SMOOTH_RAMP, (smooth_ramp, smooth_ramp_d1, smooth_ramp_d2)),
        ):
            mask = self.kinds == code
            if not mask.any():
                continue
            tm = t[:, mask]
            for d in range(order + 1):
                out[d][:, mask] = funcs[d](tm)

        for (i, rho), fn in self.custom.items():
            ts = t[:, i, rho]
            out[0][:, i, rho] = fn.value(ts)
            if order >= 1:
                out[1][:, i, rho] = fn.d1(ts)
            if order >= 2:
                out[2][:, i, rho] = fn.d2(ts)

        return tuple(out)

    def copy(self) -> "BasisFamily":
        return BasisFamily(
            kinds=self.kinds.copy(),
            weights=self.weights.copy(),
            biases=self.biases.copy(),
            reference_points=self.reference_points.copy(),
            custom=dict(self.custom),
        )


def kind_name(code: int) -> str:
    return _KIND_NAMES[int(code)]


def kind_code(name: str) -> int:
    if name not in _KIND_CODES:
        raise SchemaError(f"unknown basis kind {name!r}")
    return _KIND_CODES[name]


def draw_reference_points(
    samples: np.ndarray, nbasis: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw basis reference points from the training inputs.

    Sampling is without replacement; when fewer than ``nbasis`` samples are
    available it falls back to sampling with replacement.
    """
    samples = np.asarray(samples, dtype=float)
    replace = samples.shape[0] < nbasis
    idx = rng.choice(samples.shape[0], size=nbasis, replace=replace)
    return samples[idx].copy()
