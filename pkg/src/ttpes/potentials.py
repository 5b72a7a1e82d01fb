"""Analytic model potentials in sum-of-products form with exact forces."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .basis import GaussianFactor, Monomial, MorseFactor, factor_from_spec, factor_to_spec


@dataclass(frozen=True)
class SopTerm:
    """One product term: coefficient times one-mode factors on selected modes."""

    coefficient: float
    factors: tuple  # tuple of (mode, factor) pairs, modes strictly increasing

    @property
    def modes(self):
        return tuple(mode for mode, _ in self.factors)


class SopPotential:
    """Sum of products of one-mode functions, optionally behind a rotation.

    Energies are evaluated as ``V(x) = sum_s c_s * prod_i g_si(y_i)`` with
    ``y = x @ rotation`` (identity when no rotation is given).  Every factor
    carries analytic first and second derivatives, so forces and Hessians are
    exact.

    Args:
        nmodes: number of input coordinates.
        terms: list of (coefficient, {mode: factor}) pairs.
        rotation: optional orthogonal (nmodes, nmodes) input rotation.
        label: identifier recorded in dataset provenance.
    """

    def __init__(self, nmodes, terms, rotation=None, label="sop"):
        self.nmodes = int(nmodes)
        self.terms = []
        for coef, factors in terms:
            pairs = tuple(sorted(factors.items()))
            for mode, _ in pairs:
                if not 0 <= mode < self.nmodes:
                    raise ValueError(f"term factor on undeclared mode {mode}")
            self.terms.append(SopTerm(float(coef), pairs))
        if rotation is not None:
            rotation = np.asarray(rotation, dtype=float)
            err = np.linalg.norm(rotation.T @ rotation - np.eye(self.nmodes))
            if err > 1e-10:
                raise ValueError(f"rotation is not orthogonal (error {err:.2e})")
        self.rotation = rotation
        self.label = label

    # -- evaluation ------------------------------------------------------

    def _latent(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.nmodes:
            raise ValueError(f"expected {self.nmodes} coordinates, got {x.shape[1]}")
        return x @ self.rotation if self.rotation is not None else x

    def energy(self, x):
        """Potential values; accepts a single point (n,) or a batch (B, n)."""
        single = np.asarray(x).ndim == 1
        y = self._latent(x)
        out = np.zeros(y.shape[0])
        for term in self.terms:
            prod = np.full(y.shape[0], term.coefficient)
            for mode, fn in term.factors:
                prod *= fn.value(y[:, mode])
            out += prod
        return out[0] if single else out

    def forces(self, x):
        """Analytic forces -dV/dx, matching the input's batch shape."""
        single = np.asarray(x).ndim == 1
        y = self._latent(x)
        grad = np.zeros_like(y)
        for term in self.terms:
            vals = {mode: fn.value(y[:, mode]) for mode, fn in term.factors}
            for mode, fn in term.factors:
                prod = np.full(y.shape[0], term.coefficient)
                for other, _ in term.factors:
                    prod *= fn.d1(y[:, mode]) if other == mode else vals[other]
                grad[:, mode] += prod
        if self.rotation is not None:
            grad = grad @ self.rotation.T
        forces = -grad
        return forces[0] if single else forces

    def hessian(self, x):
        """Analytic (n, n) second-derivative matrix at a single point."""
        y = self._latent(x)[0]
        hess = np.zeros((self.nmodes, self.nmodes))
        for term in self.terms:
            vals = {mode: float(fn.value(y[mode])) for mode, fn in term.factors}
            d1 = {mode: float(fn.d1(y[mode])) for mode, fn in term.factors}
            d2 = {mode: float(fn.d2(y[mode])) for mode, fn in term.factors}
            modes = term.modes
            for a in modes:
                rest = term.coefficient
                for m in modes:
                    if m != a:
                        rest *= vals[m]
                hess[a, a] += d2[a] * rest
            for a, b in itertools.combinations(modes, 2):
                rest = term.coefficient
                for m in modes:
                    if m not in (a, b):
                        rest *= vals[m]
                hess[a, b] += d1[a] * d1[b] * rest
                hess[b, a] += d1[a] * d1[b] * rest
        if self.rotation is not None:
            hess = self.rotation @ hess @ self.rotation.T
        return hess

    def harmonic_frequencies(self):
        """Normal-mode frequencies sqrt(eigvals) of the Hessian at the origin."""
        eigvals = np.linalg.eigvalsh(self.hessian(np.zeros(self.nmodes)))
        if np.any(eigvals <= 0):
            raise ValueError("Hessian at the origin is not positive definite")
        return np.sqrt(eigvals)

    # -- serialization ---------------------------------------------------

    def to_spec(self) -> dict:
        return {
            "nmodes": self.nmodes,
            "label": self.label,
            "rotation": None if self.rotation is None else self.rotation.tolist(),
            "terms": [
                {
                    "coefficient": t.coefficient,
                    "factors": [
                        {"mode": mode, **factor_to_spec(fn)} for mode, fn in t.factors
                    ],
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "SopPotential":
        terms = []
        for t in spec["terms"]:
            factors = {
                f["mode"]: factor_from_spec({k: v for k, v in f.items() if k != "mode"})
                for f in t["factors"]
            }
            terms.append((t["coefficient"], factors))
        rotation = spec.get("rotation")
        return cls(
            spec["nmodes"],
            terms,
            rotation=None if rotation is None else np.asarray(rotation),
            label=spec.get("label", "sop"),
        )


def rotated_coupled_ho(frequencies, rotation=None, label="rotated-ho") -> SopPotential:
    """Harmonic potential 0.5 * sum_i w_i^2 y_i^2 with y = x @ rotation.

    With the identity rotation this is separable and encodes as a
    bond-dimension-2 train; any orthogonal rotation couples the input modes
    while keeping the spectrum fixed.
    """
    frequencies = np.asarray(frequencies, dtype=float)
    nmodes = frequencies.size
    terms = [
        (0.5 * w**2, {i: Monomial(2)}) for i, w in enumerate(frequencies)
    ]
    return SopPotential(nmodes, terms, rotation=rotation, label=label)


def coupled_anharmonic(
    nmodes,
    frequencies,
    morse_depth=None,
    morse_rate=None,
    cubic=None,
    scan_halfwidth=None,
    scan_points=9,
    label="coupled-anharmonic",
) -> SopPotential:
    """Quadratic + per-mode Morse wells + cubic mode couplings, all in SOP form.

    The Morse well D*(1 - exp(-a*x))^2 expands into two Morse-type factors,
    2D*m(a) - D*m(2a), keeping every term a product of library functions.
    Cubic couplings are terms ``c * x_i * x_j^2`` keyed by (i, j) pairs.

    Construction scans a coarse grid and rejects parameter sets whose
    potential dips below its origin value there (unbounded-below escape).

    Args:
        nmodes: number of coordinates.
        frequencies: per-mode harmonic frequencies (length nmodes).
        morse_depth / morse_rate: per-mode Morse parameters (or None to skip).
        cubic: {(i, j): c} coupling constants for c * x_i * x_j**2.
        scan_halfwidth: per-mode half-width of the stability scan box;
            default 6 ground-state widths, 6 / sqrt(frequency).
        scan_points: grid points per mode in the scan.
    """
    frequencies = np.asarray(frequencies, dtype=float)
    if frequencies.size != nmodes:
        raise ValueError("frequencies length must match nmodes")
    terms = [(0.5 * w**2, {i: Monomial(2)}) for i, w in enumerate(frequencies)]
    if morse_depth is not None:
        depth = np.broadcast_to(np.asarray(morse_depth, dtype=float), (nmodes,))
        rate = np.broadcast_to(np.asarray(morse_rate, dtype=float), (nmodes,))
        for i in range(nmodes):
            if depth[i] == 0.0:
                continue
            terms.append((2.0 * depth[i], {i: MorseFactor(rate[i])}))
            terms.append((-depth[i], {i: MorseFactor(2.0 * rate[i])}))
    for (i, j), c in (cubic or {}).items():
        if i == j:
            raise ValueError("cubic couplings must touch two distinct modes")
        terms.append((c, {i: Monomial(1), j: Monomial(2)}))
    potential = SopPotential(nmodes, terms, label=label)

    if scan_halfwidth is None:
        scan_halfwidth = 6.0 / np.sqrt(frequencies)
    else:
        scan_halfwidth = np.broadcast_to(
            np.asarray(scan_halfwidth, dtype=float), (nmodes,)
        )
    npts = scan_points if scan_points**nmodes <= 200_000 else 5
    axes = [np.linspace(-h, h, npts) for h in scan_halfwidth]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, nmodes)
    values = potential.energy(mesh)
    origin = float(potential.energy(np.zeros(nmodes)))
    scale = max(float(np.max(np.abs(values))), 1.0)
    if float(np.min(values)) < origin - 1e-9 * scale:
        raise ValueError(
            "potential is not bounded below by its origin value on the scan grid; "
            "reduce couplings or the scan box"
        )
    return potential
