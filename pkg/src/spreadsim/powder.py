"""Particle size distributions and cohesion scaling utilities.

Diameters follow a lognormal distribution fitted to D10/D50/D90 quantiles,
truncated at a cutoff diameter by rejection sampling. Surface energy is
transferred between powders of different median size with the inverse-square
self-similarity rule, and the dimensionless cohesiveness number compares
adhesive pull-off to particle weight.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import InvalidInputError

# standard-normal quantile for the 90th percentile (z_10 = -Z90, z_90 = +Z90)
Z90 = float(ndtri(0.9))


@dataclass(frozen=True)
class PsdQuantiles:
    """Diameter percentiles in meters, strictly increasing for a fit."""

    d10: float
    d50: float
    d90: float

    def validate(self):
        if not (self.d10 > 0.0 and self.d50 > 0.0 and self.d90 > 0.0):
            raise InvalidInputError("PSD quantiles must be strictly positive")
        if not (self.d10 <= self.d50 <= self.d90):
            raise InvalidInputError("PSD quantiles must be non-decreasing (d10 <= d50 <= d90)")


@dataclass(frozen=True)
class PowderSpec:
    """Lognormal powder description plus material constants.

    mu_log/sigma_log parameterize ln(diameter/m); cutoff_diameter truncates
    the upper tail; density and surface_energy feed the contact model.
    """

    mu_log: float
    sigma_log: float
    cutoff_diameter: float
    density: float
    surface_energy: float

    def __post_init__(self):
        if self.sigma_log < 0.0:
            raise InvalidInputError("sigma_log must be >= 0")
        if self.cutoff_diameter <= 0.0:
            raise InvalidInputError("cutoff_diameter must be > 0")
        if self.density <= 0.0:
            raise InvalidInputError("density must be > 0")
        if self.surface_energy < 0.0:
            raise InvalidInputError("surface_energy must be >= 0")
        if np.exp(self.mu_log) > self.cutoff_diameter:
            raise InvalidInputError("median diameter exceeds cutoff_diameter")

    @property
    def median_diameter(self):
        return float(np.exp(self.mu_log))

    def quantiles(self) -> PsdQuantiles:
        """Fitted (untruncated) D10/D50/D90 of the lognormal."""
        d50 = self.median_diameter
        spread = np.exp(Z90 * self.sigma_log)
        return PsdQuantiles(d10=d50 / spread, d50=d50, d90=d50 * spread)


def fit_lognormal_psd(q: PsdQuantiles, cutoff_diameter: float,
                      density: float, surface_energy: float) -> PowderSpec:
    """Fit a lognormal to three diameter quantiles.

    The median pins mu_log = ln(d50). sigma_log is the least-squares slope of
    ln(d) against the standard-normal quantiles z = {-Z90, 0, +Z90}, which
    reduces to the symmetric estimate ln(d90/d10) / (2 Z90).
    """
    q.validate()
    if not (q.d10 < q.d50 < q.d90):
        raise InvalidInputError("quantile fit requires strictly increasing d10 < d50 < d90")
    mu = float(np.log(q.d50))
    # slope of ln(d_k) - mu on z_k over z in {-Z90, 0, +Z90}
    z = np.array([-Z90, 0.0, Z90])
    y = np.log([q.d10, q.d50, q.d90]) - mu
    sigma = float(z @ y / (z @ z))
    return PowderSpec(mu_log=mu, sigma_log=sigma, cutoff_diameter=cutoff_diameter,
                      density=density, surface_energy=surface_energy)


def sample_diameters(spec: PowderSpec, n: int, seed: int) -> np.ndarray:
    """Draw n diameters, rejection-sampling values above the cutoff.

    Deterministic for a fixed seed. Raises if the cutoff makes acceptance
    hopeless (guards the sigma_log = 0 degenerate case).
    """
    if n <= 0:
        raise InvalidInputError("sample count must be positive")
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    filled = 0
    rounds = 0
    while filled < n:
        draw = np.exp(rng.normal(spec.mu_log, spec.sigma_log, size=n - filled))
        ok = draw <= spec.cutoff_diameter
        kept = draw[ok]
        out[filled:filled + kept.size] = kept
        filled += kept.size
        rounds += 1
        if rounds > 1000 and filled == 0:
            raise InvalidInputError("rejection sampling cannot satisfy the cutoff diameter")
    return out


def scale_surface_energy(gamma_coarse: float, d50_coarse: float, d50_fine: float) -> float:
    """Self-similar surface-energy transfer: gamma * (D50_coarse / D50_fine)^2."""
    if gamma_coarse <= 0.0 or d50_coarse <= 0.0 or d50_fine <= 0.0:
        raise InvalidInputError("scale_surface_energy requires positive inputs")
    return (d50_coarse / d50_fine) ** 2 * gamma_coarse


def cohesiveness_ratio(gamma: float, density: float, radius: float, g: float) -> float:
    """Adhesion-to-weight number gamma / (rho g r^2); ~60 marks a very cohesive powder."""
    if gamma < 0.0:
        raise InvalidInputError("gamma must be >= 0")
    if density <= 0.0 or radius <= 0.0 or g <= 0.0:
        raise InvalidInputError("density, radius and g must be > 0")
    return gamma / (density * g * radius**2)
