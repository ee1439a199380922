"""Physical parameters, disorder discretization, and basis bookkeeping.

Everything internal is in Hartree atomic units (au). Times in femtoseconds
are accepted only at input boundaries through :func:`time_to_au`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import ConfigError, DegenerateDistributionError

# fixed conversion constant, 1 fs of time in au
FS_TO_AU = 41.341373335

# domain truncation of the Gaussian disorder distribution, in units of sigma
DOMAIN_HALF_WIDTH = 3.0


def time_to_au(value: float, unit: str = "au") -> float:
    """Convert a time given in 'fs' or 'au' to atomic units."""
    if value < 0:
        raise ConfigError(f"time must be non-negative, got {value}")
    if unit == "au":
        return float(value)
    if unit == "fs":
        return float(value) * FS_TO_AU
    raise ConfigError(f"unknown time unit {unit!r} (expected 'fs' or 'au')")


def bin_count_rule(sigma: float, t_final: float) -> int:
    """Number of disorder bins resolving a width-sigma Gaussian over t_final.

    A finite propagation time resolves frequencies only to ~2*pi/t_final,
    so the truncated 6*sigma domain needs ceil(6*sigma*t_final/2*pi) bins,
    with a floor of one bin.
    """
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    if t_final <= 0:
        raise ConfigError("t_final must be > 0")
    return max(1, math.ceil(2.0 * DOMAIN_HALF_WIDTH * sigma * t_final / (2.0 * math.pi)))


@dataclass(frozen=True)
class ModelSpec:
    """All physical parameters of one disordered-ensemble-in-a-cavity model.

    Energies and rates in au; s1/s2 are dimensionless signed displacements
    of the two excited surfaces; coupling is the collective value g*sqrt(N)
    held fixed in the large-ensemble limit.
    """

    omega0: float     # mean exciton frequency
    omega_nu: float   # vibrational frequency
    s1: float         # displacement of the reactant surface
    s2: float         # displacement of the product surface
    v12: float        # diabatic reactant-product coupling
    omega_c: float    # cavity frequency
    kappa: float      # cavity decay rate
    coupling: float   # collective light-matter coupling g*sqrt(N)
    sigma: float      # Gaussian exciton-frequency disorder width
    delta2: float = 0.0  # rigid energy offset of the product surface

    def __post_init__(self):
        if self.omega_nu <= 0:
            raise ConfigError("omega_nu must be > 0")
        if self.omega0 <= 0 or self.omega_c <= 0:
            raise ConfigError("omega0 and omega_c must be > 0")
        if self.kappa < 0 or self.coupling < 0 or self.sigma < 0:
            raise ConfigError("kappa, coupling and sigma must be >= 0")
        if self.v12 < 0:
            raise ConfigError("v12 must be >= 0")


@dataclass(frozen=True)
class BinSet:
    """Discretized disorder distribution.

    weights sum to one after renormalization of the truncated Gaussian;
    centers are the bin-conditional mean frequencies, strictly increasing;
    edges has length n_bins + 1 and tiles the truncated domain.
    """

    weights: np.ndarray
    centers: np.ndarray
    edges: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.weights)

    def validate(self, tol: float = 1e-12) -> None:
        if abs(self.weights.sum() - 1.0) > tol:
            raise ValueError("bin weights do not sum to 1")
        if np.any(np.diff(self.centers) <= 0) and self.n_bins > 1:
            raise ValueError("bin centers must strictly increase")
        degenerate = self.edges[0] == self.edges[-1]
        if not degenerate:
            inside = (self.edges[:-1] < self.centers) & (self.centers < self.edges[1:])
            if not inside.all():
                raise ValueError("each center must lie strictly inside its bin")
            if np.any(np.diff(self.edges) <= 0):
                raise ValueError("bin edges must strictly increase")


def _standard_normal_cdf(z):
    return 0.5 * (1.0 + erf(z / math.sqrt(2.0)))


def _standard_normal_pdf(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def discretize_disorder(spec: ModelSpec, n_bins: int) -> BinSet:
    """Split the Gaussian exciton-frequency distribution into equal-width bins.

    The domain is truncated to omega0 +/- 3*sigma. Per bin, the weight is
    the Gaussian probability mass and the frequency is the bin-conditional
    mean; weights are renormalized so they sum to one (the raw truncated
    mass is erf(3/sqrt 2) ~ 0.99730). Both integrals are evaluated in
    closed form from the normal cdf/pdf, exact to machine precision.
    """
    if n_bins < 1:
        raise ConfigError("n_bins must be >= 1")
    if spec.sigma == 0.0:
        if n_bins > 1:
            raise DegenerateDistributionError(
                "sigma = 0 admits a single bin only; use n_bins = 1"
            )
        ones = np.array([1.0])
        return BinSet(weights=ones, centers=np.array([spec.omega0]),
                      edges=np.array([spec.omega0, spec.omega0]))

    z_edges = np.linspace(-DOMAIN_HALF_WIDTH, DOMAIN_HALF_WIDTH, n_bins + 1)
    cdf = _standard_normal_cdf(z_edges)
    pdf = _standard_normal_pdf(z_edges)
    raw_weights = cdf[1:] - cdf[:-1]
    # first moment of the standard normal over each slice is pdf(lo) - pdf(hi)
    raw_moments = pdf[:-1] - pdf[1:]
    centers = spec.omega0 + spec.sigma * raw_moments / raw_weights
    weights = raw_weights / raw_weights.sum()
    binset = BinSet(weights=weights, centers=centers,
                    edges=spec.omega0 + spec.sigma * z_edges)
    binset.validate()
    return binset


class BasisLayout:
    """Flat indexing of the effective Hilbert space.

    Index 0 is the photon state (which carries the shared ground
    vibrational wavefunction); then one reactant block per bin, then one
    product block per bin; inside a block, vibrational levels are
    contiguous.
    """

    PHOTON = 0

    def __init__(self, n_bins: int, n_vib: int):
        if n_bins < 1 or n_vib < 2:
            raise ConfigError("need n_bins >= 1 and n_vib >= 2")
        self.n_bins = n_bins
        self.n_vib = n_vib
        self.dimension = 1 + 2 * n_bins * n_vib

    def e1(self, bin_index: int, level: int) -> int:
        self._check(bin_index, level)
        return 1 + bin_index * self.n_vib + level

    def e2(self, bin_index: int, level: int) -> int:
        self._check(bin_index, level)
        return 1 + (self.n_bins + bin_index) * self.n_vib + level

    def e1_slice(self, bin_index: int) -> slice:
        start = self.e1(bin_index, 0)
        return slice(start, start + self.n_vib)

    def e2_slice(self, bin_index: int) -> slice:
        start = self.e2(bin_index, 0)
        return slice(start, start + self.n_vib)

    def describe(self, flat: int):
        """Inverse map: flat index -> ('photon',) or (surface, bin, level)."""
        if not 0 <= flat < self.dimension:
            raise IndexError(f"flat index {flat} out of range")
        if flat == self.PHOTON:
            return ("photon",)
        block, level = divmod(flat - 1, self.n_vib)
        if block < self.n_bins:
            return ("e1", block, level)
        return ("e2", block - self.n_bins, level)

    def _check(self, bin_index: int, level: int) -> None:
        if not 0 <= bin_index < self.n_bins:
            raise IndexError(f"bin index {bin_index} out of range")
        if not 0 <= level < self.n_vib:
            raise IndexError(f"vibrational level {level} out of range")
