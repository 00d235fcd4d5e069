"""Network scenario types, validation and derived physical defaults.

Unit conventions used throughout the package:

* distances in meters, intensities in points per m^2,
* powers in watts, bandwidths in Hz,
* path loss is linear: L(r) = intercept * r**alpha, so received power is
  P * h * G / L(r),
* shadowing spreads are kept on the natural-log scale (``rho``); the Monte
  Carlo sampler draws ln G ~ Normal(0, 2*rho**2) so that the analytical
  moment E[G**(2/alpha)] = exp(4*rho**2/alpha**2) used by the coverage
  expressions is reproduced exactly (see ``shadow_rho_from_db`` for the dB
  conversion).

A scenario holds one mmWave tier (always normalized to the last position)
and any number of UHF tiers.  The UHF band is treated as interference
limited (its noise power is pinned to zero); the mmWave band carries a
non-negligible thermal noise power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

LN10_OVER_10 = math.log(10.0) / 10.0

# Free-space intercepts (4*pi*f/c)^2 at 1 m for the default carriers,
# 2 GHz (UHF) and 73 GHz (mmWave).
DEFAULT_UHF_INTERCEPT = (4.0 * math.pi * 2.0e9 / 2.99792458e8) ** 2
DEFAULT_MMWAVE_INTERCEPT = (4.0 * math.pi * 73.0e9 / 2.99792458e8) ** 2

# 1/pi times the mean perimeter of a 15 m x 15 m square blockage.
DEFAULT_BLOCKAGE_ETA_M = 60.0 / math.pi


class DomainError(ValueError):
    """A scenario or argument violates a model invariant."""


class BandTag(str, Enum):
    UHF = "uhf"
    MMWAVE = "mmwave"


class FadingConvention(str, Enum):
    """Serving-link fading law on the UHF band.

    CHI2_2T: chi-squared with 2T degrees of freedom (mean 2T).
    GAMMA_T: Gamma(T, 1), the unit-mean-per-antenna normalization (mean T).
    Interferers are always unit exponentials.
    """

    CHI2_2T = "chi2_2t"
    GAMMA_T = "gamma_t"


@dataclass(frozen=True)
class BandParams:
    """Carrier-band constants: bandwidth, path-loss intercept, noise power."""

    band_tag: BandTag
    bandwidth_hz: float
    intercept: float
    noise_power_w: float = 0.0

    def check(self) -> None:
        if self.bandwidth_hz <= 0:
            raise DomainError("bandwidth_hz must be positive")
        if self.intercept <= 0:
            raise DomainError("intercept must be positive")
        if self.noise_power_w < 0:
            raise DomainError("noise_power_w must be nonnegative")
        if self.band_tag == BandTag.UHF and self.noise_power_w != 0.0:
            raise DomainError("UHF band is interference limited: noise_power_w must be 0")


@dataclass(frozen=True)
class TierConfig:
    """One class of base stations sharing intensity, power and bias."""

    intensity_per_m2: float
    power_w: float
    tx_antennas: int
    assoc_bias: float
    los_shadow_rho: float
    nlos_shadow_rho: float
    band: BandTag

    def check(self) -> None:
        if self.intensity_per_m2 <= 0:
            raise DomainError("intensity_per_m2 must be positive")
        if self.power_w <= 0:
            raise DomainError("power_w must be positive")
        if int(self.tx_antennas) != self.tx_antennas or self.tx_antennas < 1:
            raise DomainError("tx_antennas must be a positive integer")
        if self.assoc_bias <= 0:
            raise DomainError("assoc_bias must be positive")
        if self.los_shadow_rho < 0 or self.nlos_shadow_rho < 0:
            raise DomainError("shadow rho values must be nonnegative")


@dataclass(frozen=True)
class BlockageParams:
    """Exponential blockage law: P[link of length r is LOS] = exp(-eta*beta*r)."""

    intensity_per_m2: float
    eta_m: float = DEFAULT_BLOCKAGE_ETA_M

    def check(self) -> None:
        if self.intensity_per_m2 < 0:
            raise DomainError("blockage intensity_per_m2 must be nonnegative")
        if self.eta_m < 0:
            raise DomainError("eta_m must be nonnegative")

    @property
    def rate_per_m(self) -> float:
        """Combined exponent eta*beta in 1/m."""
        return self.eta_m * self.intensity_per_m2


@dataclass(frozen=True)
class PathLossParams:
    """LOS/NLOS path-loss exponent pair for one band."""

    alpha_los: float
    alpha_nlos: float

    def check(self) -> None:
        if self.alpha_los <= 2.0:
            raise DomainError("alpha_los must exceed 2 (interference integrals diverge)")
        if self.alpha_nlos < self.alpha_los:
            raise DomainError("alpha_nlos must be >= alpha_los")


@dataclass(frozen=True)
class UnifiedUhfParams:
    """Single-exponent UHF channel used by the simplified analytical path.

    ``d_los_m`` is the LOS-ball radius assigned to the mmWave tier: inside
    the ball a mmWave link is treated as LOS, outside it is invisible.
    """

    alpha_mu: float
    rho_mu: float
    d_los_m: float

    def check(self) -> None:
        if self.alpha_mu <= 2.0:
            raise DomainError("unified alpha_mu must exceed 2")
        if self.rho_mu < 0:
            raise DomainError("unified rho_mu must be nonnegative")
        if self.d_los_m <= 0:
            raise DomainError("unified d_los_m must be positive")


@dataclass(frozen=True)
class MetricEstimate:
    """A numerical result with an error figure.

    ``error`` is a standard error for Monte Carlo output and a quadrature
    error bound for analytical output; ``count`` is the number of trials or
    integrand evaluations.  Probability estimates are reported raw, without
    clamping to [0, 1]: a violation beyond ``error`` signals a bug upstream.
    """

    value: float
    error: float
    count: int

    def check(self) -> None:
        if self.error < 0:
            raise DomainError("error must be nonnegative")
        if self.count < 0:
            raise DomainError("count must be nonnegative")


@dataclass(frozen=True)
class Scenario:
    """Full network description consumed by both engines."""

    tiers: Tuple[TierConfig, ...]
    uhf_band: BandParams
    mmwave_band: BandParams
    blockage: BlockageParams
    uhf_pathloss: PathLossParams
    mmwave_pathloss: PathLossParams
    mmwave_nlos_blocked: bool = True
    unified_uhf: Optional[UnifiedUhfParams] = None
    window_radius_m: float = 15000.0
    uhf_fading_convention: FadingConvention = FadingConvention.CHI2_2T
    # Association gains are received association-signal powers measured
    # against a common reference floor, bias*G/(L(r)*floor): exponent
    # family policies (ROA) compare these dimensionless SNR-like levels,
    # so the floor sets where the bandwidth exponent starts to bite.  The
    # default floor is the UHF-band thermal noise at a 10 dB noise figure.
    assoc_ref_power_w: Optional[float] = None
    # Internal distance scale (meters) used to condition the analytical
    # equivalent-distance integrals; results do not depend on it.
    assoc_ref_distance_m: float = 1000.0

    def assoc_floor_w(self) -> float:
        if self.assoc_ref_power_w is not None:
            return self.assoc_ref_power_w
        return default_noise_power(self.uhf_band.bandwidth_hz, 10.0)

    def band_for(self, tier: TierConfig) -> BandParams:
        return self.mmwave_band if tier.band == BandTag.MMWAVE else self.uhf_band

    def pathloss_for(self, tier: TierConfig) -> PathLossParams:
        return self.mmwave_pathloss if tier.band == BandTag.MMWAVE else self.uhf_pathloss

    @property
    def mmwave_index(self) -> int:
        for i, t in enumerate(self.tiers):
            if t.band == BandTag.MMWAVE:
                return i
        raise DomainError("scenario has no mmWave tier")

    @property
    def num_tiers(self) -> int:
        return len(self.tiers)


def validate_scenario(s: Scenario) -> Scenario:
    """Check every invariant and normalize tier order (mmWave tier last).

    Returns the validated scenario; raises DomainError naming the first
    violated invariant.  Idempotent.
    """
    if not s.tiers:
        raise DomainError("tier list must be non-empty")
    for t in s.tiers:
        t.check()
    if s.uhf_band.band_tag != BandTag.UHF:
        raise DomainError("uhf_band must carry band_tag UHF")
    if s.mmwave_band.band_tag != BandTag.MMWAVE:
        raise DomainError("mmwave_band must carry band_tag MMWAVE")
    s.uhf_band.check()
    s.mmwave_band.check()
    s.blockage.check()
    s.uhf_pathloss.check()
    s.mmwave_pathloss.check()
    if s.unified_uhf is not None:
        s.unified_uhf.check()
    if s.window_radius_m <= 0:
        raise DomainError("window_radius_m must be positive")
    if s.assoc_ref_distance_m <= 0:
        raise DomainError("assoc_ref_distance_m must be positive")
    if s.assoc_ref_power_w is not None and s.assoc_ref_power_w <= 0:
        raise DomainError("assoc_ref_power_w must be positive")

    n_mm = sum(1 for t in s.tiers if t.band == BandTag.MMWAVE)
    if n_mm != 1:
        raise DomainError("exactly one tier must carry band MMWAVE, got %d" % n_mm)

    tiers = tuple(t for t in s.tiers if t.band == BandTag.UHF) + tuple(
        t for t in s.tiers if t.band == BandTag.MMWAVE
    )
    if tiers == s.tiers:
        return s
    return replace(s, tiers=tiers)


def default_noise_power(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power in watts: -174 dBm/Hz density plus noise figure."""
    if bandwidth_hz <= 0:
        raise DomainError("bandwidth_hz must be positive")
    dbm = -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


def shadow_rho_from_db(sigma_db: float) -> float:
    """Convert a dB shadowing spread to the natural-log-scale rho."""
    if sigma_db < 0:
        raise DomainError("sigma_db must be nonnegative")
    return LN10_OVER_10 * sigma_db
