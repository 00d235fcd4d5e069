"""Path loss, shadowing, small-scale fading and SIR/SINR evaluation.

Received power from a station at range r is P * h * G / L(r) with
L(r) = intercept * r^alpha, alpha chosen by the link's LOS state.  The UHF
band is evaluated as pure SIR (interference limited); the mmWave band adds
the band's thermal noise power.  Spectra are orthogonal: a UHF serving
link only sees UHF interferers and a mmWave serving link only sees mmWave
interferers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .geometry import BsPoint, RngStream
from .model import BandTag, DomainError, FadingConvention, Scenario, TierConfig


@dataclass(frozen=True)
class LinkGains:
    """Multiplicative gains of one link (all strictly positive)."""

    path_loss: float
    shadow: float
    fade: float


def mean_far_interference(s: Scenario, band: BandTag, radius_m: float) -> float:
    """Mean in-band interference power from stations beyond the window.

    Both engines add this deterministic constant to the interference of
    the matching band: the far field's mean converges slowly under heavy
    lognormal shadowing (E[G] = exp(rho^2)), while its fluctuations decay
    like r^(1-2*alpha) and are negligible, so replacing the beyond-window
    field by its mean keeps a finite window consistent with the
    infinite-plane model.  NLOS mmWave stations are skipped when blocked.
    """
    from scipy import integrate as _integrate

    c = s.blockage.rate_per_m
    total = 0.0
    for tier in s.tiers:
        if tier.band != band:
            continue
        pl = s.pathloss_for(tier)
        nu = s.band_for(tier).intercept
        parts = [(pl.alpha_los, tier.los_shadow_rho, True)]
        if not (s.mmwave_nlos_blocked and tier.band == BandTag.MMWAVE):
            parts.append((pl.alpha_nlos, tier.nlos_shadow_rho, False))
        for alpha, rho, is_los in parts:
            mean_g = math.exp(rho * rho)  # E[G] with ln G ~ N(0, 2 rho^2)

            def integrand(r, a=alpha, los=is_los):
                w = math.exp(-c * r) if los else 1.0 - math.exp(-c * r)
                return w * r ** (1.0 - a)

            val, _ = _integrate.quad(
                integrand, radius_m, math.inf, limit=200, epsrel=1e-9, epsabs=0.0
            )
            total += 2.0 * math.pi * tier.intensity_per_m2 * tier.power_w * mean_g * val / nu
    return total


def path_loss(r: float, is_los: bool, tier: TierConfig, s: Scenario) -> float:
    """Linear path loss intercept * r^alpha for the tier's band.

    r = 0 is rejected: it is a probability-zero event under the PPP and
    clamping would silently distort near-field powers.  The far-field
    validity limit r >= 1 m is deliberately not enforced; for r < 1 the
    model returns L < intercept.
    """
    if r <= 0:
        raise DomainError("path_loss requires r > 0")
    pl = s.pathloss_for(tier)
    alpha = pl.alpha_los if is_los else pl.alpha_nlos
    return s.band_for(tier).intercept * r**alpha


def sample_shadow(tier: TierConfig, is_los: bool, rng: RngStream) -> float:
    """Lognormal shadowing gain, ln G ~ Normal(0, 2*rho^2).

    The doubled log-variance makes the empirical moment E[G^(2/alpha)]
    equal exp(4*rho^2/alpha^2), the factor the analytical engine uses.
    """
    rho = tier.los_shadow_rho if is_los else tier.nlos_shadow_rho
    if rho == 0.0:
        return 1.0
    return float(np.exp(rng.gen.normal(0.0, math.sqrt(2.0) * rho)))


def sample_serving_fade(
    band: BandTag, T: int, convention: FadingConvention, rng: RngStream
) -> float:
    """Beamformed serving-link fade.

    UHF: chi-squared with 2T degrees of freedom (mean 2T) or Gamma(T, 1)
    (mean T) depending on the convention.  mmWave: T * Exp(1), mean T and
    variance T^2.
    """
    if T < 1:
        raise DomainError("T must be >= 1")
    if band == BandTag.MMWAVE:
        return float(T * rng.gen.exponential(1.0))
    g = float(rng.gen.gamma(T, 1.0))
    return 2.0 * g if convention == FadingConvention.CHI2_2T else g


def sample_interf_fade(rng: RngStream) -> float:
    """Unit-exponential interferer fade (no transmit-diversity gain)."""
    return float(rng.gen.exponential(1.0))


def sinr(
    serving: Tuple[BsPoint, LinkGains],
    interferers: Sequence[Tuple[BsPoint, LinkGains]],
    s: Scenario,
) -> float:
    """SIR (UHF) or SINR (mmWave) of the serving link.

    The serving point must not appear in the interferer list, and every
    interferer must share the serving link's band.  Under
    ``mmwave_nlos_blocked`` NLOS mmWave points must already have been
    filtered out by the caller.  Returns math.inf only for an empty
    interferer list on the UHF band (a distinguished value, not an error).
    """
    bs, gains = serving
    tier = s.tiers[bs.tier_index]
    band = tier.band
    signal = tier.power_w * gains.fade * gains.shadow / gains.path_loss
    total_i = 0.0
    for ibs, igains in interferers:
        itier = s.tiers[ibs.tier_index]
        if itier.band != band:
            raise DomainError("interferer band does not match the serving band")
        if s.mmwave_nlos_blocked and band == BandTag.MMWAVE and not ibs.is_los:
            raise DomainError("NLOS mmWave interferer present despite blocking")
        total_i += itier.power_w * igains.fade * igains.shadow / igains.path_loss
    if band == BandTag.MMWAVE:
        total_i += s.mmwave_band.noise_power_w
    if total_i == 0.0:
        return math.inf
    return signal / total_i
