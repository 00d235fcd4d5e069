"""User association policies and serving-station selection.

A policy scores every candidate station by its biased mean association
signal level, raised to a per-tier exponent and compared in the log
domain:

    score = e_m * (ln omega_m + ln G - ln L(r) - ln floor),

where L is the physical path loss (band intercept included) and ``floor``
is the scenario's common reference power (by default the UHF-band thermal
noise floor).  The base is therefore the candidate's association-signal
level above the reference floor, a dimensionless SNR-like quantity.  For
equal exponents the floor cancels and the rule is exactly "strongest
biased mean received power"; with bandwidth exponents (ROA) the floor
sets the level at which the wider band starts to win.  Small-scale fading
never enters the metric, only its mean; stations broadcast association
signals that users average over fading.

Named policies:

* COA (coverage-optimal): omega_m = P_m, all exponents 1.  Picks the
  strongest mean received signal; maximizes coverage probability.
* ROA (rate-optimal): omega_m = P_m, exponent W_band / W_uhf.  Weights the
  gain by the serving band's bandwidth ratio; maximizes mean link rate.
* GUA with bias: arbitrary positive per-tier biases, exponents 1.

With equal UHF and mmWave bandwidths ROA degenerates to COA and selects
the same station on every realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .geometry import BsPoint
from .model import BandTag, DomainError, Scenario


class NoCandidate(Exception):
    """No admissible station exists; the trial is a coverage hole."""


class PolicyKind(str, Enum):
    GUA_BIAS = "gua"
    COA = "coa"
    ROA = "roa"


@dataclass(frozen=True)
class AssociationPolicy:
    """A member of the biased power-law association family.

    ``biases`` and ``exponents`` are per-tier tables (aligned with the
    scenario's tier order); None means the policy-specific default.
    """

    kind: PolicyKind
    biases: Optional[Tuple[float, ...]] = None
    exponents: Optional[Tuple[float, ...]] = None

    @staticmethod
    def coa() -> "AssociationPolicy":
        return AssociationPolicy(PolicyKind.COA)

    @staticmethod
    def roa() -> "AssociationPolicy":
        return AssociationPolicy(PolicyKind.ROA)

    @staticmethod
    def gua(biases: Sequence[float]) -> "AssociationPolicy":
        return AssociationPolicy(PolicyKind.GUA_BIAS, biases=tuple(float(b) for b in biases))

    @staticmethod
    def by_name(name: str, biases: Optional[Sequence[float]] = None) -> "AssociationPolicy":
        name = name.lower()
        if name == "coa":
            return AssociationPolicy.coa()
        if name == "roa":
            return AssociationPolicy.roa()
        if name == "gua":
            if biases is None:
                raise DomainError("gua policy needs a per-tier bias table")
            return AssociationPolicy.gua(biases)
        raise DomainError(f"unknown policy name: {name}")

    def resolve(self, s: Scenario) -> Tuple[np.ndarray, np.ndarray]:
        """Per-tier (omega, exponent) arrays for a validated scenario.

        ROA exponents are the physical bandwidths normalized by the UHF
        bandwidth; normalization preserves metric ratios and the argmax.
        """
        n = s.num_tiers
        if self.kind == PolicyKind.COA:
            omega = np.array([t.power_w for t in s.tiers])
            expo = np.ones(n)
        elif self.kind == PolicyKind.ROA:
            omega = np.array([t.power_w for t in s.tiers])
            expo = np.array(
                [s.band_for(t).bandwidth_hz / s.uhf_band.bandwidth_hz for t in s.tiers]
            )
        else:
            if self.biases is None or len(self.biases) != n:
                raise DomainError("gua policy bias table must match the tier count")
            if any(b <= 0 for b in self.biases):
                raise DomainError("gua biases must be positive")
            omega = np.array(self.biases, dtype=float)
            expo = np.ones(n)
        if self.exponents is not None:
            if len(self.exponents) != n:
                raise DomainError("exponent table must match the tier count")
            if any(e <= 0 for e in self.exponents):
                raise DomainError("exponents must be positive")
            expo = np.array(self.exponents, dtype=float)
        return omega, expo


def association_metric(
    bs: BsPoint, shadow: float, policy: AssociationPolicy, s: Scenario
) -> float:
    """Log-domain association score of one candidate.

    Returns e_m * (ln omega_m + ln G - ln L(r) - ln floor); strictly
    order-preserving with respect to the linear-domain score.
    """
    if shadow <= 0:
        raise DomainError("shadow must be positive")
    if bs.distance_m <= 0:
        raise DomainError("distance must be positive")
    omega, expo = policy.resolve(s)
    tier = s.tiers[bs.tier_index]
    pl = s.pathloss_for(tier)
    alpha = pl.alpha_los if bs.is_los else pl.alpha_nlos
    log_gain = (
        math.log(omega[bs.tier_index])
        + math.log(shadow)
        - math.log(s.band_for(tier).intercept)
        - alpha * math.log(bs.distance_m)
        - math.log(s.assoc_floor_w())
    )
    return float(expo[bs.tier_index] * log_gain)


def select_serving(
    realization: Sequence[Tuple[BsPoint, float]],
    policy: AssociationPolicy,
    s: Scenario,
) -> int:
    """Index of the serving station in a realization of (point, shadow) pairs.

    NLOS mmWave candidates are dropped when the scenario blocks them; if
    nothing remains, NoCandidate signals a coverage hole (the trial counts
    as not covered with zero rate).  Ties break toward the smaller
    distance, then the lower tier index.
    """
    best = -1
    best_key = None
    for i, (bs, shadow) in enumerate(realization):
        tier = s.tiers[bs.tier_index]
        if s.mmwave_nlos_blocked and tier.band == BandTag.MMWAVE and not bs.is_los:
            continue
        m = association_metric(bs, shadow, policy, s)
        key = (-m, bs.distance_m, bs.tier_index)
        if best_key is None or key < best_key:
            best_key = key
            best = i
    if best < 0:
        raise NoCandidate("no admissible association candidate")
    return best
