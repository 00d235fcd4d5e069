import dataclasses
import math

import numpy as np
import pytest

from mmhetnet.association import (
    AssociationPolicy,
    NoCandidate,
    association_metric,
    select_serving,
)
from mmhetnet.geometry import BsPoint
from mmhetnet.model import BandTag, DomainError

from conftest import two_tier_scenario


@pytest.fixture
def scen():
    return two_tier_scenario()


def _point_with_gain(scen, tier_idx, gain_linear, is_los=True):
    """Construct a point whose floor-referenced association gain is given."""
    tier = scen.tiers[tier_idx]
    pl = scen.pathloss_for(tier)
    alpha = pl.alpha_los if is_los else pl.alpha_nlos
    nu = scen.band_for(tier).intercept
    # gain = P G / (nu r^alpha floor) with G = 1
    r = (tier.power_w / (nu * gain_linear * scen.assoc_floor_w())) ** (1.0 / alpha)
    return BsPoint(tier_idx, r, 0.0, is_los)


def test_coa_prefers_closer_same_tier(scen):
    pol = AssociationPolicy.coa()
    near = BsPoint(0, 200.0, 0.0, True)
    far = BsPoint(0, 400.0, 0.0, True)
    assert association_metric(near, 1.0, pol, scen) > association_metric(far, 1.0, pol, scen)


def test_roa_log_domain_example(scen):
    # candidates engineered to floor-referenced gains 2.0 (UHF) and 1.5
    # (mmWave): with exponents 1 and 10 the mmWave side wins, 0.693 vs 4.05
    pol = AssociationPolicy.roa()
    uhf = _point_with_gain(scen, 0, 2.0)
    mm = _point_with_gain(scen, 1, 1.5)
    m_u = association_metric(uhf, 1.0, pol, scen)
    m_m = association_metric(mm, 1.0, pol, scen)
    assert m_u == pytest.approx(math.log(2.0), abs=1e-9)
    assert m_m == pytest.approx(10.0 * math.log(1.5), abs=1e-9)
    assert m_m > m_u
    # COA on the same pair picks the UHF candidate
    coa = AssociationPolicy.coa()
    assert association_metric(uhf, 1.0, coa, scen) > association_metric(mm, 1.0, coa, scen)
    assert select_serving([(uhf, 1.0), (mm, 1.0)], coa, scen) == 0
    assert select_serving([(uhf, 1.0), (mm, 1.0)], pol, scen) == 1


def test_gua_bias_scale_invariance(scen):
    rng = np.random.default_rng(3)
    pts = [
        (BsPoint(int(t), float(r), 0.0, bool(l)), float(g))
        for t, r, l, g in zip(
            rng.integers(0, 2, 40),
            rng.uniform(20, 3000, 40),
            rng.integers(0, 2, 40),
            rng.lognormal(0, 1.0, 40),
        )
    ]
    base = AssociationPolicy.gua([2.0, 5.0])
    scaled = AssociationPolicy.gua([2.0 * 7.3, 5.0 * 7.3])
    assert select_serving(pts, base, scen) == select_serving(pts, scaled, scen)
    # common positive power on the exponents preserves the argmax too
    expo = AssociationPolicy(base.kind, base.biases, exponents=(3.0, 3.0))
    assert select_serving(pts, base, scen) == select_serving(pts, expo, scen)


def test_roa_with_equal_bandwidths_degenerates_to_coa(scen):
    eq = dataclasses.replace(
        scen, mmwave_band=dataclasses.replace(scen.mmwave_band, bandwidth_hz=1e8)
    )
    omega, expo = AssociationPolicy.roa().resolve(eq)
    assert np.allclose(expo, 1.0)
    assert np.allclose(omega, [t.power_w for t in eq.tiers])


def test_single_candidate_and_hole(scen):
    pol = AssociationPolicy.coa()
    only = BsPoint(0, 500.0, 0.0, False)
    assert select_serving([(only, 1.0)], pol, scen) == 0
    # blocked NLOS mmWave candidates leave a coverage hole
    nlos_mm = BsPoint(1, 80.0, 0.0, False)
    with pytest.raises(NoCandidate):
        select_serving([(nlos_mm, 1.0)], pol, scen)


def test_tie_break_smaller_distance_then_tier(scen):
    pol = AssociationPolicy.gua([1.0, 1.0])
    # same tier, same metric at different constructed (r, shadow) pairs
    a = BsPoint(0, 100.0, 0.0, True)
    b = BsPoint(0, 200.0, 0.0, True)
    g_b = (200.0 / 100.0) ** scen.uhf_pathloss.alpha_los  # equalizes the metric
    i = select_serving([(b, g_b), (a, 1.0)], pol, scen)
    assert i == 1  # the closer one


def test_coa_argmax_matches_mean_received_power(scen):
    # with fades held at their means, the COA choice maximizes P*G/L
    from mmhetnet.channel import path_loss

    rng = np.random.default_rng(11)
    pol = AssociationPolicy.coa()
    for _ in range(50):
        pts = [
            (BsPoint(int(t), float(r), 0.0, bool(l)), float(g))
            for t, r, l, g in zip(
                rng.integers(0, 2, 25),
                rng.uniform(20, 4000, 25),
                rng.integers(0, 2, 25),
                rng.lognormal(0, 2.0, 25),
            )
        ]
        pick = select_serving(pts, pol, scen)
        powers = [
            scen.tiers[bs.tier_index].power_w * g / path_loss(bs.distance_m, bs.is_los, scen.tiers[bs.tier_index], scen)
            for bs, g in pts
        ]
        assert pick == int(np.argmax(powers))


def test_metric_rejects_bad_inputs(scen):
    pol = AssociationPolicy.coa()
    with pytest.raises(DomainError):
        association_metric(BsPoint(0, 100.0, 0.0, True), 0.0, pol, scen)
    with pytest.raises(DomainError):
        association_metric(BsPoint(0, 0.0, 0.0, True), 1.0, pol, scen)
    with pytest.raises(DomainError):
        AssociationPolicy.gua([1.0]).resolve(scen)
    with pytest.raises(DomainError):
        AssociationPolicy.by_name("nope")
