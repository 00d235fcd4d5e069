import math

import numpy as np
import pytest

from mmhetnet.channel import (
    LinkGains,
    path_loss,
    sample_interf_fade,
    sample_serving_fade,
    sample_shadow,
    sinr,
)
from mmhetnet.geometry import BsPoint, RngStream
from mmhetnet.model import BandTag, DomainError, FadingConvention

from conftest import two_tier_scenario


@pytest.fixture
def scen():
    return two_tier_scenario()


def test_path_loss_power_law(scen):
    uhf = scen.tiers[0]
    mm = scen.tiers[1]
    nu_u = scen.uhf_band.intercept
    nu_m = scen.mmwave_band.intercept
    assert path_loss(10.0, True, uhf, scen) == pytest.approx(nu_u * 10**2.1)
    assert path_loss(1.0, True, uhf, scen) == pytest.approx(nu_u)
    assert path_loss(1.0, False, uhf, scen) == pytest.approx(nu_u)
    assert path_loss(10.0, False, mm, scen) == pytest.approx(nu_m * 10**6.75, rel=1e-12)
    # NLOS >= LOS for r >= 1
    assert path_loss(50.0, False, uhf, scen) >= path_loss(50.0, True, uhf, scen)
    with pytest.raises(DomainError):
        path_loss(0.0, True, uhf, scen)


def test_shadow_moment_and_median(scen):
    # sampler draws ln G ~ N(0, 2 rho^2); check E[G^(2/alpha)] = e^(4 rho^2/alpha^2)
    import dataclasses

    tier = dataclasses.replace(scen.tiers[0], los_shadow_rho=1.0)
    rng = RngStream(5, 0)
    g = np.array([sample_shadow(tier, True, rng) for _ in range(200_000)])
    alpha = 4.0
    assert np.mean(g ** (2 / alpha)) == pytest.approx(math.exp(4 / alpha**2), rel=0.01)
    assert np.median(g) == pytest.approx(1.0, rel=0.02)
    tier0 = dataclasses.replace(tier, los_shadow_rho=0.0)
    assert sample_shadow(tier0, True, rng) == 1.0


def test_serving_fade_conventions():
    rng = RngStream(6, 0)
    uhf_chi = np.array(
        [sample_serving_fade(BandTag.UHF, 1, FadingConvention.CHI2_2T, rng) for _ in range(200_000)]
    )
    assert np.mean(uhf_chi) == pytest.approx(2.0, rel=0.01)
    mm = np.array(
        [sample_serving_fade(BandTag.MMWAVE, 2, FadingConvention.CHI2_2T, rng) for _ in range(200_000)]
    )
    assert np.mean(mm) == pytest.approx(2.0, rel=0.02)
    assert np.var(mm) == pytest.approx(4.0, rel=0.03)
    gam = np.array(
        [sample_serving_fade(BandTag.UHF, 4, FadingConvention.GAMMA_T, rng) for _ in range(100_000)]
    )
    assert np.mean(gam) == pytest.approx(4.0, rel=0.01)


def test_interf_fade_unit_exponential():
    rng = RngStream(8, 0)
    h = np.array([sample_interf_fade(rng) for _ in range(200_000)])
    assert np.mean(h) == pytest.approx(1.0, rel=0.01)
    assert np.mean(h > 1.0) == pytest.approx(math.exp(-1.0), abs=5e-3)
    assert np.var(h) == pytest.approx(1.0, rel=0.02)


def _mk_link(scen, tier_idx, r, los, fade=1.0, shadow=1.0):
    bs = BsPoint(tier_idx, r, 0.0, los)
    gains = LinkGains(path_loss(r, los, scen.tiers[tier_idx], scen), shadow, fade)
    return bs, gains


def test_sinr_constructed_cases(scen):
    import dataclasses

    # mmWave SNR with no interferers: signal/noise
    noise = scen.mmwave_band.noise_power_w
    bs = BsPoint(1, 50.0, 0.0, True)
    pl = path_loss(50.0, True, scen.tiers[1], scen)
    fade = 2.0 * noise * pl / scen.tiers[1].power_w
    val = sinr((bs, LinkGains(pl, 1.0, fade)), [], scen)
    assert val == pytest.approx(2.0, rel=1e-12)

    # UHF symmetry: identical serving/interferer parameters give SIR 1
    serving = _mk_link(scen, 0, 100.0, True, fade=1.0)
    interf = _mk_link(scen, 0, 100.0, True, fade=1.0)
    assert sinr(serving, [interf], scen) == pytest.approx(1.0)

    # power-law ratio: serving 100 m, interferer 200 m, all gains one
    serving = _mk_link(scen, 0, 100.0, True)
    interf = _mk_link(scen, 0, 200.0, True)
    assert sinr(serving, [interf], scen) == pytest.approx(2.0**2.1, rel=1e-12)

    # UHF with empty interferer list is the distinguished infinity
    assert sinr(serving, [], scen) == math.inf

    # cross-band interferer rejected
    with pytest.raises(DomainError):
        sinr(serving, [_mk_link(scen, 1, 100.0, True)], scen)


def test_sinr_uhf_scale_invariance(scen):
    import dataclasses

    serving = _mk_link(scen, 0, 150.0, True, fade=1.3, shadow=2.0)
    interfs = [_mk_link(scen, 0, 300.0, False, fade=0.7), _mk_link(scen, 0, 500.0, True, fade=2.2)]
    base = sinr(serving, interfs, scen)
    for c in (0.1, 7.0):
        tiers = tuple(dataclasses.replace(t, power_w=c * t.power_w) for t in scen.tiers)
        scaled = dataclasses.replace(scen, tiers=tiers)
        assert sinr(serving, interfs, scaled) == pytest.approx(base, rel=1e-12)


def test_sinr_monotone_in_interferer_fade(scen):
    serving = _mk_link(scen, 0, 150.0, True)
    lo = sinr(serving, [_mk_link(scen, 0, 300.0, True, fade=0.5)], scen)
    hi = sinr(serving, [_mk_link(scen, 0, 300.0, True, fade=2.0)], scen)
    assert hi < lo
