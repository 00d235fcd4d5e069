import dataclasses
import math

import pytest

from mmhetnet.model import (
    BandParams,
    BandTag,
    DomainError,
    PathLossParams,
    TierConfig,
    default_noise_power,
    shadow_rho_from_db,
    validate_scenario,
)

from conftest import classic_scenario, two_tier_scenario


def test_table_style_scenario_accepted():
    s = validate_scenario(two_tier_scenario())
    assert s.num_tiers == 2
    assert s.tiers[-1].band == BandTag.MMWAVE


def test_alpha_boundary_rejected():
    s = two_tier_scenario()
    bad = dataclasses.replace(s, uhf_pathloss=PathLossParams(2.0, 3.4))
    with pytest.raises(DomainError, match="alpha_los"):
        validate_scenario(bad)


def test_two_mmwave_tiers_rejected():
    s = two_tier_scenario()
    tiers = (s.tiers[1], s.tiers[1])
    with pytest.raises(DomainError, match="MMWAVE"):
        validate_scenario(dataclasses.replace(s, tiers=tiers))


def test_validate_normalizes_mmwave_last_and_is_idempotent():
    s = two_tier_scenario()
    flipped = dataclasses.replace(s, tiers=(s.tiers[1], s.tiers[0]))
    v = validate_scenario(flipped)
    assert v.tiers[-1].band == BandTag.MMWAVE
    assert validate_scenario(v) == v


def test_uhf_band_must_be_noiseless():
    with pytest.raises(DomainError, match="interference limited"):
        BandParams(BandTag.UHF, 1e8, 7018.0, 1e-12).check()


def test_nonpositive_tier_fields_rejected():
    with pytest.raises(DomainError):
        TierConfig(0.0, 20.0, 1, 1.0, 0.0, 0.0, BandTag.UHF).check()
    with pytest.raises(DomainError):
        TierConfig(1e-6, 20.0, 0, 1.0, 0.0, 0.0, BandTag.UHF).check()


def test_default_noise_power_values():
    assert default_noise_power(1e9, 10.0) == pytest.approx(3.981e-11, rel=1e-3)
    assert default_noise_power(1.0, 0.0) == pytest.approx(3.981e-21, rel=1e-3)
    assert default_noise_power(1e8, 10.0) == pytest.approx(3.981e-12, rel=1e-3)


def test_default_noise_power_monotonic():
    assert default_noise_power(2e9, 10.0) > default_noise_power(1e9, 10.0)
    assert default_noise_power(1e9, 11.0) > default_noise_power(1e9, 10.0)
    with pytest.raises(DomainError):
        default_noise_power(0.0, 10.0)


def test_shadow_rho_from_db_values_and_linearity():
    assert shadow_rho_from_db(13.0) == pytest.approx(2.9934, abs=1e-4)
    assert shadow_rho_from_db(0.0) == 0.0
    assert shadow_rho_from_db(9.6) == pytest.approx(2.2105, abs=1e-4)
    for a in (0.5, 2.0, 7.3):
        assert shadow_rho_from_db(a * 4.0) == pytest.approx(a * shadow_rho_from_db(4.0))


def test_classic_scenario_valid():
    validate_scenario(classic_scenario())
