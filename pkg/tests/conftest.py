import math

import pytest

from mmhetnet.model import (
    BandParams,
    BandTag,
    BlockageParams,
    FadingConvention,
    PathLossParams,
    Scenario,
    TierConfig,
    UnifiedUhfParams,
    default_noise_power,
    shadow_rho_from_db,
)

TABLE_BETA = 5.5e-5
ETA_DEFAULT = 60.0 / math.pi


def classic_scenario(alpha: float = 4.0, theta_window: float = 15000.0) -> Scenario:
    """Single UHF tier, SISO, no shadowing, no blockage; the closed-form
    nearest-station SIR network.  A vanishing mmWave tier satisfies the
    one-mmWave-tier invariant without ever producing a sample."""
    tiers = (
        TierConfig(1e-6, 20.0, 1, 20.0, 0.0, 0.0, BandTag.UHF),
        TierConfig(1e-30, 1.0, 1, 1.0, 0.0, 0.0, BandTag.MMWAVE),
    )
    return Scenario(
        tiers=tiers,
        uhf_band=BandParams(BandTag.UHF, 1e8, 7018.39, 0.0),
        mmwave_band=BandParams(BandTag.MMWAVE, 1e9, 9.35e6, 0.0),
        blockage=BlockageParams(0.0, ETA_DEFAULT),
        uhf_pathloss=PathLossParams(alpha, alpha),
        mmwave_pathloss=PathLossParams(2.1, 6.75),
        mmwave_nlos_blocked=True,
        unified_uhf=UnifiedUhfParams(alpha_mu=alpha, rho_mu=0.0, d_los_m=200.0),
        window_radius_m=theta_window,
        uhf_fading_convention=FadingConvention.GAMMA_T,
    )


# Calibration of the constants the published parameter table leaves
# unstated: blockage geometry eta (the single-band mmWave coverage
# asymptote pins eta*beta), the effective mmWave intercept (73 GHz free
# space less 10 dB of beamforming array gain, since the scalar fade model
# carries no directivity) and a 10 dB receiver noise figure.
ETA_URBAN = 70.0
NU_MMWAVE_EFF = 9.35e5


def two_tier_scenario(
    ratio: float = 1.0,
    miso: bool = False,
    window: float = 15000.0,
    noise_figure_db: float = 10.0,
    eta: float = ETA_URBAN,
    nu_mm: float = NU_MMWAVE_EFF,
    mm_only: bool = False,
    convention: FadingConvention = FadingConvention.CHI2_2T,
) -> Scenario:
    """Macro UHF tier plus a 73 GHz picocell tier, urban blockage field.

    ``ratio`` is the pico-to-blockage intensity ratio; ``mm_only`` shrinks
    the macro tier to nothing for single-band asymptotics."""
    rho13 = shadow_rho_from_db(13.0)
    rho96 = shadow_rho_from_db(9.6)
    rho158 = shadow_rho_from_db(15.8)
    tiers = (
        TierConfig(
            1e-30 if mm_only else 1e-6, 20.0, 4 if miso else 1, 20.0, rho13, rho13, BandTag.UHF
        ),
        TierConfig(ratio * TABLE_BETA, 1.0, 2 if miso else 1, 1.0, rho96, rho158, BandTag.MMWAVE),
    )
    return Scenario(
        tiers=tiers,
        uhf_band=BandParams(BandTag.UHF, 1e8, 7018.39, 0.0),
        mmwave_band=BandParams(
            BandTag.MMWAVE, 1e9, nu_mm, default_noise_power(1e9, noise_figure_db)
        ),
        blockage=BlockageParams(TABLE_BETA, eta),
        uhf_pathloss=PathLossParams(2.1, 3.4),
        mmwave_pathloss=PathLossParams(2.1, 6.75),
        mmwave_nlos_blocked=True,
        unified_uhf=UnifiedUhfParams(
            alpha_mu=3.76, rho_mu=rho13, d_los_m=math.sqrt(2.0) / (eta * TABLE_BETA)
        ),
        window_radius_m=window,
        uhf_fading_convention=convention,
    )


@pytest.fixture
def classic():
    return classic_scenario()


@pytest.fixture
def table_two_tier():
    return two_tier_scenario()
