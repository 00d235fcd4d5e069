"""Coverage and rate toolkit for mmWave heterogeneous cellular networks.

Two engines compute the same quantities: :mod:`mmhetnet.analysis`
evaluates the analytical coverage-probability and link-rate expressions
by quadrature, and :mod:`mmhetnet.montecarlo` estimates them by snapshot
simulation of Poisson networks.  :mod:`mmhetnet.cli` sweeps parameters,
compares the engines and writes CSV.
"""

from .association import AssociationPolicy, NoCandidate, PolicyKind
from .model import (
    BandParams,
    BandTag,
    BlockageParams,
    DomainError,
    FadingConvention,
    MetricEstimate,
    PathLossParams,
    Scenario,
    TierConfig,
    UnifiedUhfParams,
    default_noise_power,
    shadow_rho_from_db,
    validate_scenario,
)
from .numerics import NonConvergence, QuadSpec

__all__ = [
    "AssociationPolicy",
    "BandParams",
    "BandTag",
    "BlockageParams",
    "DomainError",
    "FadingConvention",
    "MetricEstimate",
    "NoCandidate",
    "NonConvergence",
    "PathLossParams",
    "PolicyKind",
    "QuadSpec",
    "Scenario",
    "TierConfig",
    "UnifiedUhfParams",
    "default_noise_power",
    "shadow_rho_from_db",
    "validate_scenario",
]

__version__ = "0.1.0"
