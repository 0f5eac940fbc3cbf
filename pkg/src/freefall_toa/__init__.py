"""Quantum time-of-arrival statistics for a Gaussian packet in free fall."""

__version__ = "0.1.0"

from .core import DomainError, ToaDistribution  # noqa: E402
from .moments import (  # noqa: E402
    EnergyReport,
    MomentReport,
    UncertaintyReport,
    delta_toa,
    energy_moments,
    mean_toa_delay,
    time_energy_product,
    toa_moments,
    uncertainty_product,
)
from .params import (  # noqa: E402
    HBAR,
    DerivedScales,
    PhysicalParams,
    Regime,
    RegimeLabel,
    ValidationError,
    classify_regime,
    derive_scales,
)
from .quadrature import QuadratureError, truncated_gaussian_expect  # noqa: E402

__all__ = [
    "HBAR",
    "DerivedScales",
    "DomainError",
    "EnergyReport",
    "MomentReport",
    "PhysicalParams",
    "QuadratureError",
    "Regime",
    "RegimeLabel",
    "ToaDistribution",
    "UncertaintyReport",
    "ValidationError",
    "classify_regime",
    "delta_toa",
    "derive_scales",
    "energy_moments",
    "mean_toa_delay",
    "time_energy_product",
    "toa_moments",
    "truncated_gaussian_expect",
    "uncertainty_product",
]
