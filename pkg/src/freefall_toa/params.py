"""Dimensional inputs, derived scales and regime classification."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = [
    "HBAR",
    "ValidationError",
    "PhysicalParams",
    "DerivedScales",
    "Regime",
    "RegimeLabel",
    "derive_scales",
    "classify_regime",
]

# CODATA 2018 reduced Planck constant, J s.
HBAR = 1.054571817e-34


class ValidationError(ValueError):
    """An input failed validation; ``field`` names the offending quantity."""

    def __init__(self, field: str, value, reason: str = "must be finite and > 0"):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r}: {reason}")


def _check_positive(name: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValidationError(name, value, "not a number") from None
    if not (math.isfinite(v) and v > 0.0):
        raise ValidationError(name, value)
    return v


@dataclass(frozen=True)
class PhysicalParams:
    """A particle of mass ``m`` dropped from rest towards a detector ``x`` below.

    SI units throughout. ``sigma`` is the initial position spread of the
    Gaussian packet.
    """

    m: float
    g: float
    x: float
    sigma: float
    hbar: float = HBAR

    def __post_init__(self):
        for name in ("m", "g", "x", "sigma", "hbar"):
            object.__setattr__(self, name, _check_positive(name, getattr(self, name)))

    @classmethod
    def from_dimensionless(cls, q: float, sigma_over_x: float, m: float, g: float,
                           hbar: float = HBAR) -> "PhysicalParams":
        """Solve for ``(x, sigma)`` given the quantumness ratio and ``sigma/x``."""
        q = _check_positive("q", q)
        r = _check_positive("sigma_over_x", sigma_over_x)
        m = _check_positive("m", m)
        g = _check_positive("g", g)
        hbar = _check_positive("hbar", hbar)
        # q = hbar / (2 m r x sqrt(2 g x))  =>  x**1.5 = hbar / (2 m r q sqrt(2g))
        x = (hbar / (2.0 * m * r * q * math.sqrt(2.0 * g))) ** (2.0 / 3.0)
        return cls(m=m, g=g, x=x, sigma=r * x, hbar=hbar)

    def replace(self, **changes) -> "PhysicalParams":
        kw = dict(m=self.m, g=self.g, x=self.x, sigma=self.sigma, hbar=self.hbar)
        kw.update(changes)
        return PhysicalParams(**kw)


@dataclass(frozen=True)
class DerivedScales:
    t_c: float
    tau: float
    q: float
    beta: float
    x0: float
    sigma_p: float
    sigma_over_x: float


def derive_scales(params: PhysicalParams) -> DerivedScales:
    m, g, x, s, hbar = params.m, params.g, params.x, params.sigma, params.hbar
    t_c = math.sqrt(2.0 * x / g)
    tau = 2.0 * m * s * s / hbar
    q = hbar / (2.0 * m * s * math.sqrt(2.0 * g * x))
    ratio = s / x
    return DerivedScales(
        t_c=t_c,
        tau=tau,
        q=q,
        beta=ratio / q,
        x0=(hbar * hbar / (2.0 * m * m * g)) ** (1.0 / 3.0),
        sigma_p=hbar / (2.0 * s),
        sigma_over_x=ratio,
    )


class Regime(str, enum.Enum):
    FAR_FIELD_SEMICLASSICAL = "FAR_FIELD_SEMICLASSICAL"
    FAR_FIELD_QUANTUM = "FAR_FIELD_QUANTUM"
    NEAR_FIELD = "NEAR_FIELD"
    INTERMEDIATE = "INTERMEDIATE"


@dataclass(frozen=True)
class RegimeLabel:
    label: Regime
    margin: float

    def __str__(self) -> str:
        return self.label.value


def classify_regime(scales: DerivedScales, threshold: float = 100.0) -> RegimeLabel:
    """Turn the asymptotic ``<<`` / ``>>`` conditions into factor-``threshold`` tests.

    ``margin`` is the smallest of the ratios that define the returned regime.
    For INTERMEDIATE it is the best margin any regime reached (< threshold).
    """
    if not threshold > 1.0:
        raise ValidationError("threshold", threshold, "must be > 1")
    q = scales.q
    r = scales.sigma_over_x

    far = q / r                      # sigma/x << q
    semiclassical = min(far, 1.0 / q)
    quantum = min(far, q)
    near = r / max(1.0, q, q * q)    # sigma/x >> max(1, q, q^2)

    if semiclassical >= threshold:
        return RegimeLabel(Regime.FAR_FIELD_SEMICLASSICAL, semiclassical)
    if quantum >= threshold:
        return RegimeLabel(Regime.FAR_FIELD_QUANTUM, quantum)
    if near >= threshold:
        return RegimeLabel(Regime.NEAR_FIELD, near)
    return RegimeLabel(Regime.INTERMEDIATE, max(semiclassical, quantum, near))
