"""Arrival-time moments, uncertainty products and energy spread.

Moments come from adaptive quadrature over the conditioned normal variable
``xi``; the closed-form asymptotes are kept alongside for comparison rows and
tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ToaDistribution
from .params import PhysicalParams, RegimeLabel, classify_regime
from .quadrature import truncated_gaussian_expect

__all__ = [
    "DEFAULT_TOL",
    "BOUND_SLACK",
    "FAR_QUANTUM_FACTOR",
    "K_NEAR",
    "NEAR_MEAN_FACTOR",
    "NEAR_SECOND_FACTOR",
    "MomentReport",
    "UncertaintyReport",
    "EnergyReport",
    "toa_moments",
    "delta_toa",
    "mean_toa_delay",
    "uncertainty_product",
    "energy_moments",
    "time_energy_product",
    "product_bound",
    "delta_toa_semiclassical",
    "delta_toa_far_quantum",
    "delta_toa_nearfield",
    "mean_toa_far_quantum",
    "mean_toa_nearfield",
    "second_moment_nearfield",
]

DEFAULT_TOL = 1e-10
BOUND_SLACK = 1e-6

_G34 = math.gamma(0.75)
FAR_QUANTUM_FACTOR = math.sqrt(2.0 * (math.pi - 1.0) / math.pi)
NEAR_MEAN_FACTOR = 2.0 ** 0.25 * _G34 / math.sqrt(math.pi)
NEAR_SECOND_FACTOR = math.sqrt(2.0 / math.pi)
K_NEAR = math.sqrt(NEAR_SECOND_FACTOR * (1.0 - _G34 ** 2 / math.sqrt(math.pi)))


@dataclass(frozen=True)
class MomentReport:
    mean_toa: float
    second_moment: float
    std_toa: float
    abs_error_estimate: float
    n_evals: int
    delay: float = 0.0  # mean_toa - t_c, computed without cancellation


@dataclass(frozen=True)
class UncertaintyReport:
    delta_t: float
    delta_x: float
    product: float
    bound: float
    ratio: float
    regime: RegimeLabel


@dataclass(frozen=True)
class EnergyReport:
    mean_energy: float
    mean_energy_sq: float
    delta_e: float


def toa_moments(dist: ToaDistribution, tol: float = DEFAULT_TOL) -> MomentReport:
    """Mean, second moment and spread of the arrival time.

    The spread is formed from the offset ``T - t_c`` rather than from ``T``
    itself; in the semiclassical limit ``Var T / E[T^2] ~ q^2`` and the naive
    difference of moments would lose most of its digits.
    """
    t_c = dist.t_c

    def integrand(xi):
        rad, rad_m1 = dist._radicand(xi)
        t = np.sqrt(rad)
        d = rad_m1 / (1.0 + t)
        return np.vstack([t, rad, d, d * d])

    res = truncated_gaussian_expect(integrand, dist.upper, tol=tol)
    m1, m2, d1, d2 = res.value
    e1, e2, ed1, ed2 = res.error
    var = max(d2 - d1 * d1, 0.0)
    std = math.sqrt(var)
    var_err = ed2 + 2.0 * abs(d1) * ed1
    std_err = var_err / (2.0 * std) if std > 0.0 else math.sqrt(var_err)
    return MomentReport(
        mean_toa=t_c * m1,
        second_moment=t_c * t_c * m2,
        std_toa=t_c * std,
        abs_error_estimate=t_c * max(e1, std_err),
        n_evals=res.n_evals,
        delay=t_c * d1,
    )


def delta_toa(dist: ToaDistribution, tol: float = DEFAULT_TOL) -> float:
    return toa_moments(dist, tol).std_toa


def mean_toa_delay(dist: ToaDistribution, tol: float = DEFAULT_TOL) -> float:
    """``E[T] - t_c``; nonnegative up to quadrature error."""
    return toa_moments(dist, tol).delay


def product_bound(params: PhysicalParams) -> float:
    return params.hbar / (2.0 * params.m * params.g)


def uncertainty_product(dist: ToaDistribution, t: float = 0.0,
                        tol: float = DEFAULT_TOL,
                        moments: MomentReport | None = None) -> UncertaintyReport:
    """Arrival-time spread times position spread at time ``t``."""
    if not t >= 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    if moments is None:
        moments = toa_moments(dist, tol)
    dt = moments.std_toa
    dx = dist.position_sigma(t)
    bound = product_bound(dist.params)
    return UncertaintyReport(
        delta_t=dt,
        delta_x=dx,
        product=dt * dx,
        bound=bound,
        ratio=dt * dx / bound,
        regime=classify_regime(dist.scales),
    )


def energy_moments(params: PhysicalParams) -> EnergyReport:
    m, g, s, hbar = params.m, params.g, params.sigma, params.hbar
    kinetic = hbar * hbar / (8.0 * m * s * s)
    grav = m * g * s
    mean_sq = 3.0 * kinetic * kinetic + grav * grav
    # mg sigma sqrt(1 + hbar^4/(32 m^4 g^2 sigma^6)) == hypot(mg sigma, sqrt(2) <H>)
    return EnergyReport(
        mean_energy=kinetic,
        mean_energy_sq=mean_sq,
        delta_e=math.hypot(grav, math.sqrt(2.0) * kinetic),
    )


def time_energy_product(params: PhysicalParams, tol: float = DEFAULT_TOL,
                        moments: MomentReport | None = None) -> tuple[float, float]:
    """``(Delta E * Delta T, hbar/2)``."""
    if moments is None:
        moments = toa_moments(ToaDistribution(params), tol)
    return energy_moments(params).delta_e * moments.std_toa, 0.5 * params.hbar


# closed-form asymptotes ------------------------------------------------------

def delta_toa_semiclassical(params: PhysicalParams) -> float:
    return params.hbar / (2.0 * params.m * params.g * params.sigma)


def delta_toa_far_quantum(params: PhysicalParams) -> float:
    return delta_toa_semiclassical(params) * FAR_QUANTUM_FACTOR


def delta_toa_nearfield(params: PhysicalParams) -> float:
    return K_NEAR * math.sqrt(2.0 * params.sigma / params.g)


def mean_toa_far_quantum(params: PhysicalParams) -> float:
    # q t_c (|xi| - xi) averaged over the unit normal
    return delta_toa_semiclassical(params) * math.sqrt(2.0 / math.pi)


def mean_toa_nearfield(params: PhysicalParams) -> float:
    t_c = math.sqrt(2.0 * params.x / params.g)
    return NEAR_MEAN_FACTOR * t_c * math.sqrt(params.sigma / params.x)


def second_moment_nearfield(params: PhysicalParams) -> float:
    return NEAR_SECOND_FACTOR * (2.0 * params.x / params.g) * params.sigma / params.x
