"""Arrival-time law of a Gaussian packet dropped in uniform gravity.

The position outcome at time ``t`` is ``X_t = g t^2/2 + xi * sigma(t)`` with
``xi`` standard normal. Solving ``X_T = x`` for ``T`` gives a strictly
decreasing map from ``xi in (-inf, x/sigma]`` onto ``[0, inf)``; outcomes with
``xi > x/sigma`` start below the detector and are excluded, so every arrival
statistic is conditional on ``xi <= x/sigma`` with weight ``Phi(x/sigma)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .params import DerivedScales, PhysicalParams, derive_scales

__all__ = ["DomainError", "ToaDistribution"]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    """Raised for ``xi > x/sigma``, where no arrival-time preimage exists."""


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


@dataclass(frozen=True)
class ToaDistribution:
    """Exact time-of-arrival distribution at height ``params.x``.

    All methods accept scalars or numpy arrays and return the same shape.
    """

    params: PhysicalParams
    scales: DerivedScales = field(init=False)
    norm: float = field(init=False)
    upper: float = field(init=False)

    def __post_init__(self):
        scales = derive_scales(self.params)
        upper = self.params.x / self.params.sigma
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "norm", float(ndtr(upper)))

    @classmethod
    def from_values(cls, m, g, x, sigma, **kw) -> "ToaDistribution":
        return cls(PhysicalParams(m=m, g=g, x=x, sigma=sigma, **kw))

    @property
    def t_c(self) -> float:
        return self.scales.t_c

    @property
    def _b(self) -> float:
        # The (1/(4 q^2)) (sigma/x)^2 term of the radicand is b^2.
        return 0.5 * self.scales.sigma_over_x / self.scales.q

    # -- position law ------------------------------------------------------

    def position_mean(self, t):
        t = np.asarray(t, dtype=float)
        return _out(0.5 * self.params.g * t * t)

    def position_sigma(self, t):
        t = np.asarray(t, dtype=float)
        return _out(self.params.sigma * np.hypot(1.0, t / self.scales.tau))

    def position_pdf(self, xpt, t):
        s = np.asarray(self.position_sigma(t))
        z = (np.asarray(xpt, dtype=float) - self.position_mean(t)) / s
        return _out(_phi(z) / s)

    # -- xi <-> T maps -----------------------------------------------------

    def _check_domain(self, xi: np.ndarray):
        if np.any(xi > self.upper):
            bad = float(np.max(xi))
            raise DomainError(f"xi={bad!r} exceeds x/sigma={self.upper!r}")

    def _radicand(self, xi: np.ndarray):
        """Return ``(T/t_c)^2`` and ``(T/t_c)^2 - 1``, both cancellation-free.

        For ``xi > 0`` the naive ``1 + 2p^2 - 2pS`` loses every digit as
        ``xi -> x/sigma``; the product form uses
        ``(1 + 2p^2)^2 - 4p^2 S^2 = 1 - (xi sigma/x)^2``.
        """
        p = self.scales.q * xi
        b = self._b
        s = np.hypot(1.0, np.hypot(p, b))
        r = xi / self.upper
        pos = p > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            rad, rad_m1 = self._branches(p, b, s, r, pos)
        return np.maximum(rad, 0.0), rad_m1

    @staticmethod
    def _branches(p, b, s, r, pos):
        # np.where evaluates both sides; the unused one may divide by zero
        rad = np.where(pos, (1.0 - r) * (1.0 + r) / (1.0 + 2.0 * p * p + 2.0 * p * s),
                       1.0 + 2.0 * p * (p - s))
        rad_m1 = np.where(pos, -2.0 * p * (1.0 + b * b) / (p + s), 2.0 * p * (p - s))
        return rad, rad_m1

    def toa_map(self, xi):
        """Arrival time for the standard-normal outcome ``xi <= x/sigma``."""
        xi = np.asarray(xi, dtype=float)
        self._check_domain(xi)
        rad, _ = self._radicand(xi)
        return _out(self.t_c * np.sqrt(rad))

    def toa_offset(self, xi):
        """``toa_map(xi) - t_c`` evaluated without subtractive cancellation."""
        xi = np.asarray(xi, dtype=float)
        self._check_domain(xi)
        rad, rad_m1 = self._radicand(xi)
        return _out(self.t_c * rad_m1 / (1.0 + np.sqrt(rad)))

    def toa_map_farfield(self, xi):
        xi = np.asarray(xi, dtype=float)
        self._check_domain(xi)
        p = self.scales.q * xi
        # sqrt(1 + p^2) - p, rewritten for p > 0 to avoid cancellation
        h = np.hypot(1.0, p)
        return _out(self.t_c * np.where(p > 0.0, 1.0 / (h + np.abs(p)), h - p))

    def toa_map_nearfield(self, xi):
        xi = np.asarray(xi, dtype=float)
        self._check_domain(xi)
        return _out(self.t_c * np.sqrt(np.maximum(1.0 - xi / self.upper, 0.0)))

    def xi_of_time(self, t):
        """Inverse of :meth:`toa_map`: the ``xi`` whose trajectory reaches ``x`` at ``t``."""
        t = np.asarray(t, dtype=float)
        t_c = self.t_c
        num = 0.5 * self.params.g * (t_c - t) * (t_c + t)
        return _out(num / self.position_sigma(t))

    def dxi_dt(self, t):
        t = np.asarray(t, dtype=float)
        g, x, sigma, tau = self.params.g, self.params.x, self.params.sigma, self.scales.tau
        s = np.hypot(1.0, t / tau)
        return _out(-t * (g + (0.5 * g * t * t + x) / (tau * tau)) / (sigma * s ** 3))

    # -- arrival-time law --------------------------------------------------

    def toa_pdf(self, t):
        t = np.asarray(t, dtype=float)
        xi = self.xi_of_time(t)
        dens = _phi(xi) * np.abs(self.dxi_dt(t)) / self.norm
        return _out(np.where(t >= 0.0, dens, 0.0))

    def toa_cdf(self, t):
        """``P(T <= t) = (Phi(x/sigma) - Phi(xi(t))) / Phi(x/sigma)``."""
        t = np.asarray(t, dtype=float)
        xi = np.asarray(self.xi_of_time(np.maximum(t, 0.0)))
        u = self.upper
        # upper-tail differences stay accurate when both arguments are positive
        mass = np.where(xi > 0.0, ndtr(-xi) - ndtr(-u), ndtr(u) - ndtr(xi))
        return _out(np.clip(mass / self.norm, 0.0, 1.0))

    def toa_sf(self, t):
        t = np.asarray(t, dtype=float)
        xi = np.asarray(self.xi_of_time(np.maximum(t, 0.0)))
        return _out(np.clip(ndtr(xi) / self.norm, 0.0, 1.0))

    def xi_quantile(self, p):
        """Quantile of the conditioned ``xi`` law (``P(xi' <= xi) = p``)."""
        p = np.asarray(p, dtype=float)
        target = p * self.norm
        # near the top use the upper tail: 1 - p*N = Phi(-u) + (1 - p) N
        upper_tail = ndtr(-self.upper) + (1.0 - p) * self.norm
        xi = np.where(target <= 0.5, ndtri(np.minimum(target, 0.5)),
                      -ndtri(np.clip(upper_tail, 0.0, 0.5)))
        return _out(np.minimum(xi, self.upper))

    def toa_quantile(self, p):
        """Arrival time ``t`` with ``toa_cdf(t) = p``."""
        p = np.asarray(p, dtype=float)
        return self.toa_map(self.xi_quantile(1.0 - p))


def _out(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a
