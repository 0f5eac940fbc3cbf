import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from freefall_toa import DomainError, PhysicalParams, ToaDistribution

from conftest import G, HBAR, M_H, REGIMES, make_dist, quad_pdf


def quartic_root(dist, xi):
    """Independent route: solve g T^2/2 + sigma xi sqrt(1 + T^2/tau^2) = x by bracketing."""
    p, tau = dist.params, dist.scales.tau

    def f(t):
        return 0.5 * p.g * t * t + p.sigma * xi * math.sqrt(1.0 + (t / tau) ** 2) - p.x

    hi = dist.t_c
    while f(hi) < 0:
        hi *= 2.0
    return optimize.brentq(f, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)


# -- position law ---------------------------------------------------------

def test_position_mean():
    d = ToaDistribution(PhysicalParams(m=M_H, g=9.8, x=1e-5, sigma=1e-6))
    assert d.position_mean(0.0) == 0.0
    assert d.position_mean(1e-3) == pytest.approx(4.9e-6, rel=1e-15)
    assert d.position_mean(d.t_c) == pytest.approx(1e-5, rel=1e-15)


def test_position_sigma():
    d = ToaDistribution(PhysicalParams(m=M_H, g=9.8, x=1e-5, sigma=1e-6))
    s, tau = d.params.sigma, d.scales.tau
    assert d.position_sigma(0.0) == s
    assert d.position_sigma(tau) == pytest.approx(s * math.sqrt(2), rel=1e-15)
    t = 100 * tau
    assert abs(d.position_sigma(t) / (s * t / tau) - 1) < 1e-4


def test_position_pdf():
    d = ToaDistribution(PhysicalParams(m=M_H, g=9.8, x=1e-5, sigma=1e-6))
    t = 0.7 * d.t_c
    mu, s = d.position_mean(t), d.position_sigma(t)
    assert d.position_pdf(mu, t) == pytest.approx(1 / (s * math.sqrt(2 * math.pi)), rel=1e-15)
    assert d.position_pdf(mu + 0.3 * s, t) == pytest.approx(d.position_pdf(mu - 0.3 * s, t),
                                                            rel=1e-15)
    mass = integrate.quad(lambda y: d.position_pdf(y, t), mu - 40 * s, mu + 40 * s,
                          points=[mu], epsabs=0, epsrel=1e-13)[0]
    assert abs(mass - 1) < 1e-10


# -- toa_map --------------------------------------------------------------

def test_toa_map_at_zero_is_classical(regime_dist):
    assert regime_dist.toa_map(0.0) == regime_dist.t_c


def test_toa_map_vanishes_at_domain_edge(regime_dist):
    assert regime_dist.toa_map(regime_dist.upper) <= 1e-8 * regime_dist.t_c


def test_edge_identity_high_precision():
    # (1 + 2a^2)^2 = 4a^2 (1 + a^2 + b^2) when ab = 1/2: the naive radicand is 0
    mp.mp.dps = 60
    for a in ("0.01", "1", "37.5", "1e4"):
        a = mp.mpf(a)
        b = 1 / (2 * a)
        lhs = (1 + 2 * a * a) ** 2
        rhs = 4 * a * a * (1 + a * a + b * b)
        assert abs(lhs - rhs) < mp.mpf(10) ** -50 * lhs


@pytest.mark.parametrize("name", sorted(REGIMES))
def test_toa_map_matches_quartic_root(name):
    d = make_dist(*REGIMES[name])
    xis = [x for x in (-30.0, -6.0, -1.0, -0.2, 0.0, 0.3, 1.0, 4.0, 0.999 * d.upper)
           if x <= d.upper]
    for xi in xis:
        ref = quartic_root(d, xi)
        assert d.toa_map(xi) == pytest.approx(ref, rel=1e-9, abs=1e-13 * d.t_c)


def test_toa_map_farfield_semiclassical_expansion():
    d = make_dist(1e-4, 1e-8)
    q = d.scales.q
    assert d.toa_map(1.0) == pytest.approx(d.t_c * (1 - q + q * q / 2), rel=1e-9)


def test_domain_error():
    d = make_dist(0.5, 0.5)
    with pytest.raises(DomainError):
        d.toa_map(d.upper * (1 + 1e-12))
    with pytest.raises(DomainError):
        d.toa_map_farfield(np.array([0.0, 3.0]))
    with pytest.raises(DomainError):
        d.toa_map_nearfield(2.5)


def test_asymptotic_maps_examples():
    d = make_dist(1e3, 1e-2)
    assert d.toa_map_farfield(0.0) == d.t_c
    q = d.scales.q
    assert d.toa_map_farfield(-1.0) == pytest.approx(q * d.t_c * 2.0, rel=1e-3)
    assert d.toa_map(-1.0) == pytest.approx(q * d.t_c * 2.0, rel=1e-3)
    dn = make_dist(1.0, 1e4)
    assert dn.toa_map_nearfield(0.0) == dn.t_c


def test_monotone_on_random_parameter_sets():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        q = 10 ** rng.uniform(-3, 3)
        r = 10 ** rng.uniform(-3, 3)
        d = make_dist(q, r)
        top = min(5.0, d.upper)
        xi = np.sort(rng.uniform(-5.0, top, size=(10, 2)), axis=1)
        xi = xi[xi[:, 1] - xi[:, 0] > 1e-3]
        t = d.toa_map(xi)
        assert np.all(t[:, 0] > t[:, 1])
        assert np.all(t >= 0)


def _farfield_sup(q, r):
    d = make_dist(q, r)
    xi = np.linspace(-5.0, min(5.0, d.upper), 2001)
    return np.max(np.abs(d.toa_map(xi) - d.toa_map_farfield(xi))) / d.t_c


def _nearfield_sup(q, r):
    d = make_dist(q, r)
    xi = np.linspace(-5.0, min(5.0, d.upper), 2001)
    return np.max(np.abs(d.toa_map(xi) - d.toa_map_nearfield(xi))) / d.t_c


@pytest.mark.xfail(strict=True, reason="at the domain edge the far-field map leaves "
                   "t_c sigma/(2 q x), up to 5e-3 at factor 100")
def test_farfield_consistency_factor_100():
    rng = np.random.default_rng(11)
    worst = max(_farfield_sup(10 ** lq, 10 ** lq / 100 * 10 ** lr)
                for lq, lr in zip(rng.uniform(-3, 3, 200), rng.uniform(-3, 0, 200)))
    assert worst <= 1e-3


def test_farfield_edge_deviation_is_half_beta_ratio():
    q, r = 100.0, 1.0
    d = make_dist(q, r)
    edge = d.toa_map_farfield(d.upper) / d.t_c
    assert edge == pytest.approx(r / (2 * q), rel=1e-4)
    assert d.toa_map(d.upper) == 0.0


def test_farfield_consistency():
    # the edge term is r/(2q), so factor 500 keeps the whole sup under 1e-3
    rng = np.random.default_rng(11)
    for lq, lr in zip(rng.uniform(-3, 3, 200), rng.uniform(-3, 0, 200)):
        q = 10 ** lq
        assert _farfield_sup(q, q / 500 * 10 ** lr) <= 1e-3


@pytest.mark.xfail(strict=True, reason="the neglected 2 q^2 xi^2 term shifts T by "
                   "order q^2 xi^2 / sqrt(r xi) of t_c at factor 100")
def test_nearfield_consistency_factor_100():
    rng = np.random.default_rng(13)
    worst = max(_nearfield_sup(10 ** lq, 100 * max(1.0, 10 ** lq, 10 ** (2 * lq)))
                for lq in rng.uniform(-3, 2, 100))
    assert worst <= 1e-3


def test_nearfield_consistency():
    # relative to the local time scale the near-field map converges once
    # sigma/x >= 1e4 max(1, q, q^2)
    rng = np.random.default_rng(13)
    for _ in range(200):
        q = 10 ** rng.uniform(-3, 2)
        r = 1e4 * max(1.0, q, q * q) * 10 ** rng.uniform(0, 2)
        d = make_dist(q, r)
        xi = np.linspace(-5.0, min(5.0, d.upper), 2001)
        t, tn = d.toa_map(xi), d.toa_map_nearfield(xi)
        assert np.max(np.abs(t - tn) / np.maximum(tn, d.t_c)) <= 1e-3


def test_classical_limit():
    base = PhysicalParams(m=M_H, g=G, x=1e-3, sigma=1e-7)
    for lam in (1e-2, 1e-4, 1e-8):
        d = ToaDistribution(base.replace(hbar=lam * HBAR))
        xi = np.array([-2.0, -0.5, 0.5, 2.0])
        # residual offset is sigma xi / (g t_c) from the initial displacement alone
        shift = d.t_c * np.sqrt(1 - xi * base.sigma / base.x)
        assert np.max(np.abs(d.toa_map(xi) / shift - 1)) < 3 * d.scales.q + 1e-12


# -- inverse map ----------------------------------------------------------

def test_xi_of_time_examples(regime_dist):
    d = regime_dist
    assert d.xi_of_time(0.0) == pytest.approx(d.upper, rel=1e-15)
    assert d.xi_of_time(d.t_c) == 0.0


def test_round_trip_log_spaced(regime_dist):
    d = regime_dist
    t = np.geomspace(1e-3, 10.0, 1000) * d.t_c
    back = d.toa_map(np.minimum(d.xi_of_time(t), d.upper))
    assert np.max(np.abs(back / t - 1)) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(lq=st.floats(-3, 3), lr=st.floats(-3, 3), lt=st.floats(-3, 1))
def test_round_trip_property(lq, lr, lt):
    d = make_dist(10 ** lq, 10 ** lr)
    t = 10 ** lt * d.t_c
    assert d.toa_map(min(d.xi_of_time(t), d.upper)) == pytest.approx(t, rel=1e-9)


def test_xi_of_time_decreasing(regime_dist):
    t = np.geomspace(1e-4, 50, 500) * regime_dist.t_c
    assert np.all(np.diff(regime_dist.xi_of_time(t)) < 0)


def test_dxi_dt_matches_finite_difference(regime_dist):
    d = regime_dist
    for t in (0.3 * d.t_c, d.t_c, 4 * d.t_c):
        h = 1e-6 * t
        fd = (d.xi_of_time(t + h) - d.xi_of_time(t - h)) / (2 * h)
        assert d.dxi_dt(t) == pytest.approx(fd, rel=1e-6)


# -- density and CDF ------------------------------------------------------

def test_pdf_zero_at_origin(regime_dist):
    assert regime_dist.toa_pdf(0.0) == 0.0


def test_pdf_normalised(regime_dist):
    d = regime_dist
    total = quad_pdf(d, 0.0, float(d.toa_map(-40.0)))
    assert abs(total - 1.0) <= 1e-9


def test_pdf_nonnegative(regime_dist):
    t = np.geomspace(1e-6, 1e3, 5000) * regime_dist.t_c
    assert np.all(regime_dist.toa_pdf(t) >= 0)


def test_semiclassical_mass_near_tc():
    d = make_dist(1e-4, 1e-6)
    assert quad_pdf(d, 0.99 * d.t_c, 1.01 * d.t_c) > 0.999


def test_cdf_limits(regime_dist):
    assert regime_dist.toa_cdf(0.0) == 0.0
    assert regime_dist.toa_cdf(1e12 * regime_dist.t_c) == 1.0


def test_cdf_matches_integrated_pdf(regime_dist):
    d = regime_dist
    lo, hi = d.toa_quantile(1e-6), d.toa_quantile(1 - 1e-6)
    checkpoints = np.linspace(lo, hi, 100)
    prev_t, acc = 0.0, 0.0
    for t in checkpoints:
        acc += quad_pdf(d, prev_t, float(t))
        prev_t = float(t)
        assert abs(acc - d.toa_cdf(t)) <= 1e-8


def test_cdf_monotone(regime_dist):
    t = np.geomspace(1e-5, 1e4, 3000) * regime_dist.t_c
    assert np.all(np.diff(regime_dist.toa_cdf(t)) >= 0)


def test_quantile_inverts_cdf(regime_dist):
    p = np.array([1e-6, 0.01, 0.3, 0.5, 0.9, 1 - 1e-6])
    t = regime_dist.toa_quantile(p)
    np.testing.assert_allclose(regime_dist.toa_cdf(t), p, rtol=1e-6, atol=1e-12)


def test_sf_complements_cdf(regime_dist):
    t = np.geomspace(1e-3, 1e2, 50) * regime_dist.t_c
    np.testing.assert_allclose(regime_dist.toa_cdf(t) + regime_dist.toa_sf(t), 1.0, atol=1e-14)


def test_norm_range():
    for q, r in REGIMES.values():
        d = make_dist(q, r)
        assert 0.5 < d.norm <= 1.0
    assert make_dist(1.0, 1e4).norm < 0.5001
