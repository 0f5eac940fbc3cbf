import math

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freefall_toa import (
    HBAR,
    DerivedScales,
    PhysicalParams,
    Regime,
    ValidationError,
    classify_regime,
    derive_scales,
)

mp.mp.dps = 40


def _hp_scales(m, g, x, s, hbar):
    m, g, x, s, hbar = (mp.mpf(v) for v in (m, g, x, s, hbar))
    return {
        "t_c": mp.sqrt(2 * x / g),
        "tau": 2 * m * s ** 2 / hbar,
        "q": hbar / (2 * m * s * mp.sqrt(2 * g * x)),
        "x0": mp.cbrt(hbar ** 2 / (2 * m ** 2 * g)),
        "sigma_p": hbar / (2 * s),
    }


def test_derive_scales_hydrogen(hydrogen_params):
    sc = derive_scales(hydrogen_params)
    ref = _hp_scales(1.67e-27, 9.8, 1e-5, 1e-6, HBAR)
    for name, val in ref.items():
        assert getattr(sc, name) == pytest.approx(float(val), rel=1e-14)
    assert sc.t_c == pytest.approx(1.4286e-3, rel=1e-4)
    assert sc.q == pytest.approx(2.2553, rel=1e-4)


def test_x0_hydrogen():
    sc = derive_scales(PhysicalParams(m=1.67e-27, g=9.8, x=1e-5, sigma=1e-6))
    assert sc.x0 == pytest.approx(5.876e-6, rel=1e-3)
    # near-field validity threshold x0 / 2^(2/3)
    assert sc.x0 / 2 ** (2 / 3) == pytest.approx(0.630 * sc.x0, rel=1e-3)


@pytest.mark.parametrize("field", ["m", "g", "x", "sigma", "hbar"])
@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_rejects_non_positive(field, bad):
    kw = dict(m=1.0, g=1.0, x=1.0, sigma=1.0, hbar=1.0)
    kw[field] = bad
    with pytest.raises(ValidationError) as exc:
        PhysicalParams(**kw)
    assert exc.value.field == field


positive = st.floats(min_value=1e-6, max_value=1e6)


@settings(max_examples=300, deadline=None)
@given(m=positive, g=positive, x=positive, s=positive, hbar=positive)
def test_q_beta_is_sigma_over_x(m, g, x, s, hbar):
    sc = derive_scales(PhysicalParams(m=m, g=g, x=x, sigma=s, hbar=hbar))
    assert abs(sc.q * sc.beta - s / x) <= 4 * math.ulp(s / x)
    assert min(sc.t_c, sc.tau, sc.q, sc.beta, sc.x0, sc.sigma_p) > 0


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_hbar_scaling(hydrogen_params, lam):
    base = derive_scales(hydrogen_params)
    scaled = derive_scales(hydrogen_params.replace(hbar=lam * hydrogen_params.hbar))
    assert scaled.q == pytest.approx(lam * base.q, rel=1e-14)
    assert scaled.tau == pytest.approx(base.tau / lam, rel=1e-14)
    assert scaled.t_c == base.t_c


def test_from_dimensionless_round_trip():
    p = PhysicalParams.from_dimensionless(0.37, 2.5e-3, 1.67e-27, 9.8)
    sc = derive_scales(p)
    assert sc.q == pytest.approx(0.37, rel=1e-13)
    assert sc.sigma_over_x == pytest.approx(2.5e-3, rel=1e-15)


def _scales(q, r):
    return DerivedScales(t_c=1.0, tau=1.0, q=q, beta=r / q, x0=1.0, sigma_p=1.0,
                         sigma_over_x=r)


@pytest.mark.parametrize("q, r, label", [
    (1e-4, 1e-8, Regime.FAR_FIELD_SEMICLASSICAL),
    (1e3, 1.0, Regime.FAR_FIELD_QUANTUM),
    (0.5, 0.5, Regime.INTERMEDIATE),
    (1e-2, 1e3, Regime.NEAR_FIELD),
    (10.0, 1e5, Regime.NEAR_FIELD),
    (10.0, 1e3, Regime.INTERMEDIATE),
])
def test_classify_examples(q, r, label):
    assert classify_regime(_scales(q, r)).label is label


def test_classify_margin():
    lab = classify_regime(_scales(1e3, 1.0))
    assert lab.margin == pytest.approx(1e3)
    lab = classify_regime(_scales(0.5, 0.5))
    assert lab.margin < 100


def test_threshold_validation():
    with pytest.raises(ValidationError):
        classify_regime(_scales(1.0, 1.0), threshold=1.0)


@settings(max_examples=500, deadline=None)
@given(lq=st.floats(-8, 8), lr=st.floats(-10, 10), th=st.floats(1.01, 1e4))
def test_classify_total_and_consistent(lq, lr, th):
    q, r = 10.0 ** lq, 10.0 ** lr
    lab = classify_regime(_scales(q, r), threshold=th)
    conds = {
        Regime.FAR_FIELD_SEMICLASSICAL: q / r >= th and 1 / q >= th,
        Regime.FAR_FIELD_QUANTUM: q / r >= th and q >= th,
        Regime.NEAR_FIELD: r / max(1, q, q * q) >= th,
    }
    assert sum(conds.values()) <= 1
    if any(conds.values()):
        assert conds[lab.label]
    else:
        assert lab.label is Regime.INTERMEDIATE
