import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from hetnetlab.ratemodel import (
    RateParams,
    RayleighShannonRate,
    TabulatedRate,
    as_rate_model,
    inverse_rate,
    peak_rate,
    rayleigh_spectral_efficiency,
    scaled_exp1,
)


def fading_average(s):
    """E[log2(1 + h s)] for h ~ Exp(1), by direct quadrature."""
    f = lambda h: math.log1p(h * s) * math.exp(-h) / math.log(2.0)
    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def test_closed_form_matches_quadrature():
    s = np.logspace(-3, 4, 40)
    closed = rayleigh_spectral_efficiency(s)
    brute = np.array([fading_average(x) for x in s])
    assert np.max(np.abs(closed / brute - 1.0)) < 1e-6


# exp(x) E1(x) at 50 significant digits (mpmath), frozen
SCALED_EXP1 = [
    (1e-3, 6.337874070325487977),
    (1.0, 0.59634736232319407434),
    (10.0, 0.091563333939788081876),
    (499.9, 0.0019964143938240482893),
    (500.1, 0.0019956175747443839364),
    (1e4, 0.00009999000199940023988),
    (1e6, 9.99999000001999994e-7),
]


@pytest.mark.parametrize("x,expected", SCALED_EXP1)
def test_scaled_exp1_reference_values(x, expected):
    assert scaled_exp1(np.array([x]))[0] == pytest.approx(expected, rel=1e-14)


def test_scaled_exp1_at_zero_is_infinite():
    assert np.isinf(scaled_exp1(np.array([0.0]))[0])


def test_rate_reference_values():
    # 0.3 * 5 MHz * e E1(1) / ln 2
    assert peak_rate(1.0) == pytest.approx(1290521.0734063289, rel=1e-12)
    assert peak_rate(10.0) / peak_rate(1.0) == pytest.approx(3.3783037739279944, rel=1e-12)
    assert rayleigh_spectral_efficiency(1.0) == pytest.approx(0.8603473822708859, rel=1e-12)


def test_rate_params_scale_linearly():
    p = RateParams(bandwidth_hz=10e6, efficiency=0.6)
    assert peak_rate(3.0, p) == pytest.approx(4 * peak_rate(3.0))
    with pytest.raises(ValueError):
        RateParams(bandwidth_hz=0.0)
    with pytest.raises(ValueError):
        RateParams(efficiency=1.5)


def test_zero_sinr():
    assert peak_rate(0.0) == 0.0
    assert math.isinf(inverse_rate(0.0))
    out = inverse_rate(np.array([0.0, 1.0]))
    assert np.isinf(out[0]) and np.isfinite(out[1])


def test_low_and_high_sinr_limits():
    # small s: E[log2(1 + h s)] ~ s / ln 2; large s: ~ log2(s) - gamma / ln 2
    s = 1e-6
    assert rayleigh_spectral_efficiency(s) == pytest.approx(s / math.log(2), rel=1e-5)
    s = 1e8
    assert rayleigh_spectral_efficiency(s) == pytest.approx(math.log2(s) - np.euler_gamma / math.log(2), rel=1e-7)


@given(a=st.floats(1e-6, 1e7), b=st.floats(1e-6, 1e7))
def test_rate_is_increasing(a, b):
    if a == b:
        return
    lo, hi = sorted((a, b))
    assert peak_rate(lo) < peak_rate(hi)
    assert inverse_rate(lo) > inverse_rate(hi)


@given(s=st.floats(1e-8, 1e9))
def test_inverse_is_reciprocal(s):
    assert inverse_rate(s) * peak_rate(s) == pytest.approx(1.0, rel=1e-14)


def test_tabulated_rate_accuracy():
    tab = TabulatedRate()
    s = np.logspace(-4, 6, 5001)
    exact = peak_rate(s)
    assert np.max(np.abs(tab.peak_rate(s) / exact - 1)) < 1e-6
    # outside the table it defers to the exact model
    assert tab.peak_rate(1e-6) == pytest.approx(peak_rate(1e-6), rel=1e-15)
    assert math.isinf(tab.inverse_rate(0.0))


def test_as_rate_model():
    assert isinstance(as_rate_model(None), RayleighShannonRate)
    m = as_rate_model(RateParams(efficiency=0.5))
    assert m.peak_rate(1.0) == pytest.approx(peak_rate(1.0) * 5 / 3)
    tab = TabulatedRate()
    assert as_rate_model(tab) is tab
    with pytest.raises(TypeError):
        as_rate_model(3.0)
