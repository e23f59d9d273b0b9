import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from ncbesq.specfun import (BesselIndex, BracketError, ZeroTable, bessel_i, bessel_i_scaled, bessel_j,
                            bessel_j_asymptotic, bessel_j_deriv, bessel_j_series, bessel_zeros, gamma,
                            ibar, ibar_scaled)


def test_index_domain():
    assert BesselIndex(0.5).dimension == 3.0
    with pytest.raises(ValueError):
        BesselIndex(-1.0)
    with pytest.raises(ValueError):
        BesselIndex(float("nan"))


def test_gamma_and_domain():
    assert gamma(5.0) == pytest.approx(24.0, rel=1e-15)
    with pytest.raises(ValueError):
        gamma(0.0)


def test_bessel_j_half_integer_closed_form():
    x = np.array([0.3, 1.0, 7.5])
    assert np.allclose(bessel_j(0.5, x), np.sqrt(2 / (np.pi * x)) * np.sin(x), rtol=1e-14)


def test_bessel_i_overflow_and_scaled():
    with pytest.raises(OverflowError):
        bessel_i(0.0, 1000.0)
    v = bessel_i_scaled(0.0, 1000.0)
    assert v == pytest.approx(1 / math.sqrt(2 * math.pi * 1000) * (1 + 1 / 8000), rel=1e-6)


def test_scaled_i_past_library_range():
    # scipy's ive stops at ~1e9; the Hankel series takes over
    for nu in (0.0, 0.5, 2.0):
        assert bessel_i_scaled(nu, 9.9e7) == pytest.approx(special.ive(nu, 9.9e7), rel=1e-14)
        x = 5e9
        ref = (1 - (4 * nu * nu - 1) / (8 * x)) / math.sqrt(2 * math.pi * x)
        assert bessel_i_scaled(nu, x) == pytest.approx(ref, rel=1e-15)
    assert np.isfinite(ibar_scaled(0.5, 6e17))


def test_negative_argument_rejected():
    with pytest.raises(ValueError):
        bessel_j(0.0, -1.0)


def test_deriv_recurrence_vs_mpmath():
    for nu in (0.0, 0.5, 2.0):
        for x in (0.4, 3.3, 12.0):
            ref = float(mpmath.besselj(nu, x, derivative=1))
            assert bessel_j_deriv(nu, x) == pytest.approx(ref, abs=1e-14)


def test_series_and_asymptotic_agree_with_scipy():
    # series in its range, Hankel expansion in its range
    for nu in (0.0, 0.5, 1.7):
        assert bessel_j_series(nu, 2.5) == pytest.approx(special.jv(nu, 2.5), abs=1e-14)
        assert bessel_j_asymptotic(nu, 60.0) == pytest.approx(special.jv(nu, 60.0), abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.9, 4.0), st.floats(0.0, 30.0))
def test_ibar_matches_mpmath(nu, q):
    ref = float(mpmath.nsum(lambda n: mpmath.mpf(q) ** n / (mpmath.factorial(n) * mpmath.gamma(n + nu + 1)),
                            [0, mpmath.inf]))
    assert ibar(nu, q) == pytest.approx(ref, rel=1e-11)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 4.0), st.floats(0.0, 400.0))
def test_ibar_scaled_consistent(nu, q):
    scaled = ibar_scaled(nu, q)
    if q < 100:
        assert scaled * math.exp(2 * math.sqrt(q)) == pytest.approx(ibar(nu, q), rel=1e-11)
    assert scaled > 0


def test_ibar_negative_argument_is_j():
    # ibar(nu, -q) = q^(-nu/2) J_nu(2 sqrt q)
    nu, q = 0.7, 3.1
    assert ibar(nu, -q) == pytest.approx(q ** (-nu / 2) * special.jv(nu, 2 * math.sqrt(q)), rel=1e-12)


def test_first_zero_j0():
    assert bessel_zeros(0, 5)[0] == pytest.approx(2.404825557695773, abs=1e-15)


@pytest.mark.parametrize("nu", [-0.5, 0.0, 0.5, 1.0, 2.0])
def test_zeros_residual_and_mcmahon(nu):
    j = bessel_zeros(nu, 100).as_array()
    assert np.max(np.abs(special.jv(nu, j))) <= 1e-12
    assert np.all(np.diff(j) > 0)
    # McMahon: j_i ~ (i + nu/2 - 1/4) pi
    assert abs(j[-1] - (100 + nu / 2 - 0.25) * math.pi) < 0.01


def test_zeros_half_integer_exact():
    j = bessel_zeros(0.5, 10).as_array()
    assert np.allclose(j, np.pi * np.arange(1, 11), rtol=1e-14)


def test_zero_table_invariants():
    with pytest.raises(ValueError):
        ZeroTable(0.0, (2.0, 1.0))
    assert issubclass(BracketError, RuntimeError)
    with pytest.raises(ValueError):
        bessel_zeros(0.0, 0)


def test_zeros_cache_prefix_consistent():
    a = bessel_zeros(1.3, 30).as_array()
    b = bessel_zeros(1.3, 10).as_array()
    assert np.array_equal(a[:10], b)
