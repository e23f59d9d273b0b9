import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from ncbesq.biortho import S_tilde
from ncbesq.densities import p_J, p_nu
from ncbesq.kernels import (DEFAULT_CUTOFF, KernelHandle, ToleranceWarning, _extended_branch, bessel_kernel,
                            extended_bessel_kernel, infinite_ladder, kernel_contour, kernel_finite,
                            kernel_infinite, kernel_J, relaxation_kernel, relaxation_remainder, rho_nu)
from ncbesq.pointconf import PointConfiguration, canonical_config
from ncbesq.specfun import bessel_zeros

XS = np.array([0.5, 1.5, 3.0])


def _quad(f, a=0.0, b=np.inf):
    return integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-11, limit=400)[0]


@pytest.mark.parametrize("s,t", [(0.5, 0.5), (0.4, 0.9), (0.9, 0.4)])
def test_finite_equals_S_tilde(s, t):
    xi = [1.0, 3.0]
    X, Y = np.meshgrid(XS, XS, indexing="ij")
    K = kernel_finite(0.5, xi, s, X, t, Y)
    ref = np.vectorize(lambda x, y: S_tilde(0.5, xi, s, x, t, y))(X, Y)
    assert np.max(np.abs(K - ref)) <= 1e-6


def test_finite_methods_agree():
    xi = [1.0, 2.0, 4.0]
    a = kernel_finite(0.5, xi, 0.6, XS, 0.8, XS[::-1])
    b = kernel_finite(0.5, xi, 0.6, XS, 0.8, XS[::-1], method="quadrature")
    assert np.max(np.abs(a - b)) <= 1e-8


def test_finite_trace_and_localization():
    xi = [1.0, 3.0]
    assert _quad(lambda x: kernel_finite(0.5, xi, 0.7, x, 0.7, x)) == pytest.approx(2.0, abs=1e-4)
    t = 1e-3
    near = _quad(lambda x: kernel_finite(0.5, xi, t, x, t, x), 0.5, 1.5)
    assert near == pytest.approx(1.0, abs=1e-2)


def test_finite_rejects_repeated_atoms():
    with pytest.raises(ValueError):
        kernel_finite(0.0, [2.0, 2.0], 0.5, 1.0, 0.5, 1.0)


@pytest.mark.parametrize("method", ["moments", "quadrature"])
def test_contour_equals_residue(method):
    xi = [1.0, 3.0]
    X, Y = np.meshgrid(XS, XS, indexing="ij")
    a = kernel_finite(0.0, xi, 0.4, X, 0.7, Y)
    b = kernel_contour(0.0, xi, 0.4, X, 0.7, Y, method=method)
    assert np.max(np.abs(a - b)) <= 1e-7


def test_contour_moments_far_right():
    # exp(y/2t) is huge here; the moment form never forms it
    xi = [1.0, 3.0]
    a = kernel_finite(0.0, xi, 0.7, 2.0, 0.7, 25.0)
    assert kernel_contour(0.0, xi, 0.7, 2.0, 0.7, 25.0) == pytest.approx(a, abs=1e-12)
    with pytest.raises(ValueError):
        kernel_contour(0.0, xi, 0.7, 2.0, 0.7, 25.0, method="series")


def test_contour_doubled_atom_limit():
    x, y = 1.2, 2.5
    merged = kernel_contour(0.0, [2.0, 2.0], 0.5, x, 0.8, y)
    e = 1e-4
    f1 = kernel_finite(0.0, [2.0, 2.0 + e], 0.5, x, 0.8, y)
    f2 = kernel_finite(0.0, [2.0, 2.0 + 2 * e], 0.5, x, 0.8, y)
    assert merged == pytest.approx(2 * f1 - f2, abs=1e-3)


def test_time_order_subtraction():
    # crossing the diagonal s = t switches on -p(s-t, x|y)
    xi, x, y = [1.0, 3.0], 1.2, 2.0
    below = kernel_finite(0.5, xi, 0.7, x, 0.7 + 1e-9, y)
    above = kernel_finite(0.5, xi, 0.7 + 1e-9, x, 0.7, y)
    assert below - above == pytest.approx(p_nu(0.5, 1e-9, x, y), abs=1e-6)
    assert below == pytest.approx(kernel_finite(0.5, xi, 0.7, x, 0.7, y), abs=1e-6)


def test_gauge_identity_and_nu0():
    xi = [1.0, 3.0]
    X, Y = np.meshgrid(XS, XS, indexing="ij")
    KJ = kernel_J(0.5, xi, 0.4, X, 0.7, Y)
    K = kernel_finite(0.5, xi, 0.4, X, 0.7, Y)
    assert np.allclose((X / Y) ** 0.25 * KJ, K, rtol=1e-12, atol=0)
    assert np.array_equal(kernel_J(0.0, xi, 0.4, X, 0.7, Y), kernel_finite(0.0, xi, 0.4, X, 0.7, Y))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.1, 6.0), min_size=3, max_size=3, unique=True), st.floats(-0.5, 2.0))
def test_gauge_determinant_invariance(pts, nu):
    xi = [1.0, 2.0, 4.0]
    X, Y = np.meshgrid(pts, pts, indexing="ij")
    d1 = np.linalg.det(kernel_finite(nu, xi, 0.6, X, 0.6, Y))
    d2 = np.linalg.det(kernel_J(nu, xi, 0.6, X, 0.6, Y))
    assert abs(d1 - d2) <= 1e-10 * max(1.0, abs(d1))


def test_infinite_ladder_eta2():
    cfg = canonical_config("eta_gamma", gamma=2.0)
    lad = infinite_ladder(0.5, cfg, 0.5, 1.0, 0.5, 2.0, [25, 100, 400], tail_correction=False)
    assert lad["differences"][1] < lad["differences"][0]


def test_infinite_matches_relaxation():
    nu = 0.5
    cfg = canonical_config("bessel_sq_zeros", nu=nu)
    x, y = np.array([0.8, 2.0, 4.5]), np.array([1.1, 3.0, 0.6])
    a = kernel_infinite(nu, cfg, 1.0, x, 1.0, y, 400, gauge="J")
    b = relaxation_kernel(nu, 1.0, x, 1.0, y, n_zeros=400)
    assert np.max(np.abs(a - b)) <= 1e-4


def test_infinite_diagonal_nonnegative():
    cfg = canonical_config("eta_gamma", gamma=2.0)
    g = np.linspace(0.2, 8.0, 12)
    assert np.all(kernel_infinite(0.0, cfg, 0.6, g, 0.6, g, 100) >= -1e-10)


@pytest.mark.parametrize("nu", [0.5, 1.0])
@pytest.mark.parametrize("x", [0.3, 1.0, 10.0])
def test_rho_forms_agree(nu, x):
    assert rho_nu(nu, x, form="derivative") == pytest.approx(rho_nu(nu, x), abs=1e-10)


def test_rho_domain():
    with pytest.raises(ValueError):
        rho_nu(0.0, 0.0)
    with pytest.raises(ValueError):
        rho_nu(0.0, 1.0, form="other")


def test_bessel_kernel_half_integer_vs_quadrature():
    nu, x, y = 0.5, 1.3, 2.7
    ref = _quad(lambda u: special.jv(nu, 2 * math.sqrt(u * x)) * special.jv(nu, 2 * math.sqrt(u * y)), 0, 1)
    assert bessel_kernel(nu, x, y, cutoff=1.0) == pytest.approx(ref, abs=1e-8)
    # near-diagonal switch stays continuous
    assert bessel_kernel(nu, x, x + 1e-7) == pytest.approx(bessel_kernel(nu, x, x), abs=1e-8)


def test_zero_counting():
    nu = 0.0
    j10 = bessel_zeros(nu, 10)[9]
    count = _quad(lambda x: rho_nu(nu, x), 0, j10**2)
    assert abs(count - 10) <= 0.6


def test_extended_equal_time_branch():
    X, Y = np.meshgrid(XS, XS, indexing="ij")
    assert np.array_equal(extended_bessel_kernel(0.5, 0.3, X, 0.3, Y), bessel_kernel(0.5, X, Y))


def test_extended_branch_difference():
    nu, x, y = 0.5, 1.2, 2.3
    s, t = 0.8, 0.5
    low = _extended_branch(nu, s, x, t, y, "low")
    high = _extended_branch(nu, s, x, t, y, "high")
    # both branches together integrate the spectral variable over (0, inf), w = u c
    c = DEFAULT_CUTOFF
    ref = c * p_J(nu, c * (s - t), c * y, c * x)
    assert low - high == pytest.approx(ref, abs=1e-7)
    assert extended_bessel_kernel(nu, s, x, t, y) == pytest.approx(high)
    with pytest.raises(ValueError):
        _extended_branch(nu, t, x, s, y, "high")


def test_extended_forward_branch_sanity():
    v = extended_bessel_kernel(0.0, 0.2, 1.0, 0.9, 1.0)
    assert 0 < v <= rho_nu(0.0, 1.0) * math.exp(2 * DEFAULT_CUTOFF * 0.7)


def test_relaxation_paths_agree():
    a = relaxation_kernel(0.5, 1.0, 2.0, 1.0, 3.0, n_zeros=200, path="a")
    b = relaxation_kernel(0.5, 1.0, 2.0, 1.0, 3.0, n_zeros=200, path="b")
    assert a == pytest.approx(b, abs=1e-6)
    with pytest.raises(ValueError):
        relaxation_kernel(0.5, 1.0, 2.0, 1.0, 3.0, path="c")


def test_relaxation_localizes_on_first_zero():
    nu, t = 0.0, 1e-3
    j1 = bessel_zeros(nu, 1)[0] ** 2
    f = lambda x: relaxation_kernel(nu, t, x, t, x, n_zeros=20)
    mass = _quad(f, j1 - 1.5, j1 + 1.5)
    assert mass == pytest.approx(1.0, abs=1e-2)


def test_relaxation_warns_on_short_truncation():
    with pytest.warns(ToleranceWarning):
        relaxation_kernel(0.0, 1.0, 60.0, 1.0, 5.0, n_zeros=2)


def test_remainder_decreases_with_shift():
    g = np.array([0.5, 2.0, 5.0])
    X, Y = np.meshgrid(g, g, indexing="ij")
    sups = [np.max(np.abs(relaxation_remainder(0.5, 1 + th, X, 1 + th, Y))) for th in (1.0, 2.0, 4.0)]
    assert sups[0] > sups[1] > sups[2]


def test_handle_dispatch():
    xi = PointConfiguration([1.0, 3.0])
    h = KernelHandle("finite_nu", 0.5, xi)
    assert h(0.4, 1.0, 0.7, 2.0) == kernel_finite(0.5, xi, 0.4, 1.0, 0.7, 2.0)
    assert KernelHandle("bessel_stationary", 0.5).evaluate(1, 1.0, 1, 2.0) == bessel_kernel(0.5, 1.0, 2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ToleranceWarning)
        r = KernelHandle("relaxation", 0.5, truncation=50)(1.0, 1.0, 1.2, 2.0)
    assert r == relaxation_kernel(0.5, 1.0, 1.0, 1.2, 2.0, n_zeros=50)
    with pytest.raises(ValueError):
        KernelHandle("sine", 0.5)
    with pytest.raises(ValueError):
        KernelHandle("finite_nu", -1.0, xi)
