import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from ncbesq.correlation import TestFunction, fredholm_generating
from ncbesq.densities import p_nu
from ncbesq.kernels import KernelHandle
from ncbesq.montecarlo import (BLOCK, EnsembleSample, Table, analytic_density, analytic_two_time, compare,
                               em_sde_sample, estimate, laguerre_sample, load_ensemble, save_ensemble,
                               trace_mean)
from ncbesq.pointconf import PointConfiguration


@pytest.fixture(scope="module")
def wishart():
    return laguerre_sample(1, 2, [1.0, 3.0], [0.25, 0.5], 10_000, seed=7)


def test_trace_law(wishart):
    s = wishart.at(0.5).sum(axis=1)
    se = s.std(ddof=1) / math.sqrt(s.size)
    assert trace_mean(1, 2, [1.0, 3.0], 0.5) == 10.0
    assert abs(s.mean() - 10.0) <= 3 * se


def test_noncollision_and_order(wishart):
    X = wishart.paths
    assert np.all(X >= 0)
    assert np.all(np.diff(X, axis=2) > 1e-12)


def test_single_particle_is_besq():
    nu, x0, t = 1, 2.0, 0.7
    ens = laguerre_sample(nu, 1, [x0], [t], 10_000, seed=3)
    y = np.linspace(0.0, 60.0, 60001)
    cdf = integrate.cumulative_trapezoid(p_nu(nu, t, y, x0), y, initial=0.0)
    res = stats.kstest(ens.at(t)[:, 0], lambda v: np.interp(v, y, cdf))
    assert res.pvalue > 0.01


def test_p_nu_is_scaled_noncentral_chi2():
    # independent check of the oracle above
    nu, x0, t, y = 1.0, 2.0, 0.7, np.array([0.3, 2.0, 6.0])
    ref = stats.ncx2.pdf(y / t, 2 * (nu + 1), x0 / t) / t
    assert np.allclose(p_nu(nu, t, y, x0), ref, rtol=1e-10)


def test_reproducible_and_thread_independent():
    a = laguerre_sample(0, 2, [0.5, 2.0], [0.3], BLOCK + 100, seed=11, threads=1)
    b = laguerre_sample(0, 2, [0.5, 2.0], [0.3], BLOCK + 100, seed=11, threads=4)
    c = laguerre_sample(0, 2, [0.5, 2.0], [0.3], BLOCK + 100, seed=12, threads=1)
    assert np.array_equal(a.paths, b.paths)
    assert not np.array_equal(a.paths, c.paths)


def test_sampler_validation():
    with pytest.raises(ValueError):
        laguerre_sample(0.5, 1, [1.0], [1.0], 10)
    with pytest.raises(ValueError):
        laguerre_sample(1, 2, [1.0], [1.0], 10)
    with pytest.raises(ValueError):
        laguerre_sample(1, 1, [1.0], [1.0, 0.5], 10)
    with pytest.raises(ValueError):
        em_sde_sample(0.5, 1, [1.0], [1.0], 10)
    with pytest.raises(ValueError):
        em_sde_sample(1.0, 2, [3.0, 1.0], [1.0], 10)


def test_em_trace_and_order():
    ens = em_sde_sample(1.0, 2, [1.0, 3.0], [0.2], 2000, dt=1e-3, seed=5)
    s = ens.at(0.2).sum(axis=1)
    se = s.std(ddof=1) / math.sqrt(s.size)
    assert abs(s.mean() - trace_mean(1, 2, [1.0, 3.0], 0.2)) <= 3 * se
    assert np.all(np.diff(ens.paths, axis=2) > 0)
    assert ens.exclusion_rate <= 0.01


@pytest.mark.slow
def test_em_agrees_with_wishart():
    edges = np.linspace(0.0, 8.0, 17)
    w = estimate(laguerre_sample(1, 2, [1.0, 3.0], [0.2], 10_000, seed=1), "density", t=0.2, bins=edges)
    e = estimate(em_sde_sample(1.0, 2, [1.0, 3.0], [0.2], 10_000, dt=1e-4, seed=2), "density", t=0.2, bins=edges)
    se = np.sqrt(w.se**2 + e.se**2)
    z = np.where(se > 0, (w.value - e.value) / np.where(se > 0, se, 1.0), 0.0)
    assert np.max(np.abs(z)) <= stats.norm.isf(stats.norm.sf(3.0) / len(z))


def test_density_integrates_to_N(wishart):
    edges = np.linspace(0.0, 200.0, 41)
    tab = estimate(wishart, "density", t=0.5, bins=edges)
    assert np.sum(tab.value * np.diff(edges)) == pytest.approx(2.0, abs=1e-12)


def test_two_time_reduces_to_single_time(wishart):
    I1 = (0.5, 2.0)
    two = estimate(wishart, "two_time_counts", first=(0.25, I1), second=(0.5, (0.0, np.inf)))
    one = estimate(wishart, "box_counts", t=0.25, intervals=[I1])
    assert two.value[0] == pytest.approx(2 * one.value[0], rel=1e-12)


def test_density_matches_kernel(wishart):
    edges = np.linspace(0.0, 12.0, 41)
    K = KernelHandle("finite_nu", 1.0, PointConfiguration([1.0, 3.0]))
    rep = compare(analytic_density(K, 0.5, edges), estimate(wishart, "density", t=0.5, bins=edges))
    assert rep.passed, rep.sup_z


def test_two_time_matches_corr_rho(wishart):
    K = KernelHandle("finite_nu", 1.0, PointConfiguration([1.0, 3.0]))
    first, second = (0.25, (0.5, 2.0)), (0.5, (1.0, 4.0))
    emp = estimate(wishart, "two_time_counts", first=first, second=second)
    ana = analytic_two_time(K, first, second)
    assert abs(emp.value[0] - ana.value[0]) <= 3 * emp.se[0]


def test_estimate_errors(wishart):
    empty = EnsembleSample(np.empty((0, 1, 2)), np.array([1.0]), 0, "wishart", {})
    with pytest.raises(ValueError):
        estimate(empty, "density", t=1.0, bins=[0, 1])
    with pytest.raises(ValueError):
        wishart.at(0.3)
    with pytest.raises(ValueError):
        estimate(wishart, "histogram", t=0.5)


def test_compare_identical_and_mismatch():
    lo, hi = np.arange(5.0), np.arange(1.0, 6.0)
    t = Table(lo, hi, np.ones(5), np.full(5, 0.1), 100)
    rep = compare(t, t)
    assert np.all(rep.z == 0) and rep.passed and rep.sup_z == 0
    with pytest.raises(ValueError):
        compare(t, Table(lo + 0.5, hi, np.ones(5), np.ones(5)))


def test_compare_calibrated_on_injected_noise():
    rng = np.random.default_rng(2024)
    m = 4000
    lo = np.arange(m, dtype=float)
    ana = Table(lo, lo + 1, rng.uniform(1, 2, m), np.zeros(m))
    se = rng.uniform(0.05, 0.2, m)
    emp = Table(lo, lo + 1, ana.value + se * rng.standard_normal(m), se, 1000)
    rep = compare(ana, emp)
    assert abs(np.mean(rep.z)) < 4 / math.sqrt(m)
    assert np.std(rep.z) == pytest.approx(1.0, abs=0.05)
    assert rep.passed
    shifted = Table(lo, lo + 1, emp.value + 0.5, se, 1000)
    assert not compare(ana, shifted).passed


def test_compare_poisson_floor():
    ana = Table(np.array([0.0]), np.array([1.0]), np.array([0.01]), np.zeros(1), 0)
    emp = Table(np.array([0.0]), np.array([1.0]), np.array([0.0]), np.zeros(1), 10_000)
    rep = compare(ana, emp)
    assert rep.notes and rep.z[0] == pytest.approx(-0.01 / math.sqrt(0.01 / 10_000))


def test_persistence_roundtrip(tmp_path, wishart):
    path = str(tmp_path / "ens.bin")
    save_ensemble(wishart, path)
    back = load_ensemble(path)
    assert np.array_equal(back.paths, wishart.paths)
    assert np.array_equal(back.times, wishart.times)
    assert (back.seed, back.method, back.params) == (7, "wishart", wishart.params)
    with open(path, "rb") as fh:
        assert fh.read(8) == b"NCBESQ01"
    meta = json.load(open(path + ".json"))
    assert meta["shape"] == [10_000, 2, 2]
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"garbage")
    with pytest.raises(ValueError):
        load_ensemble(str(bad))


@pytest.mark.slow
def test_chiral_start_largest_eigenvalue():
    nu, t = 0, 0.5
    ens = laguerre_sample(nu, 2, [0.0, 0.0], [t], 10_000, seed=9)
    top = ens.at(t)[:, 1]
    K = KernelHandle("contour", float(nu), PointConfiguration([0.0, 0.0]))
    # E[max] = int_0^inf P(max > a) da, with P(max <= a) the gap probability of (a, A)
    A = 25.0
    a, w = np.polynomial.legendre.leggauss(24)
    a = 0.5 * A * (a + 1)
    w = 0.5 * A * w
    gap = [fredholm_generating(K, [t], [TestFunction((aa, A), -25.0)], n=32).value for aa in a]
    mean = float(np.sum(w * (1 - np.asarray(gap))))
    assert abs(top.mean() - mean) <= 3 * top.std(ddof=1) / math.sqrt(top.size)
