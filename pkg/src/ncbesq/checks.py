"""Identity suite: integral identities, dual-path agreements and limits.

Every check returns :class:`CheckResult` records carrying the criterion
group it belongs to, a residual, and the tolerance it is judged against.
The suite is deterministic for a given seed (used only for the random
continuation points) and contains no timing information.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special as _sp

from .biortho import S_tilde, phi_minus, phi_plus, type1_Q
from .densities import (km_determinant, p_J, p_J_complex, p_J_phase, p_nu, p_nu_complex,
                        p_nu_ext, p_nu_ext_phase, vandermonde)
from .kernels import (_extended_branch, extended_bessel_kernel, kernel_contour,
                      kernel_finite, kernel_infinite, kernel_J, relaxation_kernel, rho_nu)
from .pointconf import canonical_config
from .quadrature import composite, radial_rule
from .specfun import bessel_zeros

__all__ = ["CheckResult", "run_suite", "relaxation_ladder", "GROUPS", "IDENTITY_GROUPS"]


@dataclass(frozen=True)
class CheckResult:
    group: int
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)

    def as_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _rel(a, b, floor=1.0):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.abs(b))))


def _line(f, a, r0=0.0, freq=0.0, n=32, margin=46.0):
    """``int_0^inf f(r) dr`` for integrands bounded by ``exp(-a (r - r0)^2)`` times oscillation."""
    R = max(r0, 0.0) + math.sqrt(margin / a) + 1.0
    panels = int(math.ceil(R * (freq + 2.0 * math.sqrt(a) + 1.0) / 4.0)) + 4
    r, w = radial_rule(R, panels, n=n)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        vals = np.nan_to_num(f(r), nan=0.0, posinf=0.0, neginf=0.0)
    return np.tensordot(vals, w, axes=(-1, 0))


def _half(f, a, r0=0.0, freq=0.0, **kw):
    """``int_0^inf f(y) dy`` via ``y = r^2``."""
    return _line(lambda r: f(r * r) * 2.0 * r, a, r0, freq, **kw)


# -- group 1: Chapman-Kolmogorov ------------------------------------------------------

def check_ck(quick=False):
    nus = (0.5,) if quick else (-0.5, 0.0, 0.5, 2.0)
    st = ((0.2, 0.5),) if quick else ((0.2, 0.5), (0.5, 1.5))
    xs = (0.5, 1.0, 4.0)
    res = {k: 0.0 for k in ("ck-forward", "ck-backward-neg", "ck-backward-pos", "ck-forward-J", "ck-backward-neg-J", "ck-backward-pos-J")}
    for nu in nus:
        for s, t in st:
            tau = t - s
            a_fw = 1.0 / (2.0 * max(tau, s))
            a_ext = 1.0 / (2.0 * tau) - 1.0 / (2.0 * t)
            for x in xs:
                for z in xs:
                    r0 = max(math.sqrt(x), math.sqrt(z))
                    lhs = _half(lambda y: p_nu(nu, tau, z, y) * p_nu(nu, s, y, x), a_fw, r0)
                    res["ck-forward"] = max(res["ck-forward"], _rel(lhs, p_nu(nu, t, z, x)))
                    lhs = _half(lambda y: p_J(nu, tau, z, y) * p_J(nu, s, y, x), a_fw, r0)
                    res["ck-forward-J"] = max(res["ck-forward-J"], _rel(lhs, p_J(nu, t, z, x)))
                    # positive target: both sides carry the phase exp(i nu pi)
                    b = math.sqrt(z) / tau + math.sqrt(x) / t
                    lhs = _half(lambda y: p_nu(nu, tau, z, y) * p_nu_ext(nu, -t, y, x), a_ext, b / (2 * a_ext))
                    res["ck-backward-pos"] = max(res["ck-backward-pos"], _rel(lhs, p_nu_ext(nu, -s, z, x)))
                    lhs = _half(lambda y: p_J(nu, tau, z, y) * p_J(nu, -t, y, x), a_ext, b / (2 * a_ext))
                    res["ck-backward-pos-J"] = max(res["ck-backward-pos-J"], _rel(lhs, p_J(nu, -s, z, x)))
                for z in (-3.0, -1.0):
                    r0 = math.sqrt(x) / (2.0 * a_ext * tau)
                    fr = math.sqrt(-z) / t
                    lhs = _half(lambda y: p_nu_ext(nu, -t, z, y) * p_nu(nu, tau, y, x), a_ext, r0, fr)
                    res["ck-backward-neg"] = max(res["ck-backward-neg"], _rel(lhs, p_nu_ext(nu, -s, z, x)))
                    lhs = _half(lambda y: p_J(nu, -t, z, y) * p_J(nu, tau, y, x), a_ext, r0, fr)
                    res["ck-backward-neg-J"] = max(res["ck-backward-neg-J"], _rel(lhs, p_J(nu, -s, z, x)))
    return [CheckResult(1, k, v, 1e-7) for k, v in res.items()]


# -- group 2: Weber integrals -------------------------------------------------------

def check_weber(quick=False):
    vals = (1.0, 0.7, 2.0)
    nus = (0.5,) if quick else (0.0, 0.5, 1.5)
    w2 = i2 = 0.0
    for nu in nus:
        for p in vals:
            for a in vals:
                for b in vals:
                    q = 2.0 * p * p
                    lhs = _line(lambda u: u * np.exp(-p * p * u * u) * _sp.jv(nu, a * u) * _sp.jv(nu, b * u),
                                p * p, 0.0, a + b)
                    rhs = math.exp(-(a * a + b * b) / (2 * q)) * _sp.iv(nu, a * b / q) / q
                    w2 = max(w2, _rel(lhs, rhs))
                    lhs = _line(lambda u: u * np.exp(-p * p * u * u + (a + b) * u)
                                * _sp.ive(nu, a * u) * _sp.ive(nu, b * u), p * p, (a + b) / q)
                    rhs = math.exp((a * a + b * b) / (2 * q)) * _sp.iv(nu, a * b / q) / q
                    i2 = max(i2, _rel(lhs, rhs))
    pj = 0.0
    cases = ((0.5, 0.6, 1.0, 2.0),) if quick else [(nu, t, x, z) for nu in (0.0, 0.5, 2.0)
                                                      for t in (0.6, 1.0) for x in (1.0, 3.0) for z in (0.5, 2.0)]
    for nu, t, x, z in cases:
        # I_nu(sqrt(z v)) pairs with the real form of p_J(-t, -v|x); the phases cancel
        lhs = _half(lambda v: _sp.ive(nu, np.sqrt(z * v)) * np.exp(np.sqrt(z * v)) * p_J(nu, -t, -v, x),
                    1.0 / (2 * t), t * math.sqrt(z), math.sqrt(x) / t)
        rhs = math.exp(t * z / 2) * _sp.jv(nu, math.sqrt(z * x))
        pj = max(pj, _rel(lhs, rhs))
    return [CheckResult(2, "weber-J", w2, 1e-8), CheckResult(2, "weber-I", i2, 1e-8),
            CheckResult(2, "backward-J-bessel", pj, 1e-8)]


# -- group 3: real forms against the complex oracle ----------------------------------

def check_continuation(seed=0, n_points=20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_points):
        nu = float(rng.uniform(-0.9, 3.0))
        t = float(rng.uniform(0.3, 2.0))
        src = float(rng.uniform(0.1, 5.0))
        pattern = k % 4
        tgt = float(rng.uniform(0.1, 5.0)) * (-1.0 if pattern in (0, 2) else 1.0)
        if pattern < 2:
            real = p_nu_ext(nu, -t, tgt, src) * np.exp(0.5j * p_nu_ext_phase(-t, tgt) * nu * math.pi)
            oracle = p_nu_complex(nu, -t, tgt, src)
        else:
            real = p_J(nu, -t, tgt, src) * np.exp(0.5j * p_J_phase(-t, tgt) * nu * math.pi)
            oracle = p_J_complex(nu, -t, tgt, src)
        worst = max(worst, abs(real - oracle) / abs(oracle))
    return [CheckResult(3, "continuation", worst, 1e-12)]


# -- group 4: Bessel zeros ----------------------------------------------------------

def check_zeros(quick=False):
    nus = (0.0, 0.5) if quick else (-0.5, 0.0, 0.5, 1.0, 2.0)
    res_j = 0.0
    ray = 0.0
    for nu in nus:
        j = bessel_zeros(nu, 100).as_array()
        res_j = max(res_j, float(np.max(np.abs(_sp.jv(nu, j)))))
        target = 1.0 / (4.0 * (nu + 1.0))
        for n in (10, 50, 100):
            gap = target - float(np.sum(1.0 / j[:n] ** 2))
            # the partial sum must sit below the limit by at most the tail bound
            ray = max(ray, max(0.0, -gap) + max(0.0, gap - 1.0 / (math.pi**2 * n)))
    return [CheckResult(4, "zeros", res_j, 1e-12), CheckResult(4, "rayleigh", ray, 1e-14)]


# -- group 5: biorthogonal identities ---------------------------------------------------

_XI = np.array([1.0, 2.0, 4.0])


def _Mplus(nu, xi, i, y, method="auto"):
    return type1_Q(nu, np.asarray(xi)[: i + 1], y, method=method)


def _Mminus(nu, xi, i, y):
    return phi_minus(nu, 1.0, y, np.asarray(xi), i)


def check_fourier_bessel(quick=False):
    worst = 0.0
    u, w = composite(np.linspace(0.0, 1.0, 9), 32)
    for nu in (0.0, 0.5):
        for i in (1, 2):
            j = bessel_zeros(nu, i).as_array()[i - 1]
            jp = _sp.jv(nu + 1, j)
            for z in (0.3, 1.7):
                lhs = j / (j * j - z * z) * _sp.jv(nu, z) / jp
                rhs = np.sum(w * u * _sp.jv(nu, z * u) * _sp.jv(nu, j * u)) / jp**2
                worst = max(worst, _rel(lhs, rhs))
    return [CheckResult(5, "fourier-bessel", worst, 1e-6)]


def check_intertwining(nu=0.5, quick=False):
    plus = minus = 0.0
    st = ((0.5, 1.2),) if quick else ((0.5, 1.2), (0.3, 0.8))
    r_atoms = math.sqrt(_XI.max())
    for s, t in st:
        tau = t - s
        for i in range(len(_XI)):
            for y in (0.7, 2.5):
                lhs = _half(lambda x: p_nu(nu, tau, y, x) * _Mplus(nu, _XI / s, i, x / s),
                            1.0 / (2 * max(tau, s)), max(r_atoms, math.sqrt(y)))
                rhs = (s / t) ** (i + 1) * _Mplus(nu, _XI / t, i, y / t)
                plus = max(plus, _rel(lhs, rhs))
                x = y
                lhs = _half(lambda yy: _Mminus(nu, _XI / t, i, yy / t) * p_nu(nu, tau, yy, x),
                            1.0 / (2 * tau), math.sqrt(x), margin=60.0)
                rhs = (s / t) ** i * _Mminus(nu, _XI / s, i, x / s)
                minus = max(minus, _rel(lhs, rhs))
    return [CheckResult(5, "intertwine-type1", plus, 1e-6), CheckResult(5, "intertwine-type2", minus, 1e-6)]


def _rgrid(a, r0, margin=60.0, n=32):
    R = r0 + math.sqrt(margin / a) + 1.0
    r, w = radial_rule(R, int(math.ceil(R * (2 * math.sqrt(a) + 1) / 4)) + 4, n=n)
    return r * r, 2.0 * r * w


def check_space_time(nu=0.5, quick=False):
    k1 = k2 = k3 = 0.0
    grid = ((0.5, 1.2),) if quick else ((0.5, 1.2), (0.3, 1.0), (1.0, 1.5))
    r_atoms = math.sqrt(_XI.max())
    N = len(_XI)
    for t1, t2 in grid:
        tau = t2 - t1
        for i in range(N):
            for x in (0.7, 2.5):
                lhs = _half(lambda x2: phi_minus(nu, t2, x2, _XI, i) * p_nu(nu, tau, x2, x),
                            1.0 / (2 * tau), math.sqrt(x), margin=60.0)
                k1 = max(k1, _rel(lhs, phi_minus(nu, t1, x, _XI, i)))
                lhs = _half(lambda x1: p_nu(nu, tau, x, x1) * phi_plus(nu, t1, x1, _XI, i),
                            1.0 / (2 * max(tau, t1)), max(r_atoms, math.sqrt(x)))
                k2 = max(k2, _rel(lhs, phi_plus(nu, t2, x, _XI, i)))
        # double integral: x1 carries phi+ (Gaussian), x2 the polynomial phi-
        x1, w1 = _rgrid(1.0 / (2 * t1), r_atoms)
        x2, w2 = _rgrid(1.0 / (2 * tau), math.sqrt(x1.max()))
        P = p_nu(nu, tau, x2[:, None], x1[None, :])
        Pm = np.stack([phi_minus(nu, t2, x2, _XI, i) for i in range(N)])
        Pp = np.stack([phi_plus(nu, t1, x1, _XI, j) for j in range(N)])
        G = (Pm * w2) @ P @ (Pp * w1).T
        k3 = max(k3, float(np.max(np.abs(G - np.eye(N)))))
    return [CheckResult(5, "phi-minus-harmonic", k1, 1e-6), CheckResult(5, "phi-plus-harmonic", k2, 1e-6),
            CheckResult(5, "biortho-two-time", k3, 1e-6)]


def check_orth(nu=0.5):
    worst = 0.0
    for xi in (_XI, np.array([1.0, 1.0, 3.0])):
        N = len(xi)
        y, w = _rgrid(0.5, math.sqrt(xi.max()))
        Mm = np.stack([_Mminus(nu, xi, i, y) for i in range(N)])
        Mp = np.stack([_Mplus(nu, xi, k, y) for k in range(N)])
        worst = max(worst, float(np.max(np.abs((Mm * w) @ Mp.T - np.eye(N)))))
    return [CheckResult(5, "biortho", worst, 1e-6)]


def _detM(nu, x, y):
    M = np.stack([_Mplus(nu, x, i, y) for i in range(len(x))])
    return float(np.linalg.det(M))


def check_km_determinant():
    simple = 0.0
    for nu in (0.0, 0.5):
        x = np.array([0.5, 1.5, 2.5, 4.0])
        y = np.array([0.8, 2.0, 3.0, 5.0])
        lhs = km_determinant(nu, 1.0, y, x) / vandermonde(x)
        simple = max(simple, abs(lhs - _detM(nu, x, y)) / abs(lhs))
    merged = 0.0
    for nu in (0.0, 0.5):
        y = np.array([0.8, 2.0, 3.5])
        f = [km_determinant(nu, 1.0, y, np.array([1.0, 1.0 + e, 3.0])) / vandermonde([1.0, 1.0 + e, 3.0])
             for e in (1e-4, 2e-4)]
        limit = 2.0 * f[0] - f[1]
        merged = max(merged, abs(_detM(nu, np.array([1.0, 1.0, 3.0]), y) - limit) / abs(limit))
    return [CheckResult(5, "km-det", simple, 1e-8), CheckResult(5, "km-det-merged", merged, 1e-4)]


# -- group 6: kernel equivalences ---------------------------------------------------

def check_kernels(nu=0.5, quick=False):
    X, Y = np.meshgrid([0.5, 1.5, 3.0], [0.5, 1.5, 3.0], indexing="ij")
    st = ((0.4, 0.7), (0.9, 0.5)) if quick else ((0.4, 0.7), (0.9, 0.5), (0.6, 0.6))
    sd = cr = 0.0
    for s, t in st:
        K = kernel_finite(nu, _XI, s, X, t, Y)
        sd = max(sd, _rel(K, S_tilde(nu, _XI, s, X, t, Y)))
        # the quadrature path shares no y' integration with the residue form
        for m in ("quadrature", "moments"):
            cr = max(cr, _rel(kernel_contour(nu, _XI, s, X, t, Y, method=m), K))
    gauge = 0.0
    for pts in ((0.5, 1.3, 2.9), (0.8, 2.2, 4.5)):
        P, Q = np.meshgrid(pts, pts, indexing="ij")
        for t in (0.5, 1.0):
            dJ = np.linalg.det(kernel_J(nu, _XI, t, P, t, Q))
            dn = np.linalg.det(kernel_finite(nu, _XI, t, P, t, Q))
            gauge = max(gauge, abs(dJ - dn) / max(1.0, abs(dn)))
    out = [CheckResult(6, "finite=S_tilde", sd, 1e-6), CheckResult(6, "contour=residue", cr, 1e-7),
           CheckResult(6, "gauge-det", gauge, 1e-10)]
    cfg = canonical_config("bessel_sq_zeros", nu=nu)
    pts = ((1.0, 1.0),) if quick else ((1.0, 1.0), (1.2, 0.8), (0.8, 1.2))
    inf = 0.0
    for s, t in pts:
        A, B = np.meshgrid([1.0, 3.0], [1.0, 3.0], indexing="ij")
        Ki = kernel_infinite(nu, cfg, s, A, t, B, 400, gauge="J")
        Kr = relaxation_kernel(nu, s, A, t, B, n_zeros=400)
        inf = max(inf, float(np.max(np.abs(Ki - Kr))))
    out.append(CheckResult(6, "infinite=relaxation", inf, 1e-4))
    return out


# -- group 7: projection ------------------------------------------------------------

def check_projection(nu=0.5, t=0.7):
    trace = repro = 0.0
    for xi in (np.array([1.0, 3.0]), _XI):
        z, w = _rgrid(1.0 / (2 * t), math.sqrt(xi.max()) + 1.0, margin=80.0)
        trace = max(trace, abs(float(np.sum(w * kernel_finite(nu, xi, t, z, t, z))) - len(xi)))
        pts = np.array([0.6, 1.8, 3.5])
        A = kernel_finite(nu, xi, t, pts[:, None], t, z[None, :])
        B = kernel_finite(nu, xi, t, z[:, None], t, pts[None, :])
        P, Q = np.meshgrid(pts, pts, indexing="ij")
        repro = max(repro, _rel((A * w) @ B, kernel_finite(nu, xi, t, P, t, Q)))
    return [CheckResult(7, "trace=N", trace, 1e-4), CheckResult(7, "reproducing", repro, 1e-4)]


# -- group 8: extended Bessel kernel ------------------------------------------------

def check_bessel():
    x = np.array([0.3, 1.0, 10.0])
    forms = max(_rel(rho_nu(nu, x, "derivative"), rho_nu(nu, x, "product"), floor=1e-300)
                for nu in (0.5, 1.0))
    X, Y = np.meshgrid([0.5, 2.0], [0.7, 3.0], indexing="ij")
    branch = 0.0
    for nu in (0.0, 0.5):
        s, t = 1.3, 1.0
        diff = _extended_branch(nu, s, X, t, Y, "low") - _extended_branch(nu, s, X, t, Y, "high")
        branch = max(branch, _rel(diff, p_J(nu, s - t, Y, X)))
    count = 0.0
    for nu in (0.0, 0.5):
        j10 = bessel_zeros(nu, 10).as_array()[-1]
        r, w = composite(np.linspace(0.0, j10, 41), 32)
        count = max(count, abs(float(np.sum(w * 2 * r * rho_nu(nu, r * r))) - 10.0))
    return [CheckResult(8, "rho-forms", forms, 1e-10), CheckResult(8, "branch-difference", branch, 1e-7),
            CheckResult(8, "zero-counting", count, 0.6)]


# -- group 9: relaxation ------------------------------------------------------------

def relaxation_ladder(nu, thetas=(1, 2, 3, 4), s=1.0, grid=(0.5, 5.0, 10), n_zeros=200):
    """Sup-grid deviation of the shifted relaxation kernel from the stationary one."""
    g = np.linspace(*grid)
    X, Y = np.meshgrid(g, g, indexing="ij")
    target = extended_bessel_kernel(nu, s, X, s, Y)
    return [float(np.max(np.abs(relaxation_kernel(nu, s + th, X, s + th, Y, n_zeros=n_zeros) - target)))
            for th in thetas]


def check_relaxation(quick=False):
    out = []
    for nu in (0.0, 0.5):
        dev = relaxation_ladder(nu)
        mono = all(b < a for a, b in zip(dev, dev[1:]))
        out.append(CheckResult(9, f"relaxation-monotone-nu{nu:g}", 0.0 if mono else 1.0, 0.0))
        out.append(CheckResult(9, f"relaxation-theta4-nu{nu:g}", dev[-1], 1e-2))
    return out


GROUPS = {
    1: lambda q, seed, nu: check_ck(q),
    2: lambda q, seed, nu: check_weber(q),
    3: lambda q, seed, nu: check_continuation(seed),
    4: lambda q, seed, nu: check_zeros(q),
    5: lambda q, seed, nu: (check_fourier_bessel(q) + check_intertwining(nu, q) + check_space_time(nu, q)
                            + check_orth(nu) + check_km_determinant()),
    6: lambda q, seed, nu: check_kernels(nu, q),
    7: lambda q, seed, nu: check_projection(nu),
    8: lambda q, seed, nu: check_bessel(),
    9: lambda q, seed, nu: check_relaxation(q),
}

IDENTITY_GROUPS = (1, 2, 3, 4, 5, 6, 7, 8)


def run_suite(groups=IDENTITY_GROUPS, quick=False, seed=0, nu=0.5):
    """Run the selected groups and return the list of results.

    ``nu`` applies to the biorthogonal, kernel and projection groups; the
    other groups sweep their own grids of indices.
    """
    results = []
    for g in sorted(groups):
        results.extend(GROUPS[g](quick, seed, nu))
    return results
