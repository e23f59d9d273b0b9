"""BESQ transition densities, their real-form continuations and KM determinants.

All densities are written through the entire function
``ibar(nu, q) = sum q^n / (n! Gamma(n+nu+1))`` so that the ``x = 0`` branch is
the continuous limit of the general one and ``exp(-(x+y)/2t) I_nu(.)`` is
combined in scaled form:

    p(t, y|x) = y^nu / (2t)^(nu+1) * exp(-(sqrt x - sqrt y)^2 / 2t) * ibar_scaled(nu, xy/4t^2)

Negative-time patterns are returned as real magnitudes; the accompanying
phase (a multiple ``k`` of ``nu*pi/2``) is reported by the ``*_phase`` helpers
and reproduced independently by :func:`p_nu_complex`.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

from .specfun import BesselIndex, ibar_scaled

__all__ = [
    "DELTA",
    "p_nu",
    "log_p_nu",
    "p_nu_ext",
    "p_nu_ext_phase",
    "p_J",
    "p_J_phase",
    "p_nu_complex",
    "p_J_complex",
    "i_cont",
    "km_matrix",
    "km_determinant",
    "vandermonde",
    "noncolliding_transition",
    "multitime_density",
]


class _Delta:
    """Sentinel returned for ``t = 0``: the density is the point mass at the source."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "DELTA"

    def __bool__(self):
        return False


DELTA = _Delta()


def _nu(nu) -> float:
    return float(BesselIndex(float(nu)).nu)


def _ret(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def _core(nu, tau, y, x, sign):
    """``|y|^nu/(2 tau)^(nu+1) * exp(sign*(x+|y|)/2tau + ...) * ibar(+-q)`` with q = x|y|/4tau^2.

    ``sign = -1``: forward density (Gaussian factor in sqrt space).
    ``sign = +1`` with negative target: oscillatory J-branch.
    ``sign = +1`` with nonnegative target: growing I-branch.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    ay = np.abs(y)
    q = x * ay / (4.0 * tau * tau)
    with np.errstate(divide="ignore"):
        logpow = np.where(ay > 0, nu * np.log(np.where(ay > 0, ay, 1.0)),
                          0.0 if nu == 0 else (-np.inf if nu > 0 else np.inf))
    logpre = logpow - (nu + 1.0) * math.log(2.0 * tau)
    if sign < 0:
        expo = -(np.sqrt(x) - np.sqrt(ay)) ** 2 / (2.0 * tau)
        ib = ibar_scaled(nu, q)
    else:
        neg = y < 0
        # J-branch (target < 0): exp((x + y)/2tau) with y < 0, ibar at -q is oscillatory
        # I-branch (target >= 0): exp((x+y)/2tau + sqrt(xy)/tau) times the scaled ibar
        expo = np.where(neg, (x + y) / (2.0 * tau), (np.sqrt(x) + np.sqrt(ay)) ** 2 / (2.0 * tau))
        ib = np.where(neg, ibar_scaled(nu, -q), ibar_scaled(nu, q))
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.exp(logpre + expo) * ib
    # y = 0 with nu < 0 gives the integrable singularity +inf; nu > 0 gives 0
    return out


def p_nu(nu, t, y, x):
    """Transition density of BESQ(nu) from ``x`` to ``y`` in time ``t``.

    Returns :data:`DELTA` for ``t == 0``.  For ``-1 < nu < 0`` this is the
    density with reflection at the origin.
    """
    nu = _nu(nu)
    t = float(t)
    if t < 0:
        raise ValueError("negative time: use p_nu_ext")
    if t == 0:
        return DELTA
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(y < 0) or np.any(x < 0):
        raise ValueError("p_nu needs y >= 0 and x >= 0")
    return _ret(_core(nu, t, y, x, -1))


def log_p_nu(nu, t, y, x):
    """Natural log of :func:`p_nu` for ``t > 0``, without underflow."""
    nu = _nu(nu)
    t = float(t)
    if not t > 0:
        raise ValueError("log_p_nu needs t > 0")
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    q = x * y / (4.0 * t * t)
    with np.errstate(divide="ignore"):
        lp = nu * np.log(y) if nu != 0 else np.zeros(np.broadcast(x, y).shape)
        val = (lp - (nu + 1.0) * math.log(2.0 * t) - (np.sqrt(x) - np.sqrt(y)) ** 2 / (2.0 * t)
               + np.log(ibar_scaled(nu, q)))
    return _ret(val)


def p_nu_ext(nu, t, target, source):
    """Density for nonzero real time, as a real magnitude.

    ``t > 0``: :func:`p_nu` (``target >= 0`` only).

    ``t = -tau < 0``, ``target < 0``:
        ``(1/2tau)(|y'|/y)^(nu/2) exp((y+y')/2tau) J_nu(sqrt(y|y'|)/tau)``,
        which is the value itself (phase 0).

    ``t = -tau < 0``, ``target >= 0``:
        ``(1/2tau)(y/x)^(nu/2) exp((x+y)/2tau) I_nu(sqrt(xy)/tau)``; the complex
        value carries the extra phase ``exp(i nu pi)``, see :func:`p_nu_ext_phase`.
    """
    nu = _nu(nu)
    t = float(t)
    if t == 0:
        raise ValueError("t must be nonzero")
    target = np.asarray(target, dtype=float)
    source = np.asarray(source, dtype=float)
    if np.any(source < 0):
        raise ValueError("source must be nonnegative")
    if t > 0:
        if np.any(target < 0):
            raise ValueError("negative target with positive time is not a supported pattern")
        return _ret(_core(nu, t, target, source, -1))
    return _ret(_core(nu, -t, target, source, +1))


def p_nu_ext_phase(t, target):
    """Integer ``k``: the complex density equals ``exp(i k nu pi/2)`` times the real form."""
    if t > 0:
        return 0
    return 0 if target < 0 else 2


def p_J(nu, t, target, source):
    """J-gauge density ``(x/y)^(nu/2) p(t, y|x)`` in real form.

    ``t > 0``: ``(1/2t) exp(-(x+y)/2t) I_nu(sqrt(xy)/t)``, symmetric in x, y;
    at ``source = 0`` it is ``y^(-nu/2) p(t, y|0)``.

    ``t = -tau < 0``, ``target = z < 0``: ``(1/2tau) exp((y+z)/2tau) J_nu(sqrt(y|z|)/tau)``
    (principal phase ``exp(i nu pi/2)``).

    ``t = -tau < 0``, ``target >= 0``: ``(1/2tau) exp((x+y)/2tau) I_nu(sqrt(xy)/tau)``
    (phase ``exp(i nu pi)``).
    """
    nu = _nu(nu)
    t = float(t)
    if t == 0:
        raise ValueError("t must be nonzero")
    y = np.asarray(target, dtype=float)
    x = np.asarray(source, dtype=float)
    if np.any(x < 0):
        raise ValueError("source must be nonnegative")
    if t > 0 and np.any(y < 0):
        raise ValueError("negative target with positive time is not a supported pattern")
    tau = abs(t)
    ay = np.abs(y)
    # (x|y|)^(nu/2) (2tau)^-(nu+1) * exp(...) * ibar(+-q), with the x = 0 branch separate
    q = x * ay / (4.0 * tau * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        prod = x * ay
        logpow = np.where(prod > 0, 0.5 * nu * np.log(np.where(prod > 0, prod, 1.0)),
                          0.0 if nu == 0 else (-np.inf if nu > 0 else np.inf))
        # source 0: y^(-nu/2) p(t,y|0) = |y|^(nu/2) / ((2tau)^(nu+1) Gamma(nu+1)) e^(...)
        logpow0 = np.where(ay > 0, 0.5 * nu * np.log(np.where(ay > 0, ay, 1.0)),
                           0.0 if nu == 0 else (-np.inf if nu > 0 else np.inf))
        logpow = np.where(x == 0, logpow0, logpow)
    logpre = logpow - (nu + 1.0) * math.log(2.0 * tau)
    if t > 0:
        expo = -(np.sqrt(x) - np.sqrt(ay)) ** 2 / (2.0 * tau)
        ib = ibar_scaled(nu, q)
    else:
        neg = y < 0
        expo = np.where(neg, (x + y) / (2.0 * tau), (np.sqrt(x) + np.sqrt(ay)) ** 2 / (2.0 * tau))
        ib = np.where(neg, ibar_scaled(nu, -q), ibar_scaled(nu, q))
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.exp(logpre + expo) * ib
    return _ret(out)


def p_J_phase(t, target):
    """Integer ``k``: complex ``p_J`` equals ``exp(i k nu pi/2)`` times :func:`p_J`."""
    if t > 0:
        return 0
    return 1 if target < 0 else 2


# -- complex-arithmetic oracle with principal branches -------------------------

def i_cont(nu, z):
    """Continuation of ``I_nu`` to the plane through ``J_nu`` with principal branches.

    ``I_nu(z) = exp(-i nu pi/2) J_nu(i z)`` for ``-pi < arg z <= pi/2`` and
    ``exp(3 i nu pi/2) J_nu(exp(-3 i pi/2) z)`` for ``pi/2 < arg z <= pi``.
    Numerically ``exp(-3 i pi/2) z = i z`` as a point, and the principal value
    of ``J_nu`` at ``i z`` is the required branch in both cases.
    """
    z = np.asarray(z, dtype=complex)
    arg = np.angle(z)
    # principal arguments live in (-pi, pi]; a signed zero imaginary part on
    # the negative axis must not flip the branch
    arg = np.where(arg <= -math.pi, math.pi, arg)
    upper = arg > 0.5 * math.pi
    phase = np.where(upper, np.exp(1.5j * nu * math.pi), np.exp(-0.5j * nu * math.pi))
    return phase * _sp.jv(nu, 1j * z)


def _cpow(z, a):
    z = np.asarray(z, dtype=complex)
    z = z.real + 1j * (z.imag + 0.0)  # -0.0 imaginary part -> +0.0 (arg pi, not -pi)
    return np.where(z == 0, 0.0 if a > 0 else (1.0 if a == 0 else np.inf), z ** a)


def p_nu_complex(nu, t, y, x):
    """Literal complex formula ``(1/2|t|)(y/x)^(nu/2) exp(-(x+y)/2t) I_nu(sqrt(xy)/t)``.

    ``x > 0``.  Powers and square roots use principal branches.  Intended as an
    independent check of the real forms, not for production use.
    """
    nu = _nu(nu)
    t = float(t)
    y = np.asarray(y, dtype=complex)
    x = np.asarray(x, dtype=complex)
    pref = _cpow(y / x, 0.5 * nu)
    return pref * np.exp(-(x + y) / (2.0 * t)) * i_cont(nu, np.sqrt(x * y) / t) / (2.0 * abs(t))


def p_J_complex(nu, t, y, x):
    """``(x/y)^(nu/2) p(t, y|x)`` evaluated with the complex oracle."""
    y = np.asarray(y, dtype=complex)
    x = np.asarray(x, dtype=complex)
    return _cpow(x / y, 0.5 * float(nu)) * p_nu_complex(nu, t, y, x)


# -- determinants ---------------------------------------------------------------

def _vec(v, name):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return v


def km_matrix(nu, t, y_vec, x_vec):
    """Matrix ``[p(t, y_i | x_j)]``."""
    y = _vec(y_vec, "y_vec")
    x = _vec(x_vec, "x_vec")
    if len(x) != len(y):
        raise ValueError("y_vec and x_vec must have the same length")
    return np.asarray(p_nu(nu, t, y[:, None], x[None, :]), dtype=float).reshape(len(y), len(x))


def km_determinant(nu, t, y_vec, x_vec):
    """Karlin-McGregor determinant ``det[p(t, y_i | x_j)]`` (LU with partial pivoting)."""
    y = _vec(y_vec, "y_vec")
    x = _vec(x_vec, "x_vec")
    if len(x) != len(y):
        raise ValueError("y_vec and x_vec must have the same length")
    if len(x) > 12:
        raise ValueError("determinant size is capped at N = 12")
    if np.any(np.diff(x) < 0) or np.any(np.diff(y) < 0):
        raise ValueError("vectors must be nondecreasing")
    return float(np.linalg.det(km_matrix(nu, t, y, x)))


def vandermonde(x_vec):
    """``prod_{i<j} (x_j - x_i)``."""
    x = _vec(x_vec, "x_vec")
    d = x[None, :] - x[:, None]
    return float(np.prod(d[np.triu_indices(len(x), 1)]))


def _log_km(nu, t, y, x):
    sign, logdet = np.linalg.slogdet(km_matrix(nu, t, y, x))
    return sign, logdet


def noncolliding_transition(nu, t, y_vec, x_vec, quad=None):
    """Transition density ``h(y) det[p(t, y_i|x_j)] / h(x)`` of the noncolliding system.

    When ``x`` has coincident entries the ratio is replaced by its limit,
    ``h(y) det[phi+_{i-1}(t, y_j)]`` with ``phi+`` given by divided differences
    of ``p(t, y|.)`` over the starting points (evaluated on a contour, see
    :func:`ncbesq.biortho.phi_plus`).
    """
    y = _vec(y_vec, "y_vec")
    x = _vec(x_vec, "x_vec")
    if len(x) != len(y):
        raise ValueError("y_vec and x_vec must have the same length")
    if np.any(np.diff(y) <= 0):
        raise ValueError("y_vec must be strictly increasing")
    if np.any(np.diff(x) < 0):
        raise ValueError("x_vec must be nondecreasing")
    if t == 0:
        return DELTA
    if len(x) == 1:
        return float(p_nu(nu, t, y[0], x[0]))
    if np.all(np.diff(x) > 0) and _well_separated(x, t):
        sign, logdet = _log_km(nu, t, y, x)
        if sign <= 0:
            return 0.0
        return float(math.exp(logdet + math.log(vandermonde(y)) - math.log(vandermonde(x))))
    from .biortho import phi_plus

    mat = np.stack([np.atleast_1d(phi_plus(nu, t, y, x, i)) for i in range(len(x))])
    return max(float(vandermonde(y) * np.linalg.det(mat)), 0.0)


def _well_separated(x, t):
    # the divided-difference route is preferred once starting gaps shrink
    # below ~1e-3 of the diffusive scale; the KM ratio then loses digits
    gaps = np.diff(x)
    scale = max(math.sqrt(t * (1.0 + float(x.max()))), 1e-300)
    return float(gaps.min()) > 1e-3 * scale


def multitime_density(nu, x0, times, configs, quad=None):
    """Joint density of the configurations ``configs[m]`` at ``times[m]`` started from ``x0``.

    ``h(x^(M)) * p_N(t_1, x^(1)|x0) / h(x^(1)) * prod_m det[p(t_{m+1}-t_m, x^(m+1)_i|x^(m)_j)]``,
    accumulated in log space.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) != len(configs):
        raise ValueError("one configuration per time is required")
    if np.any(np.diff(times) <= 0) or times[0] <= 0:
        raise ValueError("times must be positive and strictly increasing")
    cfgs = [_vec(c, "config") for c in configs]
    for c in cfgs:
        if np.any(np.diff(c) <= 0):
            raise ValueError("configurations must be strictly increasing (ordered labels)")
    first = noncolliding_transition(nu, times[0], cfgs[0], x0, quad=quad)
    if first <= 0:
        return 0.0
    logv = math.log(first) - math.log(vandermonde(cfgs[0])) if len(cfgs[0]) > 1 else math.log(first)
    for m in range(1, len(cfgs)):
        sign, logdet = _log_km(nu, times[m] - times[m - 1], cfgs[m], cfgs[m - 1])
        if sign <= 0:
            return 0.0
        logv += logdet
    if len(cfgs[-1]) > 1:
        logv += math.log(vandermonde(cfgs[-1]))
    return float(math.exp(logv))
