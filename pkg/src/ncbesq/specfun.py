"""Gamma and Bessel functions, Bessel zeros.

Production evaluation of ``J_nu``, ``I_nu`` and ``Gamma`` goes through
:mod:`scipy.special` (AMOS/Cephes).  The power series and the Hankel
large-argument expansion are kept here as an independent reference pair;
the test-suite checks that the production path and the reference pair agree
where each reference is valid.

Every downstream formula that needs e.g. ``J_nu(2 sqrt(u x))`` performs the
substitution itself and calls :func:`bessel_j` with a plain argument.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

__all__ = [
    "BesselIndex",
    "ZeroTable",
    "gamma",
    "bessel_j",
    "bessel_i",
    "bessel_i_scaled",
    "bessel_j_deriv",
    "bessel_j_series",
    "bessel_j_asymptotic",
    "bessel_zeros",
    "ibar",
    "ibar_scaled",
]


@dataclass(frozen=True)
class BesselIndex:
    """Index ``nu > -1`` of a squared Bessel process."""

    nu: float

    def __post_init__(self):
        if not np.isfinite(self.nu) or self.nu <= -1:
            raise ValueError(f"Bessel index must satisfy nu > -1, got {self.nu!r}")

    @property
    def dimension(self) -> float:
        """Equivalent Brownian dimension ``d = 2(nu + 1)``."""
        return 2.0 * (self.nu + 1.0)

    def __float__(self):
        return float(self.nu)


def _order(index) -> float:
    return float(index.nu) if isinstance(index, BesselIndex) else float(index)


def _nonneg(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be nonnegative")
    return x


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def gamma(x):
    """Gamma function for positive real arguments."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("gamma is only defined here for x > 0")
    return _out(_sp.gamma(x))


def bessel_j(index, x):
    """Bessel function of the first kind ``J_nu(x)`` for ``x >= 0``.

    Any real order is accepted so that the shifted orders ``nu +- 1`` needed
    by the kernel formulas can be requested directly.
    """
    return _out(_sp.jv(_order(index), _nonneg(x)))


def bessel_i(index, x):
    """Modified Bessel function ``I_nu(x)`` for ``x >= 0``.

    Raises :class:`OverflowError` when the unscaled value is not representable;
    use :func:`bessel_i_scaled` in that case.
    """
    x = _nonneg(x)
    v = _sp.iv(_order(index), x)
    if np.any(np.isinf(v)):
        raise OverflowError("I_nu overflows; use bessel_i_scaled")
    return _out(v)


_IVE_BIG = 1e8


def _ive(nu, x):
    """``scipy.special.ive`` with a Hankel-series fallback past its argument range (~1e9)."""
    x = np.asarray(x, dtype=float)
    out = _sp.ive(nu, x)
    big = x > _IVE_BIG
    if np.any(big):
        u = x[big]
        mu = 4.0 * nu * nu
        term = np.ones_like(u)
        total = term.copy()
        for k in range(1, 6):
            term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * u)
            total += term
        out = np.array(out, copy=True)
        out[big] = total / np.sqrt(2.0 * math.pi * u)
    return out


def bessel_i_scaled(index, x):
    """Exponentially scaled ``exp(-x) I_nu(x)``."""
    return _out(_ive(_order(index), _nonneg(x)))


def bessel_j_deriv(index, x):
    """``J'_nu(x) = (nu/x) J_nu(x) - J_{nu+1}(x)`` (recurrence, no differencing)."""
    nu = _order(index)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be nonnegative")
    at_zero = x == 0
    if np.any(at_zero) and nu < 1:
        raise ValueError("J'_nu(0) is not finite/defined for nu < 1")
    xs = np.where(at_zero, 1.0, x)
    d = nu / xs * _sp.jv(nu, xs) - _sp.jv(nu + 1, xs)
    if np.any(at_zero):
        d = np.where(at_zero, 0.5 if nu == 1 else 0.0, d)
    return _out(d)


def bessel_j_series(index, x, terms: int = 80):
    """Reference power series of ``J_nu``; reliable for moderate ``x`` only."""
    nu = _order(index)
    x = np.asarray(_nonneg(x), dtype=float)
    h = (x / 2.0) ** 2
    term = np.where(x > 0, (x / 2.0) ** nu if nu != 0 else 1.0, 1.0 if nu == 0 else 0.0)
    term = term / _sp.gamma(nu + 1.0)
    total = term.copy()
    for n in range(1, terms):
        term = term * (-h) / (n * (n + nu))
        total = total + term
    return _out(total)


def bessel_j_asymptotic(index, x, terms: int = 30):
    """Reference Hankel expansion of ``J_nu`` for large ``x``."""
    nu = _order(index)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("asymptotic form needs x > 0")
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    a = 1.0  # a_k(nu) = prod_{m=1..k} (mu - (2m-1)^2) / (k! 8^k)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, terms):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0)
        t = a / x**k
        # truncate each element once its terms start to grow
        active &= np.abs(t) <= prev
        if not np.any(active):
            break
        prev = np.where(active, np.abs(t), prev)
        t = np.where(active, t, 0.0)
        if k % 2 == 1:
            q = q + (-1) ** ((k - 1) // 2) * t
        else:
            p = p + (-1) ** (k // 2) * t
    w = x - (0.5 * nu + 0.25) * math.pi
    return _out(np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(w) - q * np.sin(w)))


def ibar(nu: float, q):
    """Entire function ``sum_n q^n / (n! Gamma(n + nu + 1))``.

    Equals ``q^{-nu/2} I_nu(2 sqrt q)`` for ``q > 0`` and
    ``|q|^{-nu/2} J_nu(2 sqrt|q|)`` for ``q < 0``.  Complex ``q`` is accepted
    (used on contour circles).
    """
    return ibar_scaled(nu, q) * np.exp(2.0 * np.real(np.sqrt(np.asarray(q, dtype=complex))))


def ibar_scaled(nu: float, q):
    """``exp(-2 Re sqrt q) * ibar(nu, q)``; real output for real input."""
    q = np.asarray(q)
    is_complex = np.iscomplexobj(q)
    qc = q.astype(complex)
    r = np.sqrt(qc)  # principal branch, Re r >= 0
    small = np.abs(qc) < 0.25
    out = np.empty(qc.shape, dtype=complex)
    if np.any(~small):
        qb = qc[~small]
        rb = r[~small]
        if not is_complex and np.all(np.imag(qb) == 0):
            qr = qb.real
            pos = qr > 0
            vals = np.empty(qr.shape, dtype=complex)
            rr = np.sqrt(np.abs(qr))
            vals[pos] = rr[pos] ** (-nu) * _ive(nu, 2 * rr[pos])
            vals[~pos] = rr[~pos] ** (-nu) * _sp.jv(nu, 2 * rr[~pos])
            out[~small] = vals
        else:
            # (sqrt q)^nu and q^{nu/2} share the principal branch, so the
            # combination below is the entire function itself.
            out[~small] = rb ** (-nu) * _sp.ive(nu, 2 * rb)
    if np.any(small):
        qs = qc[small]
        term = np.full(qs.shape, 1.0 / _sp.gamma(nu + 1.0), dtype=complex)
        total = term.copy()
        for n in range(1, 30):
            term = term * qs / (n * (n + nu))
            total = total + term
        out[small] = total * np.exp(-2.0 * np.real(r[small]))
    if not is_complex:
        out = out.real
    return out if out.ndim else out[()]


@dataclass(frozen=True)
class ZeroTable:
    """First ``n`` positive zeros of ``J_nu`` in ascending order."""

    nu: float
    zeros: tuple

    def __post_init__(self):
        z = np.asarray(self.zeros)
        if z.size and (np.any(z <= 0) or np.any(np.diff(z) <= 0)):
            raise ValueError("zeros must be positive and strictly increasing")

    def __len__(self):
        return len(self.zeros)

    def __getitem__(self, i):
        return self.zeros[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.zeros, dtype=float)


class BracketError(RuntimeError):
    pass


_zero_cache: dict = {}
_zero_lock = threading.Lock()


def _mcmahon(nu, i):
    beta = (np.asarray(i, dtype=float) + 0.5 * nu - 0.25) * math.pi
    mu = 4.0 * nu * nu
    return beta - (mu - 1) / (8 * beta) - 4 * (mu - 1) * (7 * mu - 31) / (3 * (8 * beta) ** 3)


def _find_brackets(nu: float, n: int):
    """Sign-change brackets for the first ``n`` positive zeros of ``J_nu``."""
    step = 0.2
    lo = 1e-3
    hi = float(_mcmahon(nu, n + 2)) + 5.0 + max(nu, 0.0)
    grid = np.arange(lo, hi + step, step)
    vals = _sp.jv(nu, grid)
    idx = np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]
    if idx.size < n:
        raise BracketError(f"could not bracket zero #{idx.size + 1} of J_{nu}")
    idx = idx[:n]
    return grid[idx], grid[idx + 1]


def _refine(nu: float, a: np.ndarray, b: np.ndarray, maxiter: int = 100):
    """Safeguarded Newton on a set of brackets, vectorized."""
    fa = _sp.jv(nu, a)
    x = 0.5 * (a + b)
    for _ in range(maxiter):
        f = _sp.jv(nu, x)
        left = np.signbit(f) == np.signbit(fa)
        a = np.where(left, x, a)
        fa = np.where(left, f, fa)
        b = np.where(left, b, x)
        d = nu / x * f - _sp.jv(nu + 1, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - f / d
        bad = ~np.isfinite(xn) | (xn <= a) | (xn >= b)
        xn = np.where(bad, 0.5 * (a + b), xn)
        if np.all(np.abs(xn - x) <= 4 * np.finfo(float).eps * xn):
            x = xn
            break
        x = xn
    # polish: pick the float within a few ulps where |J_nu| is smallest
    ulp = np.spacing(x)
    cand = x[None, :] + np.arange(-4, 5)[:, None] * ulp[None, :]
    best = np.argmin(np.abs(_sp.jv(nu, cand)), axis=0)
    return cand[best, np.arange(x.size)]


def bessel_zeros(index, n: int) -> ZeroTable:
    """First ``n`` positive zeros ``j_{nu,1} < ... < j_{nu,n}`` of ``J_nu``.

    Zeros are bracketed by sign changes on a fine grid, then polished by a
    bracket-safeguarded Newton iteration using ``J'_nu`` from the recurrence.
    Results are cached per ``nu`` for the lifetime of the process.
    """
    nu = _order(index)
    BesselIndex(nu)
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    with _zero_lock:
        cached = _zero_cache.get(nu)
        if cached is not None and len(cached) >= n:
            return ZeroTable(nu, tuple(cached[:n]))
    a, b = _find_brackets(nu, n)
    z = _refine(nu, a, b)
    # certification: the bracket still straddles a sign change
    ok = np.signbit(_sp.jv(nu, np.nextafter(z, 0))) != np.signbit(_sp.jv(nu, np.nextafter(z, np.inf)))
    ok |= _sp.jv(nu, z) == 0
    ok |= np.abs(_sp.jv(nu, z)) < 1e-13
    if not np.all(ok):
        bad = int(np.nonzero(~ok)[0][0]) + 1
        raise BracketError(f"zero #{bad} of J_{nu} failed certification")
    with _zero_lock:
        _zero_cache[nu] = tuple(float(v) for v in z)
    return ZeroTable(nu, tuple(float(v) for v in z))
