"""Genus-zero canonical products over point configurations.

``Pi0(xi, z) = prod_{x != 0} (1 - z/x)`` and the anchored version
``Phi0(xi, a, z) = prod_{x != a} (1 - (z-a)/(x-a))``.  The gauged variants
multiply by ``z^(nu/2)`` or ``(z/a)^(nu/2)``; for negative ``z`` these factors
are returned as a real magnitude plus an integer phase tag ``k`` meaning
``exp(i k nu pi/2)``, so that kernels can cancel phases exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import special as _sp

from .pointconf import PointConfiguration, as_config
from .specfun import bessel_zeros

__all__ = [
    "PhaseTagged",
    "ProductSpec",
    "pi0",
    "pi_nu",
    "phi0",
    "phi",
    "tail_log",
    "tail_sums",
    "bessel_j_product",
    "phi_bessel_closed",
    "phi_bessel_closed_sq",
]


class PhaseTagged(NamedTuple):
    """Real ``value`` times the phase ``exp(i k nu pi/2)``."""

    value: Union[float, np.ndarray]
    k: Union[int, np.ndarray]

    def to_complex(self, nu):
        return self.value * np.exp(0.5j * np.asarray(self.k) * nu * math.pi)


@dataclass(frozen=True)
class ProductSpec:
    """Truncation settings for products over infinite configurations.

    ``truncation`` is a number of atoms or ``"auto"``; with ``"auto"`` the
    count is grown until the neglected tail (after the asymptotic correction,
    if enabled) is bounded by ``tail_tolerance``.
    """

    truncation: Union[int, str] = "auto"
    tail_tolerance: float = 1e-10
    tail_correction: bool = True
    max_atoms: int = 20_000


def _points(config):
    cfg = as_config(config)
    if not cfg.is_finite:
        raise ValueError("infinite configuration: truncate first or use phi() with a ProductSpec")
    return cfg.points()


def _logprod(factors, axis=-1):
    """Product along ``axis`` through logarithms, with sign (real) or phase (complex)."""
    if np.iscomplexobj(factors):
        with np.errstate(divide="ignore"):
            return np.exp(np.sum(np.log(factors), axis=axis))
    zero = np.any(factors == 0, axis=axis)
    with np.errstate(divide="ignore"):
        logabs = np.sum(np.log(np.abs(factors)), axis=axis)
    sign = np.where(np.sum(factors < 0, axis=axis) % 2 == 1, -1.0, 1.0)
    return np.where(zero, 0.0, sign * np.exp(logabs))


def _ret(v):
    v = np.asarray(v)
    return v[()] if v.ndim == 0 else v


def pi0(config, z):
    """``prod_{x in xi, x != 0} (1 - z/x)`` for real or complex ``z`` (vectorized)."""
    pts = _points(config)
    pts = pts[pts != 0]
    z = np.asarray(z)
    if pts.size == 0:
        return _ret(np.ones_like(z, dtype=z.dtype if np.iscomplexobj(z) else float))
    f = 1.0 - z[..., None] / pts
    return _ret(_logprod(f))


def pi_nu(nu, config, z) -> PhaseTagged:
    """``z^(nu/2) Pi0(xi, z)`` for real ``z``; negative ``z`` gives phase tag 1."""
    z = np.asarray(z, dtype=float)
    mag = np.abs(z) ** (0.5 * nu) * pi0(config, z)
    return PhaseTagged(_ret(mag), _ret(np.where(z < 0, 1, 0)))


def phi0(points, a, z):
    """``prod_{x != a} (1 - (z-a)/(x-a))``, no anchor check.

    ``a`` may be complex (contour use); ``z`` is broadcast against ``a``.
    Atoms equal to ``a`` are dropped with their full multiplicity.
    """
    pts = np.asarray(points)
    a = np.asarray(a)
    z = np.asarray(z)
    d = pts - a[..., None]
    keep = d != 0
    w = (z - a)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(keep, 1.0 - w / np.where(keep, d, 1.0), 1.0)
    return _ret(_logprod(f))


# -- tails of infinite products ---------------------------------------------------

def _model(cfg: PointConfiguration):
    """Asymptotic position model ``x_i ~ (c (i + delta))^gamma`` of a generator, if known."""
    if cfg.label == "bessel_sq_zeros":
        nu = cfg.params["nu"]
        return math.pi, 0.5 * nu - 0.25, 2.0
    if cfg.label == "eta_gamma":
        return 1.0, 0.0, cfg.params["gamma"]
    return None


def tail_sums(cfg: PointConfiguration, a: float, n: int, K: int = None):
    """``(T1, T2) = sum_{i > K} (1/(x_i - a), 1/(x_i - a)^2)`` from the asymptotic model.

    The sums are approximated by midpoint integrals of the model density;
    returns zeros when the generator has no known model.
    """
    model = _model(cfg)
    K = n if K is None else K
    if model is None:
        return 0.0, 0.0
    c, delta, gam = model
    U = K + 0.5 + delta
    if gam == 2.0:
        # int_U^inf du / (c^2 u^2 - a) and its square, c = pi
        b = math.sqrt(abs(a)) / c if a != 0 else 0.0
        if a > 0:
            T1 = math.log((U + b) / (U - b)) / (2 * b * c * c) if b > 0 else 1.0 / (c * c * U)
        elif a < 0:
            T1 = (0.5 * math.pi - math.atan(U / b)) / (b * c * c)
        else:
            T1 = 1.0 / (c * c * U)
        T2 = 1.0 / (3.0 * c**4 * U**3) * (1.0 + 1.2 * a / (c * c * U * U))
        return T1, T2
    # general gamma: expand 1/(u^g - a) = u^-g (1 + a u^-g + ...)
    T1 = U ** (1 - gam) / (gam - 1) + a * U ** (1 - 2 * gam) / (2 * gam - 1)
    T2 = U ** (1 - 2 * gam) / (2 * gam - 1)
    return T1, T2


def tail_log(cfg: PointConfiguration, a: float, z, n: int, K: int = None):
    """``log prod_{i > n} (1 - (z-a)/(x_i - a))`` for an infinite configuration.

    Atoms ``n < i <= K`` (default ``K = 8 n``) are multiplied explicitly; beyond
    ``K`` the log is expanded to second order in ``(z - a)/(x_i - a)`` with the
    model sums of :func:`tail_sums`.
    """
    if cfg.is_finite:
        raise ValueError("tail_log needs a generator-backed configuration")
    K = 8 * n if K is None else K
    pts = cfg.prefix(K).points()[n:K]
    z = np.asarray(z)
    w = z - a
    if pts.size:
        expl = np.sum(np.log1p(-w[..., None] / (pts - a)), axis=-1)
    else:
        expl = np.zeros(np.shape(w))
    T1, T2 = tail_sums(cfg, a, n, K)
    return _ret(expl - w * T1 - 0.5 * w * w * T2)


def _auto_n(cfg, a, z, spec: ProductSpec):
    zmax = float(np.max(np.abs(np.asarray(z) - a))) if np.size(z) else 0.0
    n = 16
    while n < spec.max_atoms:
        pts = cfg.prefix(n).points()
        if pts[-1] > a:
            T1, T2 = tail_sums(cfg, a, n)
            bound = 0.5 * zmax * zmax * T2 if spec.tail_correction else zmax * T1
            if _model(cfg) is not None and bound < spec.tail_tolerance:
                return n
        n *= 2
    return spec.max_atoms


def _anchor(pts, a):
    if a == 0:
        return 0.0
    hit = np.nonzero(np.abs(pts - a) <= 1e-12 * max(abs(a), 1.0))[0]
    if hit.size == 0:
        raise ValueError(f"anchor {a!r} is not an atom of the configuration (nor 0)")
    return float(pts[hit[0]])


def phi(config, a, z, variant: str = "plain", nu: float = None, spec: ProductSpec = None):
    """Anchored product ``Phi0(xi, a, z)`` or its gauged version ``Phi^(nu)``.

    ``a`` must be an atom of ``xi`` or ``0``; ``z`` is real (vectorized).  For
    an infinite configuration the product is truncated per ``spec`` with the
    asymptotic tail correction.  The gauged variant returns a
    :class:`PhaseTagged` ``(|z|/a)^(nu/2) Phi0`` (or ``|z|^(nu/2) Pi0`` at
    ``a = 0``) with ``k = 1`` for ``z < 0``.
    """
    cfg = as_config(config)
    z = np.asarray(z, dtype=float)
    a = float(a)
    if cfg.is_finite:
        pts = cfg.points()
        a = _anchor(pts, a)
        base = pi0(pts, z) if a == 0 else phi0(pts, a, z)
    else:
        spec = spec or ProductSpec()
        n = spec.truncation if spec.truncation != "auto" else _auto_n(cfg, a, z, spec)
        pts = cfg.prefix(int(n)).points()
        a = _anchor(pts, a)
        base = pi0(pts, z) if a == 0 else phi0(pts, a, z)
        if spec.tail_correction:
            base = base * np.exp(tail_log(cfg, a, z, int(n)))
    if variant == "plain":
        return _ret(base)
    if variant != "gauged":
        raise ValueError("variant must be 'plain' or 'gauged'")
    if nu is None:
        raise ValueError("gauged variant needs nu")
    scale = np.abs(z) ** (0.5 * nu) if a == 0 else (np.abs(z) / a) ** (0.5 * nu)
    return PhaseTagged(_ret(scale * base), _ret(np.where(z < 0, 1, 0)))


# -- Bessel specializations -------------------------------------------------------

def bessel_j_product(nu, z, n_terms: int):
    """``(z/2)^nu / Gamma(nu+1) * prod_{i<=n} (1 - z^2/j_{nu,i}^2)`` (truncated)."""
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    j = bessel_zeros(nu, n_terms).as_array()
    z = np.asarray(z, dtype=float)
    prod = pi0(j * j, z * z)
    return _ret((0.5 * z) ** nu / _sp.gamma(nu + 1.0) * prod)


def phi_bessel_closed(nu, i: int, z):
    """``Phi^(nu)(xi_J^2, j_i^2, z^2) = 2 j_i/(j_i^2 - z^2) * J_nu(z)/J_{nu+1}(j_i)`` for ``z >= 0``.

    The removable point ``z = j_i`` is evaluated through the local expansion
    of ``J_nu(z)/(j_i - z)``.
    """
    j = bessel_zeros(nu, i).as_array()[i - 1]
    z = np.asarray(z, dtype=float)
    jp = _sp.jv(nu + 1.0, j)
    h = z - j
    near = np.abs(h) < 1e-6 * j
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(near, jp * (1.0 - 0.5 * h / j), _sp.jv(nu, z) / np.where(near, 1.0, -h))
    return _ret(2.0 * j / (j + z) * ratio / jp)


def phi_bessel_closed_sq(nu, i: int, w, scaled: bool = False) -> PhaseTagged:
    """The closed form in the squared coordinate ``w = z^2``, real ``w``.

    ``w >= 0`` uses :func:`phi_bessel_closed` at ``sqrt(w)``; ``w < 0`` gives
    the magnitude ``2 j/(j^2 + |w|) I_nu(sqrt|w|)/J_{nu+1}(j)`` with ``k = 1``.
    With ``scaled=True`` the negative branch is multiplied by ``exp(-sqrt|w|)``.
    """
    j = bessel_zeros(nu, i).as_array()[i - 1]
    w = np.asarray(w, dtype=float)
    neg = w < 0
    u = np.sqrt(np.abs(w))
    ibr = _sp.ive(nu, u) if scaled else _sp.iv(nu, u)
    negval = 2.0 * j / (j * j + np.abs(w)) * ibr / _sp.jv(nu + 1.0, j)
    posval = phi_bessel_closed(nu, i, np.where(neg, 0.0, u))
    return PhaseTagged(_ret(np.where(neg, negval, posval)), _ret(np.where(neg, 1, 0)))
