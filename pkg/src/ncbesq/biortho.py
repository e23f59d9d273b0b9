"""Multiple orthogonal polynomials and the biorthonormal system phi+/phi-.

With ``x_1 <= ... <= x_N`` the atoms of the starting configuration,

    phi+_i(t, x) = (1/2 pi i) oint p(t, x|z) / prod_{k<=i+1} (z - x_k) dz
                 = divided difference of p(t, x|.) over x_1..x_{i+1},
    phi-_i(t, y) = int_{-inf}^0 p(-t, u|y) prod_{k<=i} (u - x_k) du,

so that ``Q_xi = phi+_{N-1}(1, .)`` and ``P_xi = phi-_N(1, .)`` (type I and II).
``phi-_i(t, .)`` is a monic polynomial of degree ``i``; its lower coefficients
depend on ``t`` (e.g. ``phi-_1(t, y) = y - 2(nu+1)t - x_1``).  The backward
moments ``int u^k p(-t, u|y) du = (-1)^k k! (2t)^k L_k^(nu)(y/2t)`` give the
default evaluation; direct quadrature of the real-form integrand is kept as
the independent path.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

from .densities import p_nu, p_nu_ext
from .pointconf import as_config
from .quadrature import DEFAULT_QUAD, QuadratureSpec, backward_rule, composite, enclosing_circle
from .specfun import BesselIndex, bessel_zeros, ibar

__all__ = [
    "backward_moments",
    "backward_functional",
    "p_complex_source",
    "phi_plus",
    "phi_minus",
    "phi_pm",
    "type1_Q",
    "type2_P",
    "S_mn",
    "S_tilde",
    "fourier_bessel",
]


def _atoms(config):
    return np.sort(as_config(config).points())


def backward_moments(nu, t, y, kmax: int):
    """``m_k(t, y) = int_{-inf}^0 u^k p(-t, u|y) du`` for ``k = 0..kmax`` (stacked on axis 0)."""
    y = np.asarray(y, dtype=float)
    k = np.arange(kmax + 1).reshape((-1,) + (1,) * y.ndim)
    lag = _sp.eval_genlaguerre(k, nu, y / (2.0 * t))
    return (-2.0 * t) ** k * _sp.gamma(k + 1.0) * lag


def backward_functional(nu, t, y, coeffs):
    """``int p(-t, u|y) P(u) du`` for the polynomial with ascending ``coeffs``."""
    coeffs = np.asarray(coeffs, dtype=float)
    m = backward_moments(nu, t, y, len(coeffs) - 1)
    return np.tensordot(coeffs, m, axes=(0, 0))


def p_complex_source(nu, t, x, z):
    """``p(t, x|z)`` for complex source ``z``: ``x^nu/(2t)^(nu+1) e^{-(x+z)/2t} ibar(xz/4t^2)``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=complex)
    pref = np.where(x > 0, np.abs(x) ** nu, 1.0 if nu == 0 else 0.0) / (2.0 * t) ** (nu + 1.0)
    return pref * np.exp(-(x + z) / (2.0 * t)) * ibar(nu, x * z / (4.0 * t * t))


def _residue_weights(nodes):
    """Weights ``1/prod_{k != l} (x_l - x_k)`` of a divided difference."""
    d = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(d, 1.0)
    return 1.0 / np.prod(d, axis=1)


def _min_gap(nodes):
    return float(np.min(np.diff(np.sort(nodes)))) if len(nodes) > 1 else math.inf


def phi_plus(nu, t, x, config, i: int, method: str = "auto", quad: QuadratureSpec = None):
    """``phi+_i(t, x)``: divided difference of ``p(t, x|.)`` over the first ``i+1`` atoms.

    ``method`` is ``"residue"`` (simple atoms), ``"contour"`` (trapezoid rule on
    a circle enclosing the atoms, valid for repeated atoms) or ``"auto"``
    (residue unless two of the atoms are closer than ``1e-3 (1 + t)``).
    """
    quad = quad or DEFAULT_QUAD
    nodes = _atoms(config)[: i + 1]
    if len(nodes) < i + 1:
        raise ValueError("index exceeds configuration size")
    x = np.asarray(x, dtype=float)
    if method == "auto":
        method = "residue" if _min_gap(nodes) > 1e-3 * (1.0 + t) else "contour"
    if method == "residue":
        if _min_gap(nodes) == 0:
            raise ValueError("residue path needs simple atoms")
        w = _residue_weights(nodes)
        vals = p_nu(nu, t, x[..., None], nodes)
        return np.sum(w * vals, axis=-1)
    if method == "contour":
        z, w = enclosing_circle(nodes, quad.contour_margin, quad.n_contour)
        den = np.prod(z[:, None] - nodes[None, :], axis=1)
        vals = p_complex_source(nu, t, x[..., None], z)
        res = np.sum(w / den * vals, axis=-1)
        return res.real
    raise ValueError(f"unknown method {method!r}")


def phi_minus(nu, t, y, config, i: int, method: str = "moments", quad: QuadratureSpec = None):
    """``phi-_i(t, y) = int p(-t, u|y) prod_{k<=i} (u - x_k) du``.

    ``method="moments"`` uses the closed-form backward moments,
    ``method="quadrature"`` integrates the real-form density directly over
    ``(-inf, 0]``.
    """
    nodes = _atoms(config)[:i]
    if len(nodes) < i:
        raise ValueError("index exceeds configuration size")
    y = np.asarray(y, dtype=float)
    if method == "moments":
        coeffs = np.polynomial.polynomial.polyfromroots(nodes) if i else np.array([1.0])
        return backward_functional(nu, t, y, coeffs)
    if method == "quadrature":
        quad = quad or DEFAULT_QUAD
        out = np.empty(y.shape)
        for idx, yy in np.ndenumerate(y):
            v, w = backward_rule(t, float(yy), power=i + 0.5 * nu, n=quad.n_gl, tol=quad.tail_tol)
            u = -v
            poly = np.prod(u[:, None] - nodes[None, :], axis=1) if i else 1.0
            out[idx] = np.sum(w * p_nu_ext(nu, -t, u, yy) * poly)
        return out[()] if out.ndim == 0 else out
    raise ValueError(f"unknown method {method!r}")


def phi_pm(nu, config, i: int, sign: str, t, x, **kw):
    """``phi+_i`` (``sign="+"``) or ``phi-_i`` (``sign="-"``) at time ``t > 0``."""
    BesselIndex(nu)
    if not t > 0:
        raise ValueError("t must be positive")
    n = len(as_config(config).points())
    if not 0 <= i < n:
        raise ValueError("need 0 <= i < N")
    if sign == "+":
        return phi_plus(nu, t, x, config, i, **kw)
    if sign == "-":
        return phi_minus(nu, t, x, config, i, **kw)
    raise ValueError("sign must be '+' or '-'")


def type1_Q(nu, config, y, method: str = "auto", quad: QuadratureSpec = None):
    """Type-I function ``Q_xi(y)`` (degree-``n-1`` moment normalization)."""
    n = len(_atoms(config))
    if n == 0:
        raise ValueError("type-I function needs at least one atom")
    return phi_plus(nu, 1.0, y, config, n - 1, method=method, quad=quad)


def type2_P(nu, config, y, method: str = "quadrature", quad: QuadratureSpec = None):
    """Type-II monic polynomial ``P_xi(y)`` via its integral representation."""
    n = len(_atoms(config))
    return phi_minus(nu, 1.0, y, config, n, method=method, quad=quad)


def S_mn(nu, config, t_m, x, t_n, y, form: str = "phi", **kw):
    """``sum_i phi+_i(t_m, x) phi-_i(t_n, y)``.

    ``form="scaled"`` evaluates the same sum through the type I/II functions
    of the dilated configurations, ``(1/t_m) (t_n/t_m)^i M+_i(x/t_m; xi/t_m)
    M-_i(y/t_n; xi/t_n)``.
    """
    atoms = _atoms(config)
    N = len(atoms)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.0
    for i in range(N):
        if form == "phi":
            a = phi_plus(nu, t_m, x, atoms, i, **{k: v for k, v in kw.items() if k != "minus_method"})
            b = phi_minus(nu, t_n, y, atoms, i, method=kw.get("minus_method", "moments"))
        elif form == "scaled":
            a = type1_Q(nu, atoms[: i + 1] / t_m, x / t_m) / t_m
            b = (t_n / t_m) ** i * phi_minus(nu, 1.0, y / t_n, atoms / t_n, i)
        else:
            raise ValueError("form must be 'phi' or 'scaled'")
        total = total + a * b
    return total


def S_tilde(nu, config, t_m, x, t_n, y, **kw):
    """``S_mn - 1(t_m > t_n) p(t_m - t_n, x|y)``."""
    val = S_mn(nu, config, t_m, x, t_n, y, **kw)
    if t_m > t_n:
        val = val - p_nu(nu, t_m - t_n, x, y)
    return val


def fourier_bessel(nu, f, n_terms: int, n_nodes: int = None):
    """Fourier-Bessel coefficients of ``f`` on ``(0, 1)`` and a reconstruction callable.

    ``a_i = 2/J_{nu+1}(j_i)^2 int_0^1 u f(u) J_nu(j_i u) du``.
    """
    j = bessel_zeros(nu, n_terms).as_array()
    n_panels = max(8, int(math.ceil(j[-1] / 4.0)))
    u, w = composite(np.linspace(0.0, 1.0, n_panels + 1), n_nodes or 24)
    fu = np.asarray(f(u), dtype=float)
    basis = _sp.jv(nu, j[:, None] * u[None, :])
    norm = 2.0 / _sp.jv(nu + 1.0, j) ** 2
    coeffs = norm * (basis @ (w * u * fu))

    def reconstruct(x, n=None):
        m = n_terms if n is None else n
        x = np.asarray(x, dtype=float)
        return np.tensordot(coeffs[:m], _sp.jv(nu, j[:m, None] * x.ravel()[None, :]), axes=1).reshape(x.shape)

    return coeffs, reconstruct
