"""Space-time correlation kernels.

Finite configurations::

    K(s,x;t,y) = sum_{a in xi} p(s,x|a) int_{-inf}^0 Phi0(xi,a,y') p(-t,y'|y) dy'
                 - 1(s>t) p(s-t,x|y)

Every factor is used in its real form (``p(-t, y'<0 | y)`` has phase 0 and
``Phi0`` is real), so no complex arithmetic is needed except on the contour
circles of :func:`kernel_contour`.  In the J gauge the ``z^(nu/2)`` factors
of ``Phi^(nu)`` and ``p_J(-t, z|y)`` come from the same variable and are
paired as conjugates; the result is ``(y/x)^(nu/2)`` times the nu-gauge kernel.

Stationary kernels carry a spectral ``cutoff``: the extended Bessel kernel is
``int_0^c exp(-2w(s-t)) J_nu(2 sqrt(wx)) J_nu(2 sqrt(wy)) dw`` (for ``s <= t``).
The default ``c = 1/4`` is the normalization reached by the relaxation
kernel started from squared Bessel zeros (its density counts the atoms
``j_{nu,i}^2`` one per particle); ``c = 1`` gives the classical hard-edge
normalization ``J_nu(2 sqrt x)``.  The two are related by
``K_c(tau; x, y) = c K_1(c tau; c x, c y)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special as _sp

from .biortho import backward_functional, backward_moments, p_complex_source
from .densities import p_J, p_nu, p_nu_ext
from .entire import phi0, tail_log
from .pointconf import PointConfiguration, as_config
from .quadrature import DEFAULT_QUAD, QuadratureSpec, backward_rule, circle, composite
from .specfun import BesselIndex, bessel_zeros

__all__ = [
    "KernelHandle",
    "ToleranceWarning",
    "kernel_finite",
    "kernel_contour",
    "kernel_J",
    "kernel_infinite",
    "infinite_ladder",
    "bessel_kernel",
    "rho_nu",
    "extended_bessel_kernel",
    "relaxation_kernel",
    "relaxation_remainder",
    "DEFAULT_CUTOFF",
]

DEFAULT_CUTOFF = 0.25


class ToleranceWarning(UserWarning):
    pass


def _grid(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X, Y = np.broadcast_arrays(x, y)
    if np.any(X <= 0) or np.any(Y <= 0):
        raise ValueError("kernels are defined for x, y > 0")
    return X, Y


def _ret(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def _check_times(s, t):
    if not (s > 0 and t > 0):
        raise ValueError("kernels need s, t > 0")


def _finite_atoms(config):
    cfg = as_config(config)
    if not cfg.is_finite:
        raise ValueError("finite kernel needs a finite configuration")
    return cfg


def _lagrange_coeffs(pts, ell):
    """Ascending coefficients in y' of ``Phi0(xi, a_ell, y') = prod_{k != ell} (a_k - y')/(a_k - a_ell)``."""
    others = np.delete(pts, ell)
    if others.size == 0:
        return np.array([1.0])
    c = np.polynomial.polynomial.polyfromroots(others) * (-1.0) ** others.size
    return c / np.prod(others - pts[ell])


def _backward_weights(nu, t, ys, anchors_fn, quad, growth=0.0, power=0.0):
    """``F[ell, j] = int Phi_ell(y') p(-t, y'|y_j) dy'`` by quadrature; one rule for all ``y_j``."""
    ymax = float(np.max(ys))
    v, w = backward_rule(t, ymax, growth=growth, power=power, n=quad.n_gl, tol=quad.tail_tol)
    A = anchors_fn(-v)                       # (n_anchor, n_v)
    P = p_nu_ext(nu, -t, -v[:, None], ys[None, :])   # (n_v, n_y)
    return (A * w[None, :]) @ P


def kernel_finite(nu, config, s, x, t, y, method: str = "moments", quad: QuadratureSpec = None):
    """Finite-N kernel for a simple configuration, nu gauge.

    ``method="moments"`` integrates the degree-``N-1`` polynomial ``Phi0(xi, a, .)``
    exactly against the backward density using its closed-form moments;
    ``method="quadrature"`` integrates the real-form product numerically.
    """
    BesselIndex(nu)
    _check_times(s, t)
    cfg = _finite_atoms(config)
    if not cfg.simple:
        raise ValueError("configuration has repeated atoms: use kernel_contour")
    pts = cfg.points()
    X, Y = _grid(x, y)
    ys, inv = np.unique(Y, return_inverse=True)
    if method == "moments":
        F = np.stack([backward_functional(nu, t, ys, _lagrange_coeffs(pts, l)) for l in range(len(pts))])
    elif method == "quadrature":
        quad = quad or DEFAULT_QUAD
        F = _backward_weights(nu, t, ys, lambda z: phi0(pts, pts[:, None], z[None, :]), quad,
                              power=len(pts) - 1 + 0.5 * abs(nu))
    else:
        raise ValueError(f"unknown method {method!r}")
    Fy = F[:, inv.reshape(Y.shape)]                       # (N, *shape)
    Px = p_nu(nu, s, X[None, ...], pts.reshape((-1,) + (1,) * X.ndim))
    K = np.sum(Px * Fy, axis=0)
    if s > t:
        K = K - p_nu(nu, s - t, X, Y)
    return _ret(K)


def kernel_J(nu, config, s, x, t, y, **kw):
    """J-gauge kernel ``(y/x)^(nu/2) K_nu(s,x;t,y)``."""
    X, Y = _grid(x, y)
    return _ret((Y / X) ** (0.5 * nu) * kernel_finite(nu, config, s, X, t, Y, **kw))


def _quotient_coeffs(pts, z):
    """Ascending coefficients in ``y'`` of ``(Phi0(xi, z, y') - 1)/(y' - z)`` for each contour node ``z``.

    ``Phi0(xi, z, y') = prod (x - y') / prod (x - z)``, so the quotient is a
    polynomial of degree ``N - 1``; synthetic division by ``(y' - z)``.
    """
    num = np.polynomial.polynomial.polyfromroots(pts) * (-1.0) ** len(pts)   # prod (x - y'), ascending
    D = np.prod(pts[None, :] - z[:, None], axis=1)                            # (n_z,)
    a = np.tile(num.astype(complex), (len(z), 1))
    a[:, 0] -= D
    n = len(pts)
    b = np.zeros((len(z), n), dtype=complex)
    b[:, n - 1] = a[:, n]
    for k in range(n - 1, 0, -1):
        b[:, k - 1] = a[:, k] + z * b[:, k]
    return b / D[:, None]


def kernel_contour(nu, config, s, x, t, y, epsilon: float = 1e-8, method: str = "moments",
                   quad: QuadratureSpec = None):
    """Finite-N kernel from the double integral with a Cauchy contour (repeated atoms allowed).

    The ``z`` integral is the trapezoid rule on a circle enclosing the atoms.
    The integrand is taken as ``p(s,x|z) (Phi0(xi,z,y') - 1)/(y' - z) p(-t,y'|y)``:
    the subtracted term integrates to zero around any contour avoiding ``y'``
    (``p(s,x|.)`` is entire) and the difference quotient is analytic at ``z = y'``.

    ``method="moments"``: the quotient is a polynomial in ``y'`` and the ``y'``
    integral over ``(-inf, 0]`` is taken exactly with the backward moments.
    ``method="quadrature"``: the ``y'`` integral runs numerically over
    ``(-inf, -epsilon]``; nodes ``y'`` close to the circle use a second, larger
    circle.  This path loses absolute accuracy ~1e-16 exp(y/2t) at large ``y``.
    """
    BesselIndex(nu)
    _check_times(s, t)
    quad = quad or DEFAULT_QUAD
    cfg = _finite_atoms(config)
    pts = cfg.points()
    X, Y = _grid(x, y)
    lo, hi = float(pts.min()), float(pts.max())
    spread = hi - lo
    center = 0.5 * (lo + hi)
    radius = 0.5 * spread + max(quad.contour_margin, 0.1 * spread)
    ys, inv = np.unique(Y, return_inverse=True)
    xs, xinv = np.unique(X, return_inverse=True)
    if method == "moments":
        z, wz = circle(center, radius, quad.n_contour)
        B = _quotient_coeffs(pts, z)                                          # (n_z, N)
        mom = backward_moments(nu, t, ys, len(pts) - 1)                       # (N, n_y)
        pz = p_complex_source(nu, s, xs[:, None], z[None, :])                 # (n_x, n_z)
        M = (pz * wz[None, :]) @ (B @ mom)
    elif method == "quadrature":
        circles = [circle(center, radius, quad.n_contour),
                   circle(center, 1.5 * radius + 1.0, quad.n_contour)]
        v, w = backward_rule(t, float(ys.max()), power=len(pts) - 1 + 0.5 * abs(nu), n=quad.n_gl,
                             tol=quad.tail_tol, v_min=epsilon)
        yp = -v
        # which circle each node y' uses: the first one it stays clear of
        d0 = np.abs(np.abs(yp - center) - radius)
        use_big = d0 < 0.25 * radius
        G = np.zeros((len(xs), len(yp)), dtype=complex)
        for k, (z, wz) in enumerate(circles):
            sel = use_big if k == 1 else ~use_big
            if not np.any(sel):
                continue
            ypk = yp[sel]
            num = np.prod(pts[None, None, :] - ypk[:, None, None], axis=-1)      # (n_v, 1)
            den = np.prod(pts[None, :] - z[:, None], axis=-1)                     # (n_z,)
            phi = num / den[None, :]                                              # Phi0(xi, z, y')
            quot = (phi - 1.0) / (ypk[:, None] - z[None, :])                       # (n_v, n_z)
            pz = p_complex_source(nu, s, xs[:, None], z[None, :])                 # (n_x, n_z)
            G[:, sel] = (pz * wz[None, :]) @ quot.T
        P = p_nu_ext(nu, -t, yp[:, None], ys[None, :])                            # (n_v, n_y)
        M = (G * w[None, :]) @ P                                                  # (n_x, n_y)
    else:
        raise ValueError(f"unknown method {method!r}")
    scale = np.max(np.abs(M)) if M.size else 1.0
    if np.max(np.abs(M.imag)) > 1e-9 * max(1.0, scale):
        raise RuntimeError(f"contour kernel has imaginary residual {np.max(np.abs(M.imag)):.3e}")
    K = M.real[xinv.reshape(X.shape), inv.reshape(Y.shape)]
    if s > t:
        K = K - p_nu(nu, s - t, X, Y)
    return _ret(K)


def _prune_anchors(nu, s, X, anchors, gauge, rel=1e-18):
    if gauge == "J":
        pv = p_J(nu, s, X.ravel()[:, None], anchors[None, :])
    else:
        pv = p_nu(nu, s, X.ravel()[:, None], anchors[None, :])
    peak = np.max(np.abs(pv), axis=0)
    if not np.max(peak) > 0:
        # every weight underflowed; keep them all so the sum is an honest 0
        return np.arange(len(anchors))
    keep = peak > rel * np.max(peak)
    return np.nonzero(keep)[0]


def kernel_infinite(nu, config, s, x, t, y, L: int, gauge: str = "nu",
                    tail_correction: bool = True, quad: QuadratureSpec = None):
    """Kernel for an infinite configuration truncated to its first ``L`` atoms.

    The anchor sum runs over the first ``L`` atoms and each ``Phi0`` is the
    product over the same ``L`` atoms.  With ``tail_correction`` the product is
    multiplied by the asymptotic estimate of the remaining factors (see
    :func:`ncbesq.entire.tail_log`), which removes the leading ``O(1/L)``
    truncation error.  ``gauge="J"`` returns ``(y/x)^(nu/2)`` times the nu-gauge kernel.
    """
    BesselIndex(nu)
    _check_times(s, t)
    quad = quad or DEFAULT_QUAD
    cfg = as_config(config)
    if cfg.is_finite:
        pts_all = cfg.points()
        if L > len(pts_all):
            raise ValueError("L exceeds the number of atoms and the configuration has no generator")
        if tail_correction:
            raise ValueError("tail correction needs a generator-backed configuration")
    pts = cfg.prefix(L).points()
    X, Y = _grid(x, y)
    idx = _prune_anchors(nu, s, X, pts, gauge)
    anchors = pts[idx]
    ys, inv = np.unique(Y, return_inverse=True)

    def anchors_fn(z):
        A = phi0(pts, anchors[:, None], z[None, :])
        if tail_correction:
            A = A * np.exp(np.stack([tail_log(cfg, a, z, L) for a in anchors]))
        return A

    F = _backward_weights(nu, t, ys, anchors_fn, quad, growth=math.pi, power=0.5 * abs(nu))
    Fy = F[:, inv.reshape(Y.shape)]
    Px = p_nu(nu, s, X[None, ...], anchors.reshape((-1,) + (1,) * X.ndim))
    K = np.sum(Px * Fy, axis=0)
    if s > t:
        K = K - p_nu(nu, s - t, X, Y)
    if gauge == "J":
        K = (Y / X) ** (0.5 * nu) * K
    elif gauge != "nu":
        raise ValueError("gauge must be 'nu' or 'J'")
    return _ret(K)


def infinite_ladder(nu, config, s, x, t, y, L_values, **kw):
    """Values of :func:`kernel_infinite` over increasing ``L`` and their successive differences."""
    vals = [kernel_infinite(nu, config, s, x, t, y, int(L), **kw) for L in L_values]
    diffs = [float(np.max(np.abs(np.asarray(b) - np.asarray(a)))) for a, b in zip(vals, vals[1:])]
    return {"L": [int(L) for L in L_values], "values": vals, "differences": diffs}


# -- stationary Bessel kernels ------------------------------------------------------

def _sq_integral(nu, x, y, lo, hi, decay=0.0, n=32):
    """``int_lo^hi exp(-2 w decay) J(2 sqrt(w x)) J(2 sqrt(w y)) dw`` via ``w = r^2``."""
    X, Y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    rlo, rhi = math.sqrt(lo), math.sqrt(hi)
    freq = 2.0 * math.sqrt(max(float(np.max(X)), float(np.max(Y))))
    n_panels = int(math.ceil(max(4.0, (rhi - rlo) * (freq + 1.0) / 2.0)))
    r, wr = composite(np.linspace(rlo, rhi, n_panels + 1), n)
    wts = 2.0 * r * wr * np.exp(-2.0 * r * r * decay)
    jx = _sp.jv(nu, 2.0 * r * np.sqrt(X.ravel())[:, None])
    jy = _sp.jv(nu, 2.0 * r * np.sqrt(Y.ravel())[:, None])
    return np.sum(jx * jy * wts, axis=1).reshape(X.shape)


def rho_nu(nu, x, form: str = "product", cutoff: float = DEFAULT_CUTOFF):
    """Density ``K(x|x)`` of the Bessel point process.

    ``form="derivative"``: ``J'(v)^2 + (1 - nu^2/v^2) J(v)^2``;
    ``form="product"``: ``J(v)^2 - J_{nu+1}(v) J_{nu-1}(v)``, with ``v = 2 sqrt(c x)``,
    multiplied by ``c``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    v = 2.0 * np.sqrt(cutoff * x)
    if form == "derivative":
        jd = _sp.jvp(nu, v)
        val = jd**2 + (1.0 - nu * nu / (v * v)) * _sp.jv(nu, v) ** 2
    elif form == "product":
        val = _sp.jv(nu, v) ** 2 - _sp.jv(nu + 1.0, v) * _sp.jv(nu - 1.0, v)
    else:
        raise ValueError("form must be 'derivative' or 'product'")
    return _ret(cutoff * val)


def bessel_kernel(nu, x, y, cutoff: float = DEFAULT_CUTOFF):
    """Equal-time Bessel kernel ``K(y|x)`` with spectral cutoff ``c``.

    Off the diagonal the ``J_{nu+1}`` ratio form is used; for ``|x - y|``
    below ``1e-3 max(1, x)`` the defining integral is evaluated instead, and
    exactly on the diagonal :func:`rho_nu`.
    """
    X, Y = _grid(x, y)
    c = cutoff
    a, b = c * X, c * Y
    sa, sb = np.sqrt(a), np.sqrt(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        off = (sa * _sp.jv(nu + 1, 2 * sa) * _sp.jv(nu, 2 * sb)
               - _sp.jv(nu, 2 * sa) * sb * _sp.jv(nu + 1, 2 * sb)) / (a - b)
    out = c * off
    near = np.abs(X - Y) < 1e-3 * np.maximum(1.0, X)
    if np.any(near):
        out = np.where(near, c * _sq_integral(nu, np.where(near, a, 1.0), np.where(near, b, 1.0), 0.0, 1.0), out)
    diag = X == Y
    if np.any(diag):
        out = np.where(diag, rho_nu(nu, np.where(diag, X, 1.0), cutoff=c), out)
    return _ret(out)


def extended_bessel_kernel(nu, s, x, t, y, cutoff: float = DEFAULT_CUTOFF, tol: float = 1e-16):
    """Extended Bessel kernel ``K(s,x;t,y)`` with spectral cutoff ``c``.

    ``s < t``: ``int_0^c e^{-2w(s-t)} J J dw``; ``s = t``: :func:`bessel_kernel`;
    ``s > t``: ``-int_c^W e^{-2w(s-t)} J J dw`` with ``W`` from the exponential tail bound.
    """
    X, Y = _grid(x, y)
    if s == t:
        return bessel_kernel(nu, X, Y, cutoff)
    tau = s - t
    if s < t:
        return _ret(_sq_integral(nu, X, Y, 0.0, cutoff, decay=tau))
    W = cutoff + (-math.log(tol)) / (2.0 * tau)
    return _ret(-_sq_integral(nu, X, Y, cutoff, W, decay=tau))


def _extended_branch(nu, s, x, t, y, branch, cutoff=DEFAULT_CUTOFF, tol=1e-16):
    """A single branch integral of the extended kernel evaluated at any ``(s, t)``."""
    tau = s - t
    if branch == "low":
        return _ret(_sq_integral(nu, x, y, 0.0, cutoff, decay=tau))
    if tau <= 0:
        raise ValueError("the high branch converges only for s > t")
    W = cutoff + (-math.log(tol)) / (2.0 * tau)
    return _ret(-_sq_integral(nu, x, y, cutoff, W, decay=tau))


# -- relaxation kernel ---------------------------------------------------------------

def _fb_integrals(nu, t, ys, j):
    """``int_0^1 e^{ut/2} J(sqrt(u y)) J(sqrt(u) j_i) du`` for all ``y``, ``j_i`` (r = sqrt u)."""
    freq = float(np.max(j)) + math.sqrt(float(np.max(ys)))
    n_panels = int(math.ceil(max(4.0, freq / 2.0)))
    r, wr = composite(np.linspace(0.0, 1.0, n_panels + 1), 32)
    wts = 2.0 * r * wr * np.exp(0.5 * t * r * r)
    Jy = _sp.jv(nu, r[None, :] * np.sqrt(ys)[:, None])        # (n_y, n_r)
    Jj = _sp.jv(nu, r[None, :] * j[:, None])                  # (n_j, n_r)
    return (Jj * wts[None, :]) @ Jy.T                          # (n_j, n_y)


def relaxation_kernel(nu, s, x, t, y, n_zeros: int = 200, path: str = "b",
                      quad: QuadratureSpec = None, tol: float = 1e-12):
    """Kernel of the process started from the squared Bessel zeros (J gauge).

    ``path="a"`` integrates the real-form product
    ``[2j/(j^2+|z|)] I_nu(sqrt|z|)/J_{nu+1}(j) * p_J(-t, z|y)`` over ``z < 0``;
    ``path="b"`` uses the Fourier-Bessel form
    ``(1/J_{nu+1}(j)^2) int_0^1 e^{ut/2} J(sqrt(uy)) J(sqrt(u) j) du``.
    Both are weighted by ``p_J(s, x|j_i^2)`` and summed over ``i <= n_zeros``.
    """
    BesselIndex(nu)
    _check_times(s, t)
    X, Y = _grid(x, y)
    j = bessel_zeros(nu, n_zeros).as_array()
    last = float(np.max(p_J(nu, s, X.ravel(), j[-1] ** 2)))
    if last > tol:
        warnings.warn(f"n_zeros={n_zeros} may be insufficient: p_J(s,x|j_n^2) ~ {last:.2e}",
                      ToleranceWarning, stacklevel=2)
    idx = _prune_anchors(nu, s, X, j * j, "J", rel=1e-20)
    jj = j[idx]
    jp = _sp.jv(nu + 1.0, jj)
    ys, inv = np.unique(Y, return_inverse=True)
    if path == "b":
        F = _fb_integrals(nu, t, ys, jj) / (jp * jp)[:, None]
    elif path == "a":
        quad = quad or DEFAULT_QUAD
        v, w = backward_rule(t, float(ys.max()), growth=1.0, power=0.5 * abs(nu), n=quad.n_gl,
                             tol=quad.tail_tol)
        # magnitude of Phi^(nu) at z = -v times the scaled-I bookkeeping
        phi_mag = (2.0 * jj[:, None] / (jj[:, None] ** 2 + v[None, :])
                   * _sp.ive(nu, np.sqrt(v))[None, :] / jp[:, None])          # * e^{sqrt v}
        pj = p_J(nu, -t, -v[:, None], ys[None, :]) * np.exp(np.sqrt(v))[:, None]
        F = (phi_mag * w[None, :]) @ pj
    else:
        raise ValueError("path must be 'a' or 'b'")
    Fy = F[:, inv.reshape(Y.shape)]
    Px = p_J(nu, s, X[None, ...], (jj * jj).reshape((-1,) + (1,) * X.ndim))
    K = np.sum(Px * Fy, axis=0)
    if s > t:
        K = K - p_J(nu, s - t, X, Y)
    return _ret(K)


def relaxation_remainder(nu, s, x, t, y, cutoff: float = DEFAULT_CUTOFF, **kw):
    """``R = relaxation_kernel - extended_bessel_kernel``."""
    return _ret(np.asarray(relaxation_kernel(nu, s, x, t, y, **kw))
                - np.asarray(extended_bessel_kernel(nu, s, x, t, y, cutoff=cutoff)))


# -- handle -------------------------------------------------------------------------

_KINDS = ("finite_nu", "finite_J", "contour", "infinite", "bessel_stationary",
          "extended_bessel", "relaxation")


@dataclass(frozen=True)
class KernelHandle:
    """A kernel of a given ``kind`` with its parameters, evaluable at ``(s, x, t, y)``."""

    kind: str
    nu: float
    config: Optional[PointConfiguration] = None
    quadrature: QuadratureSpec = DEFAULT_QUAD
    truncation: Optional[int] = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        BesselIndex(self.nu)

    def evaluate(self, s, x, t, y):
        k, nu, q, o = self.kind, self.nu, self.quadrature, self.options
        if k == "finite_nu":
            return kernel_finite(nu, self.config, s, x, t, y, quad=q, **o)
        if k == "finite_J":
            return kernel_J(nu, self.config, s, x, t, y, quad=q, **o)
        if k == "contour":
            return kernel_contour(nu, self.config, s, x, t, y, quad=q, **o)
        if k == "infinite":
            return kernel_infinite(nu, self.config, s, x, t, y, self.truncation, quad=q, **o)
        if k == "bessel_stationary":
            return bessel_kernel(nu, x, y, **o)
        if k == "extended_bessel":
            return extended_bessel_kernel(nu, s, x, t, y, **o)
        return relaxation_kernel(nu, s, x, t, y, n_zeros=self.truncation or 200, quad=q, **o)

    __call__ = evaluate
