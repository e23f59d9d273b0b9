"""Gauss-Legendre rules, radial half-line rules and circle contours."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts, truncation and contour parameters shared by all integrals.

    Attributes
    ----------
    n_gl : int
        Gauss-Legendre nodes per panel.
    n_contour : int
        Trapezoid nodes on contour circles.
    tail_tol : float
        Target size of the neglected tail of half-line integrals.
    contour_margin : float
        Minimum clearance between a contour circle and the enclosed atoms.
    """

    n_gl: int = 32
    n_contour: int = 256
    tail_tol: float = 1e-16
    contour_margin: float = 1.0

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return replace(self, n_gl=self.n_gl * factor, n_contour=self.n_contour * factor)


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(a: float, b: float, n: int = 64):
    """Nodes and weights of the ``n``-point rule on ``[a, b]``."""
    x, w = _leggauss(n)
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


def composite(edges, n: int = 32):
    """Gauss-Legendre rule on consecutive panels ``edges[k] .. edges[k+1]``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(n)
    h = 0.5 * np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def radial_rule(r_max: float, n_panels: int, n: int = 32, grade: int = 12, r_min: float = 0.0):
    """Rule on ``[r_min, r_max]`` with geometric grading toward the left end.

    The grading resolves the algebraic endpoint behaviour ``r^(2 nu + 1)``
    that appears after substituting ``y = r^2`` in half-line integrals with
    ``nu`` close to ``-1``.
    """
    n_panels = max(int(n_panels), 1)
    uniform = np.linspace(r_min, r_max, n_panels + 1)
    first = uniform[1] - r_min
    graded = r_min + first * 0.5 ** np.arange(grade, 0, -1)
    graded = graded[graded > r_min * (1 + 1e-12)] if r_min > 0 else graded
    edges = np.concatenate([[r_min], graded, uniform[1:]])
    return composite(edges, n)


def backward_rule(t: float, y: float, growth: float = 0.0, power: float = 0.0,
                  n: int = 32, tol: float = 1e-16, v_min: float = 0.0):
    """Rule for ``int_{-inf}^{-v_min} dy' F(y')`` against the backward density ``p(-t, y'|y)``.

    Returns nodes ``v = -y' >= v_min`` and weights already including ``dy' = 2 r dr``.
    The integrand is bounded by ``exp((y - v)/2t + growth*sqrt(v)) v^power``;
    the cutoff ``R`` makes that bound smaller than ``tol`` at ``v = R``.
    """
    logtol = -math.log(tol) + max(y, 0.0) / (2.0 * t)
    v = max(4.0 * t, 1.0)
    for _ in range(100):
        v_new = 2.0 * t * (logtol + growth * math.sqrt(v) + max(power, 0.0) * math.log(max(v, 1.0)))
        if abs(v_new - v) < 1e-6 * v:
            v = v_new
            break
        v = v_new
    v = max(v, 4.0 * t * t, 1e-12)
    r_max = math.sqrt(v)
    freq = math.sqrt(max(y, 0.0)) / t + growth
    n_panels = int(math.ceil(max(6.0, r_max * freq / math.pi, r_max / 1.0)))
    r, w = radial_rule(r_max, n_panels, n, r_min=math.sqrt(v_min))
    return r * r, 2.0 * r * w


def circle(center: float, radius: float, n: int = 256):
    """Trapezoid rule on the counterclockwise circle ``|z - center| = radius``.

    Returns nodes ``z`` and weights ``dz / (2 pi i)`` so that
    ``sum(w * f(z))`` approximates the Cauchy integral ``(1/2 pi i) oint f dz``.
    """
    theta = 2.0 * math.pi * (np.arange(n) + 0.5) / n
    e = np.exp(1j * theta)
    z = center + radius * e
    w = radius * e / n
    return z, w


def enclosing_circle(points, margin: float = 1.0, n: int = 256):
    """Circle centred at the midpoint of ``points`` clearing every point by ``margin``."""
    points = np.asarray(points, dtype=float)
    lo, hi = float(points.min()), float(points.max())
    spread = hi - lo
    center = 0.5 * (lo + hi)
    radius = 0.5 * spread + max(margin, 0.1 * spread)
    return circle(center, radius, n)
