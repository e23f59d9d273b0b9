"""Correlation functions, density profiles and Fredholm generating functions."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .quadrature import composite

__all__ = [
    "SpaceTimePointSet",
    "TestFunction",
    "FredholmResult",
    "Profile",
    "corr_rho",
    "density_profile",
    "fredholm_generating",
    "expected_counts",
    "AccuracyWarning",
]

THETA_CAP = 25.0


class AccuracyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SpaceTimePointSet:
    """Points ``points[m]`` observed at ``times[m]`` (ascending, positive)."""

    times: tuple
    points: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        pts = tuple(tuple(float(p) for p in np.atleast_1d(ps)) for ps in self.points)
        if len(times) != len(pts):
            raise ValueError("one point set per time is required")
        if any(t <= 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be positive and strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return sum(len(p) for p in self.points)


@dataclass(frozen=True)
class TestFunction:
    """``chi(x) = exp(theta f(x)) - 1`` on ``support``, zero outside.

    ``f`` is a callable or a constant; ``|theta|`` is capped at 25.
    """

    __test__ = False    # not a pytest class

    support: tuple
    theta: float
    f: Union[Callable, float] = 1.0

    def __post_init__(self):
        a, b = map(float, self.support)
        if not b > a:
            raise ValueError("support must be a nonempty interval")
        if abs(self.theta) > THETA_CAP:
            raise ValueError(f"|theta| is capped at {THETA_CAP}")
        object.__setattr__(self, "support", (a, b))

    def chi(self, x):
        x = np.asarray(x, dtype=float)
        fx = self.f(x) if callable(self.f) else np.full(x.shape, float(self.f))
        inside = (x >= self.support[0]) & (x <= self.support[1])
        return np.where(inside, np.expm1(self.theta * fx), 0.0)


@dataclass
class FredholmResult:
    value: float
    node_ladder: list = field(default_factory=list)    # (nodes per support, value)
    warnings: list = field(default_factory=list)


@dataclass
class Profile:
    x: np.ndarray
    rho: np.ndarray
    cell_counts: np.ndarray    # expected number of particles between consecutive grid points


def _eval(kernel, s, x, t, y):
    return np.asarray(kernel(s, x, t, y), dtype=float)


def corr_rho(kernel, pts: SpaceTimePointSet) -> float:
    """``det[K(t_m, x_i; t_n, x_j)]`` over all space-time points."""
    if pts.size > 50:
        raise ValueError("at most 50 points are supported")
    if pts.size == 0:
        return 1.0
    blocks = []
    for tm, xm in zip(pts.times, pts.points):
        row = []
        for tn, xn in zip(pts.times, pts.points):
            if len(xm) == 0 or len(xn) == 0:
                row.append(np.zeros((len(xm), len(xn))))
                continue
            X, Y = np.meshgrid(np.asarray(xm), np.asarray(xn), indexing="ij")
            row.append(_eval(kernel, tm, X, tn, Y).reshape(len(xm), len(xn)))
        blocks.append(row)
    return float(np.linalg.det(np.block(blocks)))


def _nodes(a, b, n, panels=1):
    return composite(np.linspace(a, b, panels + 1), n)


def density_profile(kernel, t: float, grid, n: int = 16) -> Profile:
    """``K(t,x;t,x)`` on ``grid`` and its integral over each grid cell."""
    if not t > 0:
        raise ValueError("t must be positive")
    grid = np.asarray(grid, dtype=float)
    rho = _eval(kernel, t, grid, t, grid)
    counts = np.empty(len(grid) - 1)
    for k in range(len(grid) - 1):
        u, w = _nodes(grid[k], grid[k + 1], n)
        counts[k] = np.sum(w * _eval(kernel, t, u, t, u))
    return Profile(grid, rho, counts)


def _nystrom(kernel, times, tests, n, panels):
    nodes = []
    for tf in tests:
        u, w = _nodes(tf.support[0], tf.support[1], n, panels)
        nodes.append((u, w * tf.chi(u)))
    size = sum(len(u) for u, _ in nodes)
    A = np.empty((size, size))
    r0 = 0
    for m, (um, _) in enumerate(nodes):
        c0 = 0
        for k, (un, wn) in enumerate(nodes):
            X, Y = np.meshgrid(um, un, indexing="ij")
            A[r0:r0 + len(um), c0:c0 + len(un)] = _eval(kernel, times[m], X, times[k], Y) * wn[None, :]
            c0 += len(un)
        r0 += len(um)
    return float(np.linalg.det(np.eye(size) + A))


def fredholm_generating(kernel, times: Sequence[float], tests: Sequence[TestFunction],
                        n: int = 64, panels: int = 1, levels: int = 3) -> FredholmResult:
    """Generating functional ``Det[I + K chi]`` by Nystrom discretization.

    Gauss-Legendre nodes (``n`` per panel) are placed on every test support;
    the value is reported on a ladder ``n/2**(levels-1) ... n`` and an
    :class:`AccuracyWarning` is raised when the last two differences do not
    shrink by at least a factor 2.
    """
    times = [float(t) for t in times]
    if len(times) != len(tests):
        raise ValueError("one test function per time is required")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be strictly increasing")
    if all(tf.theta == 0 for tf in tests):
        return FredholmResult(1.0, [(n, 1.0)], [])
    ladder = []
    for lev in range(levels - 1, -1, -1):
        nn = max(2, n >> lev)
        ladder.append((nn, _nystrom(kernel, times, tests, nn, panels)))
    res = FredholmResult(ladder[-1][1], ladder)
    if len(ladder) >= 3:
        d1 = abs(ladder[-2][1] - ladder[-3][1])
        d2 = abs(ladder[-1][1] - ladder[-2][1])
        if d2 > 0.5 * d1 and d2 > 1e-13 * max(1.0, abs(res.value)):
            msg = f"node doubling not converging: differences {d1:.3e} -> {d2:.3e}"
            res.warnings.append(msg)
            warnings.warn(msg, AccuracyWarning, stacklevel=2)
    return res


def expected_counts(kernel, t: float, interval, n: int = 64, panels: int = 4):
    """Mean and variance of the number of particles in ``interval`` at time ``t``.

    ``mean = int K(x,x)``, ``variance = mean - int int K(x,y) K(y,x)``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    a, b = map(float, interval)
    u, w = _nodes(a, b, n, panels)
    X, Y = np.meshgrid(u, u, indexing="ij")
    K = _eval(kernel, t, X, t, Y)
    mean = float(np.sum(w * np.diag(K)))
    second = float(w @ (K * K.T) @ w)
    return mean, mean - second
