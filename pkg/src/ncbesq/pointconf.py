"""Point configurations on [0, inf): finite multisets and lazily generated sequences."""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .specfun import BesselIndex, bessel_zeros

__all__ = [
    "PointConfiguration",
    "CAReport",
    "transform",
    "restrict",
    "canonical_config",
    "ca_estimate",
    "config_from_json",
    "as_config",
]

# hard cap on how far a lazy generator may be materialized by one request
MAX_ATOMS = 200_000


def _merge(positions, mults):
    """Sort positions and merge equal ones, summing multiplicities."""
    order = np.argsort(positions, kind="stable")
    out: list = []
    for i in order:
        p, m = float(positions[i]), int(mults[i])
        if m <= 0:
            raise ValueError("multiplicities must be positive integers")
        if out and out[-1][0] == p:
            out[-1] = (p, out[-1][1] + m)
        else:
            out.append((p, m))
    return tuple(out)


class PointConfiguration:
    """Locally finite configuration given by atoms and an optional generator.

    A finite configuration is a sorted tuple of ``(position, multiplicity)``.
    An infinite one additionally carries ``generator``, a callable mapping a
    count ``n`` to the first ``n`` positions (nondecreasing, unbounded);
    prefixes are memoized under a lock so concurrent readers can extend it.
    Every consumer of an infinite configuration asks for an explicit
    truncation via :meth:`prefix` or :meth:`restrict`.
    """

    def __init__(self, atoms=(), generator: Optional[Callable[[int], np.ndarray]] = None,
                 label: str = "explicit", params: Optional[dict] = None):
        atoms = list(atoms)
        if atoms and not isinstance(atoms[0], (tuple, list)):
            atoms = [(a, 1) for a in atoms]
        if atoms:
            pos = np.asarray([a[0] for a in atoms], dtype=float)
            mul = np.asarray([a[1] for a in atoms], dtype=int)
            if not np.all(np.isfinite(pos)):
                raise ValueError("positions must be finite")
            self._atoms = _merge(pos, mul)
        else:
            self._atoms = ()
        self._generator = generator
        self.label = label
        self.params = dict(params or {})
        self._lock = threading.Lock()
        self._cache = np.asarray([a[0] for a in self._atoms], dtype=float)

    # -- basic properties
    @property
    def is_finite(self) -> bool:
        return self._generator is None

    @property
    def total(self):
        return sum(m for _, m in self._atoms) if self.is_finite else math.inf

    @property
    def atoms(self) -> tuple:
        if not self.is_finite:
            raise ValueError("infinite configuration: call prefix(n) or restrict(a, b) first")
        return self._atoms

    @property
    def simple(self) -> bool:
        if not self.is_finite:
            return True  # generators produce strictly increasing sequences
        return all(m == 1 for _, m in self._atoms)

    def __len__(self):
        if not self.is_finite:
            raise TypeError("infinite configuration has no length")
        return self.total

    def __repr__(self):
        if self.is_finite:
            return f"PointConfiguration({list(self._atoms)!r})"
        return f"PointConfiguration(<{self.label} {self.params}>)"

    def __eq__(self, other):
        if not isinstance(other, PointConfiguration) or not (self.is_finite and other.is_finite):
            return NotImplemented
        return self._atoms == other._atoms

    def points(self) -> np.ndarray:
        """Positions repeated according to multiplicity."""
        return np.repeat([p for p, _ in self.atoms], [m for _, m in self.atoms]).astype(float)

    def positions(self) -> np.ndarray:
        return np.asarray([p for p, _ in self.atoms], dtype=float)

    def multiplicities(self) -> np.ndarray:
        return np.asarray([m for _, m in self.atoms], dtype=int)

    # -- lazy materialization
    def _materialize(self, n: int) -> np.ndarray:
        if n > MAX_ATOMS:
            raise ValueError(f"refusing to materialize more than {MAX_ATOMS} atoms")
        with self._lock:
            if len(self._cache) < n:
                grow = max(n, 2 * len(self._cache))
                self._cache = np.asarray(self._generator(grow), dtype=float)
            return self._cache[:n]

    def prefix(self, n: int) -> "PointConfiguration":
        """First ``n`` atoms (counted with multiplicity for finite configurations)."""
        if self.is_finite:
            return PointConfiguration([(p, 1) for p in self.points()[:n]], label=self.label,
                                      params=self.params)
        return PointConfiguration(self._materialize(int(n)), label=self.label, params=self.params)

    def restrict(self, a: float, b: float) -> "PointConfiguration":
        return restrict(self, (a, b))

    def to_json(self) -> dict:
        d = {"kind": self.label, **self.params}
        if self.is_finite:
            d["points"] = self.points().tolist()
        return d


def _monotone_map(config: PointConfiguration, f, label) -> PointConfiguration:
    if config.is_finite:
        return PointConfiguration([(f(p), m) for p, m in config.atoms], label="explicit")
    gen = config._generator
    return PointConfiguration(generator=lambda n: f(np.asarray(gen(n))), label=label,
                              params=config.params)


def transform(config: PointConfiguration, op: str, value: float = None) -> PointConfiguration:
    """Apply ``shift`` (by ``value``), ``dilate`` (by ``value > 0``), ``square`` or ``square_root``."""
    if op == "shift":
        u = float(value)
        return _monotone_map(config, lambda x: x + u, f"{config.label}+shift")
    if op == "dilate":
        c = float(value)
        if not c > 0:
            raise ValueError("dilation factor must be positive")
        return _monotone_map(config, lambda x: c * x, f"{config.label}*dilate")
    if op == "square":
        if config.is_finite:
            return PointConfiguration([(p * p, m) for p, m in config.atoms])
        if np.any(config._materialize(1) < 0):
            raise ValueError("lazy square needs a nonnegative configuration")
        return _monotone_map(config, lambda x: x * x, f"{config.label}^2")
    if op == "square_root":
        if not config.is_finite:
            raise ValueError("square_root is only provided for finite configurations")
        if any(p < 0 for p, _ in config.atoms):
            raise ValueError("square_root needs a configuration on [0, inf)")
        atoms = []
        for p, m in config.atoms:
            r = math.sqrt(p)
            atoms += [(r, m), (-r, m)]
        return PointConfiguration(atoms)
    raise ValueError(f"unknown operation {op!r}")


def restrict(config: PointConfiguration, interval) -> PointConfiguration:
    """Atoms inside the closed interval ``[a, b]``."""
    a, b = map(float, interval)
    if a > b:
        raise ValueError("empty interval: a > b")
    if config.is_finite:
        return PointConfiguration([(p, m) for p, m in config.atoms if a <= p <= b])
    n = 16
    while True:
        pts = config._materialize(n)
        if pts[-1] > b:
            break
        n *= 2
    keep = pts[(pts >= a) & (pts <= b)]
    return PointConfiguration(keep, label="explicit")


def _eta_gamma(gamma):
    return lambda n: np.arange(1, n + 1, dtype=float) ** gamma


def _bessel_sq(nu):
    return lambda n: bessel_zeros(nu, n).as_array() ** 2


def canonical_config(kind: str, n: Optional[int] = None, *, gamma: float = None,
                     nu: float = None, points=None) -> PointConfiguration:
    """Standard configurations.

    ``eta_gamma`` has atoms ``i**gamma`` (``gamma > 1``), ``bessel_sq_zeros``
    has atoms ``j_{nu,i}**2``.  Both are infinite; when ``n`` is given the first
    ``n`` atoms are materialized eagerly.  ``explicit`` wraps ``points``.
    """
    if kind == "eta_gamma":
        if gamma is None or not gamma > 1:
            raise ValueError("eta_gamma needs gamma > 1")
        cfg = PointConfiguration(generator=_eta_gamma(float(gamma)), label=kind,
                                 params={"gamma": float(gamma)})
    elif kind == "bessel_sq_zeros":
        BesselIndex(nu)
        cfg = PointConfiguration(generator=_bessel_sq(float(nu)), label=kind,
                                 params={"nu": float(nu)})
    elif kind == "explicit":
        if points is None:
            raise ValueError("explicit configuration needs points")
        pts = np.asarray(points, dtype=float)
        if np.any(pts < 0):
            raise ValueError("configurations live on [0, inf)")
        return PointConfiguration(pts)
    else:
        raise ValueError(f"unknown configuration kind {kind!r}")
    if n is not None:
        cfg._materialize(int(n))
    return cfg


def config_from_json(spec) -> PointConfiguration:
    """Build a configuration from a JSON object or string.

    ``{"kind": "explicit", "points": [...]}``, ``{"kind": "eta_gamma", "gamma": g}``
    or ``{"kind": "bessel_sq_zeros", "nu": v}``; an optional ``truncation_L``
    returns the finite restriction to ``[0, L]``.
    """
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("kind", "explicit")
    cfg = canonical_config(kind, gamma=spec.get("gamma"), nu=spec.get("nu"),
                           points=spec.get("points"))
    L = spec.get("truncation_L")
    if L is not None:
        cfg = restrict(cfg, (0.0, float(L)))
    return cfg


def as_config(obj) -> PointConfiguration:
    if isinstance(obj, PointConfiguration):
        return obj
    return PointConfiguration(np.atleast_1d(np.asarray(obj, dtype=float)))


@dataclass
class CAReport:
    """Partial-sum diagnostics for condition (C.A)."""

    alpha: float
    M_alpha_partial: list = field(default_factory=list)   # (L, M_alpha(xi, L))
    M1_shifted: list = field(default_factory=list)        # (a, M_1(tau_{-a} xi, L_max))
    tail_exponent: float = math.nan    # fitted decay of increments, ~L^-kappa
    converges: bool = False
    verdict: str = ""


def _m_alpha(points: np.ndarray, alpha: float, L: float) -> float:
    p = points[(np.abs(points) <= L) & (points != 0)]
    return float(np.sum(np.abs(p) ** (-alpha)) ** (1.0 / alpha))


def ca_estimate(config: PointConfiguration, alpha: float, L_grid, a_sample=()) -> CAReport:
    """Partial sums of ``M_alpha(xi, L)`` over ``L_grid`` and shifted ``M_1``.

    The increments of ``sum |x|^-alpha`` between grid levels are fitted to a
    power law ``L^-kappa`` over the upper half of the grid; ``kappa > 0.05``
    supports convergence, otherwise the report flags divergence.  The
    diagnostic is advisory only.
    """
    if not 0.5 < alpha < 1:
        raise ValueError("alpha must lie in (1/2, 1)")
    L_grid = sorted(float(L) for L in L_grid)
    if len(L_grid) < 3:
        raise ValueError("need at least three truncation levels")
    Lmax = L_grid[-1]
    pts = restrict(config, (0.0, Lmax)).points() if not config.is_finite else config.points()
    rep = CAReport(alpha=alpha)
    sums = []
    for L in L_grid:
        m = _m_alpha(pts, alpha, L)
        rep.M_alpha_partial.append((L, m))
        sums.append(m ** alpha)
    for a in a_sample:
        sh = pts - float(a)
        sh = sh[(np.abs(sh) <= Lmax) & (sh != 0)]
        rep.M1_shifted.append((float(a), float(np.sum(1.0 / np.abs(sh)))))
    inc = np.diff(sums)
    Lr = np.asarray(L_grid[1:])
    tail = slice(len(inc) // 2, None)
    ok = inc[tail] > 0
    if np.count_nonzero(ok) >= 2:
        slope = np.polyfit(np.log(Lr[tail][ok]), np.log(inc[tail][ok]), 1)[0]
        rep.tail_exponent = float(-slope)
        rep.converges = bool(rep.tail_exponent > 0.05)
    else:
        # no mass added beyond the middle of the grid
        rep.tail_exponent = math.inf
        rep.converges = True
    rep.verdict = "convergent" if rep.converges else "divergent"
    return rep
