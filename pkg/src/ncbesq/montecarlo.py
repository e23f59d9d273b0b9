"""Stochastic oracles for the noncolliding BESQ system.

Two samplers: the complex Wishart (Laguerre) matrix process, exact in law
for integer ``nu``, and a guarded Euler-Maruyama scheme for the interacting
SDE.  Random numbers come from Philox generators keyed by ``(seed, block)``
where paths are grouped in fixed blocks of :data:`BLOCK` paths, so results do
not depend on the number of worker threads.
"""
from __future__ import annotations

import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .quadrature import composite

__all__ = [
    "EnsembleSample",
    "Table",
    "CompareReport",
    "laguerre_sample",
    "em_sde_sample",
    "estimate",
    "analytic_density",
    "analytic_two_time",
    "compare",
    "save_ensemble",
    "load_ensemble",
    "trace_mean",
    "BLOCK",
]

BLOCK = 512
MAX_HALVINGS = 20
MAX_EXCLUDED = 0.01
_MAGIC = b"NCBESQ01"


@dataclass
class EnsembleSample:
    """Sampled particle positions ``paths[path, time index, particle]``, sorted per slot."""

    paths: np.ndarray
    times: np.ndarray
    seed: int
    method: str
    params: dict
    excluded: int = 0

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def exclusion_rate(self) -> float:
        total = self.n_paths + self.excluded
        return self.excluded / total if total else 0.0

    def at(self, t) -> np.ndarray:
        idx = np.nonzero(np.isclose(self.times, t, rtol=1e-12, atol=0))[0]
        if idx.size == 0:
            raise ValueError(f"time {t} was not sampled")
        return self.paths[:, idx[0], :]


def _rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), block]))


def _times(times):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be positive and strictly increasing")
    return times


def _run_blocks(fn, n_paths, threads):
    blocks = [(b, min(BLOCK, n_paths - b * BLOCK)) for b in range(-(-n_paths // BLOCK))]
    workers = max(1, int(threads or os.cpu_count() or 1))
    if workers == 1 or len(blocks) == 1:
        return [fn(b, n) for b, n in blocks]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda bn: fn(*bn), blocks))


def trace_mean(nu, N, x0, t):
    """``E[sum_i X_i(t)] = sum x0 + 2 N (N + nu) t``."""
    return float(np.sum(x0)) + 2.0 * N * (N + nu) * t


def laguerre_sample(nu: int, N: int, x0, times, n_paths: int, seed: int = 0,
                    threads: int = None) -> EnsembleSample:
    """Eigenvalues of ``M(t)* M(t)`` for an ``(N+nu) x N`` complex Brownian matrix.

    ``M(0)`` is rectangular diagonal with entries ``sqrt(x0)``; increments
    between sampling times are exact Gaussians.
    """
    if int(nu) != nu or nu < 0:
        raise ValueError("Wishart sampling needs a nonnegative integer nu; use em_sde_sample")
    nu = int(nu)
    x0 = np.sort(np.asarray(x0, dtype=float))
    if x0.shape != (N,) or np.any(x0 < 0):
        raise ValueError("x0 must hold N nonnegative values")
    times = _times(times)
    steps = np.diff(np.concatenate([[0.0], times]))
    rows = N + nu

    def block(b, n):
        rng = _rng(seed, b)
        M = np.zeros((n, rows, N), dtype=complex)
        M[:, np.arange(N), np.arange(N)] = np.sqrt(x0)
        out = np.empty((n, len(times), N))
        for k, dt in enumerate(steps):
            g = rng.standard_normal((2, n, rows, N))
            M += math.sqrt(dt) * (g[0] + 1j * g[1])
            H = np.conj(np.swapaxes(M, 1, 2)) @ M
            out[:, k, :] = np.maximum(np.linalg.eigvalsh(H), 0.0)
        return out

    paths = np.concatenate(_run_blocks(block, n_paths, threads), axis=0)
    return EnsembleSample(paths, times, int(seed), "wishart", {"nu": nu, "N": N, "x0": x0.tolist()})


def _drift(X, nu):
    d = X[..., :, None] - X[..., None, :]
    with np.errstate(divide="ignore"):
        inv = np.where(d != 0, 1.0 / np.where(d != 0, d, 1.0), 0.0)
    return 2.0 * (nu + 1.0) + 4.0 * X * np.sum(inv, axis=-1)


def _ordered(X):
    return np.all(np.diff(X, axis=-1) > 0, axis=-1) & (X[..., 0] > 0)


def _em_step(X, h, dB, nu):
    return X + _drift(X, nu) * h + 2.0 * np.sqrt(np.maximum(X, 0.0)) * dB


def _refine(x, h, dB, nu, rng, depth):
    """Advance one path over ``h`` with Brownian-bridge halving until ordering holds."""
    if depth > MAX_HALVINGS:
        return None
    y = _em_step(x, h, dB, nu)
    if _ordered(y):
        return y
    half = 0.5 * h
    dB1 = 0.5 * dB + math.sqrt(0.25 * h) * rng.standard_normal(x.shape)
    mid = _refine(x, half, dB1, nu, rng, depth + 1)
    if mid is None:
        return None
    return _refine(mid, half, dB - dB1, nu, rng, depth + 1)


def em_sde_sample(nu: float, N: int, x0, times, n_paths: int, dt: float = 1e-4,
                  seed: int = 0, threads: int = None) -> EnsembleSample:
    """Euler-Maruyama for ``dX_i = 2 sqrt(X_i) dB_i + 2(nu+1) dt + 4 X_i sum_j dt/(X_i - X_j)``.

    A step whose update would break the ordering (or leave ``(0, inf)``) is
    redone by Brownian-bridge halving, at most 20 levels deep; paths that
    still fail are excluded and counted.  A best-effort oracle with O(dt) bias.
    """
    if nu < 1:
        raise ValueError("em_sde_sample needs nu >= 1")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (N,) or np.any(x0 <= 0) or np.any(np.diff(x0) <= 0):
        raise ValueError("x0 must be strictly positive and strictly increasing")
    times = _times(times)
    grid = np.concatenate([[0.0], times])

    def block(b, n):
        rng = _rng(seed, b)
        X = np.tile(x0, (n, 1))
        alive = np.ones(n, dtype=bool)
        out = np.empty((n, len(times), N))
        for k in range(len(times)):
            span = grid[k + 1] - grid[k]
            m = max(1, int(math.ceil(span / dt - 1e-9)))
            h = span / m
            for _ in range(m):
                dB = math.sqrt(h) * rng.standard_normal((n, N))
                Y = _em_step(X, h, dB, nu)
                bad = alive & ~_ordered(Y)
                for p in np.nonzero(bad)[0]:
                    y = _refine(X[p], h, dB[p], nu, rng, 1)
                    if y is None:
                        alive[p] = False
                    else:
                        Y[p] = y
                X = np.where(alive[:, None], Y, X)
            out[:, k, :] = X
        return out[alive], int(np.sum(~alive))

    res = _run_blocks(block, n_paths, threads)
    paths = np.concatenate([r[0] for r in res], axis=0)
    excluded = sum(r[1] for r in res)
    ens = EnsembleSample(paths, times, int(seed), "em_sde",
                         {"nu": float(nu), "N": N, "x0": x0.tolist(), "dt": dt}, excluded)
    if ens.exclusion_rate > MAX_EXCLUDED:
        raise RuntimeError(f"EM exclusion rate {ens.exclusion_rate:.3%} exceeds 1%")
    return ens


# -- estimators ---------------------------------------------------------------------

@dataclass
class Table:
    """Rows ``[lo, hi)`` with a value, its standard error and the sample size."""

    lo: np.ndarray
    hi: np.ndarray
    value: np.ndarray
    se: np.ndarray
    n: int = 0
    kind: str = "density"

    def to_csv(self) -> str:
        lines = ["lo,hi,value,se"]
        for row in zip(self.lo, self.hi, self.value, self.se):
            lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"


def _mean_se(samples):
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def _counts(X, lo, hi):
    return np.sum((X[:, :, None] >= lo) & (X[:, :, None] < hi), axis=1).astype(float)


def estimate(ensemble: EnsembleSample, what: str, t=None, bins=None, intervals=None,
             first=None, second=None) -> Table:
    """Empirical density, box counts or two-time count products with standard errors.

    ``what="density"``: ``bins`` are edges; values are particles per unit length.
    ``what="box_counts"``: mean number of particles in each ``[a, b)`` of ``intervals``.
    ``what="two_time_counts"``: ``E[#(t1 in I1) #(t2 in I2)]`` for ``first=(t1, I1)``,
    ``second=(t2, I2)``.  Standard errors are from the per-path sample variance.
    """
    if ensemble.n_paths == 0:
        raise ValueError("empty ensemble")
    if what == "density":
        edges = np.asarray(bins, dtype=float)
        X = ensemble.at(t)
        width = np.diff(edges)
        mean, se = _mean_se(_counts(X, edges[:-1], edges[1:]))
        return Table(edges[:-1], edges[1:], mean / width, se / width, ensemble.n_paths, "density")
    if what == "box_counts":
        iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
        mean, se = _mean_se(_counts(ensemble.at(t), iv[:, 0], iv[:, 1]))
        return Table(iv[:, 0], iv[:, 1], mean, se, ensemble.n_paths, "box_counts")
    if what == "two_time_counts":
        (t1, I1), (t2, I2) = first, second
        c1 = _counts(ensemble.at(t1), np.array([I1[0]]), np.array([I1[1]]))[:, 0]
        c2 = _counts(ensemble.at(t2), np.array([I2[0]]), np.array([I2[1]]))[:, 0]
        mean, se = _mean_se((c1 * c2)[:, None])
        return Table(np.array([I1[0]]), np.array([I1[1]]), mean, se, ensemble.n_paths, "two_time")
    raise ValueError(f"unknown estimate {what!r}")


def analytic_density(kernel, t, edges, n: int = 16) -> Table:
    """Bin averages of ``K(t,x;t,x)`` on the bins of ``edges`` (the prediction for ``density``)."""
    edges = np.asarray(edges, dtype=float)
    vals = np.empty(len(edges) - 1)
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        u, w = composite([a, b], n)
        vals[k] = float(np.sum(w * np.asarray(kernel(t, u, t, u)))) / (b - a)
    return Table(edges[:-1], edges[1:], vals, np.zeros_like(vals), 0, "density")


def analytic_two_time(kernel, first, second, n: int = 24) -> Table:
    """``int_I1 int_I2 det[[K11, K12], [K21, K22]]``, the prediction for ``two_time_counts``."""
    (t1, I1), (t2, I2) = first, second
    u, wu = composite([I1[0], I1[1]], n)
    v, wv = composite([I2[0], I2[1]], n)
    U, V = np.meshgrid(u, v, indexing="ij")
    k11 = np.asarray(kernel(t1, u, t1, u))[:, None]
    k22 = np.asarray(kernel(t2, v, t2, v))[None, :]
    rho = k11 * k22 - np.asarray(kernel(t1, U, t2, V)) * np.asarray(kernel(t2, V, t1, U))
    val = float(wu @ rho @ wv)
    return Table(np.array([I1[0]]), np.array([I1[1]]), np.array([val]), np.zeros(1), 0, "two_time")


@dataclass
class CompareReport:
    z: np.ndarray
    sup_z: float
    chi2: float
    dof: int
    p_value: float
    threshold: float
    passed: bool
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {"z": [float(v) for v in self.z], "sup_z": self.sup_z, "chi2": self.chi2,
                "dof": self.dof, "p_value": self.p_value, "threshold": self.threshold,
                "passed": self.passed}


def compare(analytic: Table, empirical: Table, sigma: float = 3.0) -> CompareReport:
    """Per-row z-scores of ``empirical - analytic`` and a Bonferroni-corrected verdict.

    The family-wise level is that of a two-sided ``sigma`` test; each of the
    ``m`` rows is tested at level ``alpha/m``.  Rows whose empirical standard
    error vanishes use a Poisson floor based on the analytic value.
    """
    if (len(analytic.lo) != len(empirical.lo) or not np.allclose(analytic.lo, empirical.lo)
            or not np.allclose(analytic.hi, empirical.hi)):
        raise ValueError("grid mismatch")
    diff = np.asarray(empirical.value, float) - np.asarray(analytic.value, float)
    se = np.asarray(empirical.se, float)
    notes = []
    if empirical.n and np.any(se == 0):
        width = np.where(empirical.kind == "density", empirical.hi - empirical.lo, 1.0)
        floor = np.sqrt(np.maximum(analytic.value, 0.0) * width / empirical.n) / width
        se = np.where(se > 0, se, floor)
        notes.append("Poisson floor used for rows with zero empirical variance")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(diff == 0, 0.0, diff / se)
    m = len(z)
    alpha = 2.0 * stats.norm.sf(sigma)
    threshold = float(stats.norm.isf(alpha / (2.0 * m)))
    chi2 = float(np.sum(z**2))
    sup = float(np.max(np.abs(z))) if m else 0.0
    return CompareReport(z, sup, chi2, m, float(stats.chi2.sf(chi2, m)), threshold,
                         bool(sup <= threshold), notes)


# -- persistence --------------------------------------------------------------------

def _meta(ens: EnsembleSample) -> dict:
    return {"method": ens.method, "params": ens.params, "times": [float(t) for t in ens.times],
            "seed": ens.seed, "shape": list(ens.paths.shape), "excluded": ens.excluded}


def save_ensemble(ens: EnsembleSample, path: str) -> None:
    """Binary file (magic, header length, JSON header, little-endian float64 body) plus ``path.json``."""
    header = json.dumps(_meta(ens), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(ens.paths, dtype="<f8").tobytes())
    with open(path + ".json", "w") as fh:
        json.dump(_meta(ens), fh, sort_keys=True, indent=2)


def load_ensemble(path: str) -> EnsembleSample:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not an ensemble file")
        (n,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(n))
        body = np.frombuffer(fh.read(), dtype="<f8")
    paths = body.reshape(meta["shape"]).astype(float)
    return EnsembleSample(paths, np.asarray(meta["times"]), meta["seed"], meta["method"],
                          meta["params"], meta["excluded"])
