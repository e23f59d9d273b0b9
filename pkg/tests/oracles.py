"""Independent reference computations shared by several test modules."""
import itertools
import math

import numpy as np


def expansion_generating(kernel, times, tests, N, n=10, chunk=20000):
    """Terminating expansion of the generating functional.

    sum over (n_1..n_M), n_m <= N, of prod_m 1/n_m! times the integral of
    prod chi_m(x) against rho over the space-time points.  Each integral uses
    a tensor Gauss-Legendre rule with ``n`` nodes per coordinate; rho at a
    tensor node is the minor of the kernel matrix on the selected nodes,
    evaluated in batches.
    """
    g, gw = np.polynomial.legendre.leggauss(n)
    xs, ws = [], []
    for tf in tests:
        a, b = tf.support
        x = 0.5 * (b - a) * (g + 1) + a
        xs.append(x)
        ws.append(0.5 * (b - a) * gw * tf.chi(x))
    M = len(times)
    T = np.repeat(np.asarray(times, dtype=float), n)
    X = np.concatenate(xs)
    W = np.concatenate(ws)
    K = np.array([[float(kernel(T[i], X[i], T[j], X[j])) for j in range(M * n)] for i in range(M * n)])
    total = 0.0
    for orders in itertools.product(range(N + 1), repeat=M):
        k = sum(orders)
        if k == 0:
            total += 1.0
            continue
        coef = 1.0 / math.prod(math.factorial(o) for o in orders)
        # every coordinate of time m ranges over that time's n nodes
        offs = np.concatenate([np.full(o, m * n) for m, o in enumerate(orders)])
        grid = np.indices((n,) * k).reshape(k, -1).T + offs
        acc = 0.0
        for s in range(0, len(grid), chunk):
            idx = grid[s:s + chunk]
            sub = K[idx[:, :, None], idx[:, None, :]]
            acc += float(np.sum(np.prod(W[idx], axis=1) * np.linalg.det(sub)))
        total += coef * acc
    return total
