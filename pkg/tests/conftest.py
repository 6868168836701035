import math

import numpy as np
import pytest

from bregsaddle import make_quadratic, random_instance


def golden_section_min(fun, lo, hi, tol=1e-12, max_iter=500, less=None):
    """Minimise a unimodal scalar function on [lo, hi].

    ``less(c, d)`` may replace ``fun(c) < fun(d)``; comparing raw values
    stalls at about sqrt(eps) relative accuracy near a smooth minimum.
    """
    if less is None:
        def less(c, d):
            return fun(c) < fun(d)
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if less(c, d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    return (a + b) / 2


def prox_abs_oracle(gamma, u, lo=-10.0, hi=10.0):
    """argmin_t gamma|t| + (t - u)^2 / 2 by golden-section search.

    Points are compared through the exact difference
    ``gamma(|c| - |d|) + (c - d)(c + d - 2u)/2``, which keeps full precision
    near the minimiser.
    """
    return golden_section_min(
        None, lo, hi, tol=1e-14, less=lambda c, d: gamma * (abs(c) - abs(d)) + 0.5 * (c - d) * (c + d - 2 * u) < 0
    )


def central_diff(fun, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def scalar_eg_xy(x, y, eta, steps):
    """Extragradient on f(x, y) = x*y written out with plain floats."""
    out = [(x, y, None, None)]
    for _ in range(steps):
        xb = x - eta * y
        yb = y + eta * x
        x, y = x - eta * yb, y + eta * xb
        out.append((x, y, xb, yb))
    return out


def sparse_instance():
    """50-dim quadratic saddle whose solution vanishes on 30 weakly coupled coordinates.

    Returns ``(problem, inactive_indices)``.
    """
    rng = np.random.default_rng(7)
    m = n = 25
    A = rng.uniform(-1, 1, (m, n))
    MP = rng.uniform(-1, 1, (m, m))
    MQ = rng.uniform(-1, 1, (n, n))
    P = MP.T @ MP / m + 0.5 * np.eye(m)
    Q = MQ.T @ MQ / n + 0.5 * np.eye(n)
    x0 = rng.uniform(-1, 1, m)
    y0 = rng.uniform(-1, 1, n)
    x0[10:] = 0.0
    y0[10:] = 0.0
    inactive = np.r_[np.arange(10, 25), 25 + np.arange(10, 25)]
    w = np.ones(m + n)
    w[inactive] = 0.1
    wx, wy = w[:m], w[m:]
    A = A * np.outer(wx, wy)
    P = P * np.outer(wx, wx)
    Q = Q * np.outer(wy, wy)
    b = -(P @ x0 + A @ y0)
    c = -(A.T @ x0 - Q @ y0)
    return make_quadratic(P, Q, A, b, c), inactive


def instance_suite(count=50):
    """Seeded bilinear and quadratic instances of mixed shapes."""
    out = []
    for seed in range(count):
        rng = np.random.default_rng(1000 + seed)
        m, n = (int(v) for v in rng.integers(1, 13, size=2))
        kind = "bilinear" if seed % 2 == 0 else "quadratic"
        out.append(random_instance(kind, (m, n), seed, scale=float(rng.uniform(0.5, 2.0))))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
