"""Monotone operators, the saddle-point operator and Lipschitz constants."""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from bregsaddle.bregman import bregman_distance
from bregsaddle.errors import DegenerateSample, InvalidArgument


@dataclass(frozen=True)
class OperatorHandle:
    """A map ``F: R^d -> R^d`` with an optional global Lipschitz constant."""

    apply: Callable[[np.ndarray], np.ndarray]
    lipschitz: Optional[float] = None
    dimension: Optional[int] = None

    def __call__(self, u):
        return self.apply(u)


@dataclass(frozen=True)
class SaddleProblem:
    """Smooth convex-concave ``f(x, y)`` on ``R^m x R^n``.

    ``block_constants`` is ``(L_xx, L_xy, L_yy, L_yx)``: the Lipschitz
    moduli of ``grad_x f`` in ``x`` and ``y`` and of ``grad_y f`` in ``y``
    and ``x``. ``saddle`` is an exact saddle point ``(x_bar, y_bar)`` when
    one is known. ``source`` keeps the generating instance (matrices) for
    serialisation.
    """

    f: Callable[[np.ndarray, np.ndarray], float]
    grad_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_y: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dims: Tuple[int, int]
    block_constants: Tuple[float, float, float, float]
    saddle: Optional[Tuple[np.ndarray, np.ndarray]] = None
    source: Optional[object] = None

    @property
    def dimension(self):
        return self.dims[0] + self.dims[1]

    def split(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dimension,):
            raise InvalidArgument(f"expected a vector of length {self.dimension}, got shape {z.shape}")
        m = self.dims[0]
        return z[:m], z[m:]

    def value(self, z):
        x, y = self.split(z)
        return float(self.f(x, y))

    @property
    def saddle_point(self):
        """The saddle as one stacked vector ``[x_bar; y_bar]`` (or None)."""
        if self.saddle is None:
            return None
        return np.concatenate(self.saddle)


def lipschitz_from_blocks(problem):
    """``L = 2 * max(L_xx, L_xy, L_yy, L_yx)``."""
    consts = problem.block_constants if isinstance(problem, SaddleProblem) else problem
    if len(consts) != 4 or any(c is None for c in consts):
        raise InvalidArgument("all four block constants are required")
    if any(c < 0 for c in consts):
        raise InvalidArgument(f"block constants must be nonnegative, got {tuple(consts)}")
    return 2.0 * float(max(consts))


def saddle_operator(problem):
    """``F([x; y]) = [grad_x f(x, y); -grad_y f(x, y)]``."""

    def apply(z):
        x, y = problem.split(z)
        return np.concatenate([problem.grad_x(x, y), -np.asarray(problem.grad_y(x, y))])

    return OperatorHandle(apply=apply, lipschitz=lipschitz_from_blocks(problem), dimension=problem.dimension)


def spectral_norm(M, tol=1e-10, max_iter=10000, seed=0):
    """Largest singular value of ``M`` by power iteration on ``M^T M``.

    Stops when the relative change of the estimate drops below ``tol``.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new_sigma = float(np.sqrt(nw))
        if abs(new_sigma - sigma) <= tol * new_sigma:
            sigma = new_sigma
            break
        sigma = new_sigma
    return float(np.linalg.norm(M @ v))


def estimate_lipschitz(op, sample_count, radius, seed, dimension=None):
    """Empirical lower bound on the Lipschitz constant of ``op``.

    Draws ``sample_count`` points uniformly in the ``radius``-ball and
    returns the largest difference quotient over consecutive pairs.
    """
    if sample_count < 2:
        raise InvalidArgument("sample_count must be at least 2")
    if not radius > 0:
        raise InvalidArgument("radius must be positive")
    d = dimension if dimension is not None else op.dimension
    if d is None:
        raise InvalidArgument("operator dimension unknown; pass dimension=")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((sample_count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pts = g * radius * rng.uniform(size=(sample_count, 1)) ** (1.0 / d)
    vals = np.array([op.apply(p) for p in pts])
    best = None
    for i in range(sample_count):
        for j in range(i + 1, sample_count):
            du = np.linalg.norm(pts[i] - pts[j])
            if du == 0.0:
                continue
            q = np.linalg.norm(vals[i] - vals[j]) / du
            best = q if best is None else max(best, q)
    if best is None:
        raise DegenerateSample("all sampled pairs coincide")
    return float(best)


def relative_lipschitz_lambda(L, mu):
    """A modulus-``mu`` generator makes an ``L``-Lipschitz map ``L/mu``-relatively Lipschitz."""
    if L < 0:
        raise InvalidArgument(f"L must be nonnegative, got {L}")
    if not mu > 0:
        raise InvalidArgument(f"mu must be positive, got {mu}")
    return L / mu


def relative_lipschitz_residual(op, gen, u, u_star, v, v_star, z, lam):
    """``<F(v) - F(u), v - z> - lam * (D(v, u; u*) + D(z, v; v*))``.

    Nonpositive whenever ``op`` is ``lam``-relatively Lipschitz.
    """
    u, v, z = (np.asarray(a, dtype=float) for a in (u, v, z))
    lhs = float((op.apply(v) - op.apply(u)) @ (v - z))
    return lhs - lam * (bregman_distance(gen, v, u, u_star) + bregman_distance(gen, z, v, v_star))


def monotonicity_residual(op, u, v):
    """``<F(u) - F(v), u - v>``; nonnegative for monotone ``op``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float((op.apply(u) - op.apply(v)) @ (u - v))
