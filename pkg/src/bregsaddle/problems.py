"""Bilinear and quadratic saddle instances with exact saddle points.

Instances serialise to a JSON document
``{kind, m, n, A, P, Q, b, c, seed}`` (matrices row-major nested lists).
Python's float repr is the shortest string that round-trips, so
``instance_from_json(instance_to_json(p))`` reproduces every double.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bregsaddle.errors import InvalidArgument, NoSaddlePoint
from bregsaddle.operators import SaddleProblem, spectral_norm

#: Relative residual above which a linear system is declared inconsistent.
CONSISTENCY_TOL = 1e-10
PSD_TOL = 1e-10


@dataclass(frozen=True)
class BilinearGame:
    """``f(x, y) = x^T A y + b^T x + c^T y``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    seed: Optional[int] = None

    kind = "bilinear"


@dataclass(frozen=True)
class QuadraticSaddle:
    """``f = 0.5 x^T P x + x^T A y - 0.5 y^T Q y + b^T x + c^T y``."""

    P: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    seed: Optional[int] = None

    kind = "quadratic"


def _solve(M, rhs):
    # Square nonsingular systems go through LU; otherwise least-norm lstsq.
    if M.shape[0] == M.shape[1]:
        try:
            sol = np.linalg.solve(M, rhs)
            if np.all(np.isfinite(sol)):
                return sol
        except np.linalg.LinAlgError:
            pass
    return np.linalg.lstsq(M, rhs, rcond=None)[0]


def _consistent(M, sol, rhs):
    scale = max(1.0, float(np.linalg.norm(rhs)), float(np.linalg.norm(M)) * float(np.linalg.norm(sol)))
    return float(np.linalg.norm(M @ sol - rhs)) <= CONSISTENCY_TOL * scale


def _vec(a, n, name):
    a = np.array(a, dtype=float).reshape(-1)
    if a.shape != (n,):
        raise InvalidArgument(f"{name} must have length {n}, got {a.shape[0]}")
    return a


def _quadratic_problem(inst, saddle):
    P, Q, A, b, c = inst.P, inst.Q, inst.A, inst.b, inst.c
    m, n = A.shape

    def f(x, y):
        return float(0.5 * x @ P @ x + x @ A @ y - 0.5 * y @ Q @ y + b @ x + c @ y)

    def grad_x(x, y):
        return P @ x + A @ y + b

    def grad_y(x, y):
        return A.T @ x - Q @ y + c

    a_norm = spectral_norm(A)
    consts = (spectral_norm(P), a_norm, spectral_norm(Q), a_norm)
    return SaddleProblem(f, grad_x, grad_y, (m, n), consts, saddle, inst)


def _bilinear_problem(inst, saddle):
    A, b, c = inst.A, inst.b, inst.c
    m, n = A.shape

    def f(x, y):
        return float(x @ A @ y + b @ x + c @ y)

    def grad_x(x, y):
        return A @ y + b

    def grad_y(x, y):
        return A.T @ x + c

    a_norm = spectral_norm(A)
    return SaddleProblem(f, grad_x, grad_y, (m, n), (0.0, a_norm, 0.0, a_norm), saddle, inst)


def make_bilinear(A, b, c, seed=None):
    """Bilinear game with the least-norm saddle of ``A y = -b``, ``A^T x = -c``."""
    A = np.atleast_2d(np.array(A, dtype=float))
    m, n = A.shape
    b = _vec(b, m, "b")
    c = _vec(c, n, "c")
    y_bar = _solve(A, -b)
    x_bar = _solve(A.T, -c)
    if not _consistent(A, y_bar, -b):
        raise NoSaddlePoint("A y = -b has no solution")
    if not _consistent(A.T, x_bar, -c):
        raise NoSaddlePoint("A^T x = -c has no solution")
    return _bilinear_problem(BilinearGame(A, b, c, seed), (x_bar, y_bar))


def _check_psd(M, name):
    if not np.allclose(M, M.T, rtol=0.0, atol=PSD_TOL * max(1.0, float(np.abs(M).max(initial=0.0)))):
        raise InvalidArgument(f"{name} must be symmetric")
    lo = float(np.linalg.eigvalsh(M).min()) if M.size else 0.0
    if lo < -PSD_TOL:
        raise InvalidArgument(f"{name} must be positive semidefinite (smallest eigenvalue {lo:.3e})")


def make_quadratic(P, Q, A, b, c, seed=None):
    """Quadratic saddle whose saddle point solves the KKT system

    ``[[P, A], [A^T, -Q]] [x; y] = [-b; -c]``.
    """
    A = np.atleast_2d(np.array(A, dtype=float))
    m, n = A.shape
    P = np.atleast_2d(np.array(P, dtype=float))
    Q = np.atleast_2d(np.array(Q, dtype=float))
    if P.shape != (m, m) or Q.shape != (n, n):
        raise InvalidArgument(f"P must be {m}x{m} and Q {n}x{n}, got {P.shape} and {Q.shape}")
    _check_psd(P, "P")
    _check_psd(Q, "Q")
    b = _vec(b, m, "b")
    c = _vec(c, n, "c")
    K = np.block([[P, A], [A.T, -Q]])
    rhs = -np.concatenate([b, c])
    z = _solve(K, rhs)
    if not _consistent(K, z, rhs):
        raise NoSaddlePoint("KKT system has no solution")
    return _quadratic_problem(QuadraticSaddle(P, Q, A, b, c, seed), (z[:m], z[m:]))


def random_instance(kind, dims, seed, scale=1.0):
    """Seeded random instance with a saddle point known by construction.

    Draws from ``numpy.random.default_rng(seed)``, in order: ``A`` (m x n),
    then for the quadratic kind ``M_P`` (m x m) and ``M_Q`` (n x n) with
    ``P = M_P^T M_P``, ``Q = M_Q^T M_Q``, and finally ``x0`` (m), ``y0`` (n).
    Every entry is uniform on ``[-scale, scale]``. The linear terms are set
    so that ``(x0, y0)`` is a saddle point.
    """
    m, n = dims
    if m < 1 or n < 1:
        raise InvalidArgument(f"dims must be positive, got {dims}")
    rng = np.random.default_rng(seed)

    def draw(*shape):
        return rng.uniform(-scale, scale, size=shape)

    A = draw(m, n)
    if kind == "bilinear":
        x0, y0 = draw(m), draw(n)
        b = -(A @ y0)
        c = -(A.T @ x0)
        return _bilinear_problem(BilinearGame(A, b, c, seed), (x0, y0))
    if kind == "quadratic":
        MP, MQ = draw(m, m), draw(n, n)
        P = MP.T @ MP
        Q = MQ.T @ MQ
        x0, y0 = draw(m), draw(n)
        b = -(P @ x0 + A @ y0)
        c = -(A.T @ x0 - Q @ y0)
        return _quadratic_problem(QuadraticSaddle(P, Q, A, b, c, seed), (x0, y0))
    raise InvalidArgument(f"unknown instance kind {kind!r}")


def instance_to_dict(problem):
    inst = problem.source if isinstance(problem, SaddleProblem) else problem
    if not isinstance(inst, (BilinearGame, QuadraticSaddle)):
        raise InvalidArgument("problem was not built from a serialisable instance")
    m, n = inst.A.shape
    doc = {"kind": inst.kind, "m": m, "n": n, "A": inst.A.tolist()}
    if inst.kind == "quadratic":
        doc["P"] = inst.P.tolist()
        doc["Q"] = inst.Q.tolist()
    doc["b"] = inst.b.tolist()
    doc["c"] = inst.c.tolist()
    doc["seed"] = inst.seed
    return doc


def instance_from_dict(doc):
    """Rebuild a problem from :func:`instance_to_dict` output.

    The saddle point is recomputed by the dense solve.
    """
    kind = doc.get("kind")
    if kind not in ("bilinear", "quadratic"):
        raise InvalidArgument(f"unknown instance kind {kind!r}")
    m, n = int(doc["m"]), int(doc["n"])
    A = np.array(doc["A"], dtype=float).reshape(m, n)
    if kind == "bilinear":
        prob = make_bilinear(A, doc["b"], doc["c"], seed=doc.get("seed"))
    else:
        prob = make_quadratic(doc["P"], doc["Q"], A, doc["b"], doc["c"], seed=doc.get("seed"))
    return prob


def instance_to_json(problem, **kwargs):
    return json.dumps(instance_to_dict(problem), **kwargs)


def instance_from_json(text):
    return instance_from_dict(json.loads(text))
