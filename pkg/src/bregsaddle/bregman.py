"""Bregman distance generators, their mirror maps, and distance identities.

A generator is a strongly convex function ``omega`` together with the
gradient of its convex conjugate (the mirror map), which sends a dual point
back to the unique primal point where it is a subgradient.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from bregsaddle.errors import InconsistentDual, InvalidArgument, UnsupportedOperation

#: Tolerance for the check ``mirror(v_star) == v`` used to accept a dual.
SUBGRADIENT_TOL = 1e-8


@dataclass(frozen=True)
class BregmanGenerator:
    """Strongly convex generator ``omega`` with its mirror map.

    Parameters
    ----------
    eval : callable
        ``u -> omega(u)``.
    modulus : float
        Strong convexity modulus ``mu > 0``.
    mirror : callable
        ``u_star -> grad omega*(u_star)``.
    subgrad : callable or None
        Canonical selector of an element of ``partial omega(u)``. Only used
        for initialisation and diagnostics; solvers thread duals explicitly.
    dimension : int
    name : str
        Short identifier (``"euclidean"``, ``"augmented_l1"``, ...).
    params : dict
        Construction parameters, kept for serialisation.
    """

    eval: Callable[[np.ndarray], float]
    modulus: float
    mirror: Callable[[np.ndarray], np.ndarray]
    subgrad: Optional[Callable[[np.ndarray], np.ndarray]]
    dimension: int
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def conjugate(self, u_star):
        """Evaluate ``omega*(u_star)`` through the Fenchel equality.

        ``omega*(u*) = <u, u*> - omega(u)`` at ``u = mirror(u*)``, which is
        exact whenever the mirror map is.
        """
        u_star = np.asarray(u_star, dtype=float)
        u = self.mirror(u_star)
        return float(u @ u_star) - self.eval(u)

    def dual_of(self, u):
        """Canonical dual point ``subgrad(u)``."""
        if self.subgrad is None:
            raise UnsupportedOperation(
                f"generator {self.name!r} has no subgradient selector; supply the dual explicitly"
            )
        return self.subgrad(np.asarray(u, dtype=float))

    def pair(self, primal=None, dual=None):
        """Build a consistent :class:`DualPair`.

        With only ``primal`` the canonical subgradient is used. With a
        ``dual`` the primal is recomputed as ``mirror(dual)``.
        """
        if dual is not None:
            dual = np.array(dual, dtype=float)
            return DualPair(self.mirror(dual), dual)
        if primal is None:
            raise InvalidArgument("need a primal or a dual point")
        primal = np.array(primal, dtype=float)
        return DualPair(primal, self.dual_of(primal))


@dataclass(frozen=True)
class DualPair:
    """Primal point ``u`` with a dual ``u_star`` such that ``u = mirror(u_star)``."""

    primal: np.ndarray
    dual: np.ndarray

    def is_consistent(self, gen, tol=1e-10):
        return float(np.linalg.norm(gen.mirror(self.dual) - self.primal)) <= tol


def _check_dimension(dimension):
    if int(dimension) != dimension or dimension < 1:
        raise InvalidArgument(f"dimension must be a positive integer, got {dimension!r}")
    return int(dimension)


def _identity(u):
    return np.array(u, dtype=float)


def euclidean_generator(dimension):
    """``omega(u) = 0.5 * ||u||^2``; the mirror map is the identity."""
    dimension = _check_dimension(dimension)
    return BregmanGenerator(
        eval=lambda u: 0.5 * float(np.dot(u, u)),
        modulus=1.0,
        mirror=_identity,
        subgrad=_identity,
        dimension=dimension,
        name="euclidean",
    )


def shrinkage(gamma, u):
    """Soft-thresholding ``sign(u) * max(|u| - gamma, 0)``, component-wise.

    Entries with ``|u_i| <= gamma`` come out as an exact ``0.0``.

    Examples
    --------
    >>> shrinkage(1.0, np.array([2.0, -0.5, 0.0]))
    array([1., 0., 0.])
    """
    if gamma < 0:
        raise InvalidArgument(f"gamma must be nonnegative, got {gamma}")
    u = np.asarray(u, dtype=float)
    mag = np.abs(u) - gamma
    out = np.where(mag > 0.0, np.copysign(mag, u), 0.0)
    return out


def augmented_l1_generator(dimension, gamma):
    """``omega(u) = gamma * ||u||_1 + 0.5 * ||u||^2`` with shrinkage mirror map.

    The subgradient selector returns ``u + gamma * sign(u)``, taking the
    offset 0 at zero coordinates.
    """
    dimension = _check_dimension(dimension)
    if not gamma > 0:
        raise InvalidArgument(f"gamma must be positive, got {gamma}")
    gamma = float(gamma)

    def eval_(u):
        return gamma * float(np.sum(np.abs(u))) + 0.5 * float(np.dot(u, u))

    def subgrad(u):
        u = np.asarray(u, dtype=float)
        return u + gamma * np.sign(u)

    return BregmanGenerator(
        eval=eval_,
        modulus=1.0,
        mirror=lambda v: shrinkage(gamma, v),
        subgrad=subgrad,
        dimension=dimension,
        name="augmented_l1",
        params={"gamma": gamma},
    )


def prox_regularized_generator(dimension, psi_eval, psi_prox, psi_subgrad=None, name="prox_regularized", params=None):
    """``omega(u) = psi(u) + 0.5 * ||u||^2`` whose mirror map is ``prox_psi``.

    ``psi_prox`` must be the exact proximal map of ``psi_eval``; this is not
    checked here. ``psi_subgrad``, if given, selects an element of
    ``partial psi(u)`` and enables :meth:`BregmanGenerator.dual_of`.
    """
    dimension = _check_dimension(dimension)

    subgrad = None
    if psi_subgrad is not None:
        def subgrad(u):
            u = np.asarray(u, dtype=float)
            return u + psi_subgrad(u)

    return BregmanGenerator(
        eval=lambda u: float(psi_eval(u)) + 0.5 * float(np.dot(u, u)),
        modulus=1.0,
        mirror=lambda v: np.asarray(psi_prox(np.asarray(v, dtype=float)), dtype=float),
        subgrad=subgrad,
        dimension=dimension,
        name=name,
        params=dict(params or {}),
    )


def named_psi(kind, gamma=1.0):
    """Return ``(psi_eval, psi_prox, psi_subgrad)`` for a named regulariser.

    ``"zero"``, ``"l1"`` (``gamma * ||u||_1``) and ``"half_sq"``
    (``0.5 * gamma * ||u||^2``).
    """
    if kind == "zero":
        return (lambda u: 0.0), _identity, (lambda u: np.zeros_like(u))
    if kind == "l1":
        if not gamma > 0:
            raise InvalidArgument(f"gamma must be positive, got {gamma}")
        return (
            lambda u: gamma * float(np.sum(np.abs(u))),
            lambda v: shrinkage(gamma, v),
            lambda u: gamma * np.sign(u),
        )
    if kind == "half_sq":
        if not gamma > 0:
            raise InvalidArgument(f"gamma must be positive, got {gamma}")
        return (
            lambda u: 0.5 * gamma * float(np.dot(u, u)),
            lambda v: np.asarray(v, dtype=float) / (1.0 + gamma),
            lambda u: gamma * np.asarray(u, dtype=float),
        )
    raise InvalidArgument(f"unknown regulariser {kind!r}")


def check_dual(gen, v, v_star, tol=SUBGRADIENT_TOL):
    """Raise :class:`InconsistentDual` unless ``mirror(v_star)`` equals ``v``.

    The tolerance is relative to ``max(1, ||v||)``.
    """
    v = np.asarray(v, dtype=float)
    err = float(np.linalg.norm(gen.mirror(np.asarray(v_star, dtype=float)) - v))
    if not err <= tol * max(1.0, float(np.linalg.norm(v))):
        raise InconsistentDual(f"dual is not a subgradient at the primal point (|mirror(v*) - v| = {err:.3e})")


def _distance(gen, u, v, v_star):
    return gen.eval(u) - gen.eval(v) - float(v_star @ (u - v))


def bregman_distance(gen, u, v, v_star, check=True):
    """``D(u, v; v*) = omega(u) - omega(v) - <v*, u - v>``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    if check:
        check_dual(gen, v, v_star)
    return _distance(gen, u, v, v_star)


def three_point_residual(gen, u, p, p_star, q, q_star):
    """LHS minus RHS of the three-point identity.

    ``D(u,p;p*) - D(u,q;q*) + D(p,q;q*) - <q* - p*, u - p>``; zero up to
    rounding for any consistent duals.
    """
    u, p, p_star, q, q_star = (np.asarray(a, dtype=float) for a in (u, p, p_star, q, q_star))
    check_dual(gen, p, p_star)
    check_dual(gen, q, q_star)
    lhs = _distance(gen, u, p, p_star) - _distance(gen, u, q, q_star) + _distance(gen, p, q, q_star)
    return lhs - float((q_star - p_star) @ (u - p))


def conjugate_duality_residual(gen, p, p_star, q, q_star):
    """``|D_omega(p, q; q*) - D_omega*(q*, p*; p)|``."""
    p, p_star, q, q_star = (np.asarray(a, dtype=float) for a in (p, p_star, q, q_star))
    check_dual(gen, p, p_star)
    check_dual(gen, q, q_star)
    primal_side = _distance(gen, p, q, q_star)
    dual_side = gen.conjugate(q_star) - gen.conjugate(p_star) - float(p @ (q_star - p_star))
    return abs(primal_side - dual_side)
