"""Bregman extragradient (BEG) and Bregman extrapolation (BEP) iterations.

Both methods keep the dual point ``u*_k`` explicitly and recover the primal
iterate through the generator's mirror map, so a nonsmooth generator never
needs a subgradient selector inside the loop.

Trace layout: ``trace.records[j]`` holds the state ``(u_j, u*_j)``. For
``j >= 1`` it also holds what step ``j - 1`` produced: the step sizes
``alpha_{j-1}``, ``beta_{j-1}``, the BEG midpoint ``u_bar_{j-1}``, and the
ergodic average ``z_hat_{j-1}`` with weight sum ``s_{j-1}``. BEG averages
the midpoints ``u_bar_i`` and BEP the new iterates ``u_{i+1}``, both with
weights ``alpha_i``.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from bregsaddle.bregman import DualPair
from bregsaddle.errors import InvalidArgument, NumericalBreakdown, ScheduleViolation

METHODS = ("BEG", "BEP")

# Relative slack on the step-size inequalities, absorbing rounding in
# products like lambda * (safety / lambda).
SCHEDULE_SLACK = 1e-12


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``alpha_k`` (and ``beta_k`` for BEP) with the constant they
    are validated against.

    ``lam`` is the relative Lipschitz constant, ``rho`` the optional BEP
    margin requiring ``lam * alpha_k <= 1 - rho``. ``heuristic`` flags
    schedules built from an estimated (not certified) Lipschitz constant.
    """

    alpha: Callable[[int], float]
    beta: Optional[Callable[[int], float]] = None
    lam: float = 1.0
    rho: Optional[float] = None
    heuristic: bool = False
    description: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScheduleReport:
    valid: bool
    method: str
    horizon: int
    condition: Optional[str] = None
    k: Optional[int] = None
    detail: str = ""
    alpha_minus_one: Optional[float] = None

    def raise_if_invalid(self):
        if not self.valid:
            raise ScheduleViolation(self.condition, self.k, self.detail)


@dataclass(frozen=True)
class StoppingRule:
    """Stop once the residual norm ``||F(candidate)||`` is at most ``tolerance``.

    The candidate is ``u_bar_k`` for BEG and ``u_{k+1}`` for BEP. ``None``
    disables early stopping.
    """

    tolerance: Optional[float] = None

    def should_stop(self, resid):
        return self.tolerance is not None and resid <= self.tolerance


@dataclass(frozen=True)
class SolverState:
    """Iterate ``(u_k, u*_k)`` plus the cached operator values.

    ``midpoint`` is the last BEG midpoint. ``op_value``/``prev_op_value``
    are ``F(u_k)``/``F(u_{k-1})`` for BEP.
    """

    iterate: DualPair
    k: int = 0
    midpoint: Optional[np.ndarray] = None
    op_value: Optional[np.ndarray] = None
    prev_op_value: Optional[np.ndarray] = None


@dataclass
class IterRecord:
    k: int
    primal: np.ndarray
    dual: np.ndarray
    resid_norm: float
    op_calls: int = 0
    alpha: Optional[float] = None
    beta: Optional[float] = None
    midpoint: Optional[np.ndarray] = None
    average: Optional[np.ndarray] = None
    weight_sum: Optional[float] = None
    dist_to_saddle: Optional[float] = None
    residuals: dict = field(default_factory=dict)


@dataclass
class Trace:
    """Per-iteration history of a run; see the module docstring for layout."""

    method: str
    records: List[IterRecord]
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @property
    def thinned(self):
        return self.metadata.get("stride", 1) != 1

    def primals(self):
        return np.array([r.primal for r in self.records])

    def duals(self):
        return np.array([r.dual for r in self.records])

    def alphas(self):
        return np.array([r.alpha for r in self.records[1:]], dtype=float)

    def betas(self):
        return np.array([r.beta if r.beta is not None else np.nan for r in self.records[1:]], dtype=float)

    def midpoints(self):
        return np.array([r.midpoint for r in self.records[1:]])

    def averaged_points(self):
        """The sequence ``z_i`` entering the ergodic average."""
        if self.method in ("BEG", "EG"):
            return self.midpoints()
        return np.array([r.primal for r in self.records[1:]])

    def final(self):
        return self.records[-1]


def update_average(tail, z, r):
    """One online step of the weighted ergodic average.

    ``tail`` is ``(z_hat_{k-1}, s_{k-1})`` or ``None`` before the first
    point; returns ``(z_hat_k, s_k)`` with ``z_hat_k = (1/s_k) sum r_i z_i``.
    """
    if not r > 0:
        raise InvalidArgument(f"averaging weight must be positive, got {r}")
    z = np.asarray(z, dtype=float)
    if tail is None:
        return z.copy(), float(r)
    z_hat, s = tail
    s_new = s + r
    return (s * z_hat + r * z) / s_new, s_new


def _alpha_minus_one(schedule):
    beta0 = schedule.beta(0) if schedule.beta is not None else 1.0
    return schedule.alpha(0) * beta0


def validate_schedule(method, schedule, horizon):
    """Check the step-size conditions for ``k = 0..horizon``.

    BEG: ``0 < lam * alpha_k <= 1``. BEP: ``alpha_k beta_k = alpha_{k-1}``,
    ``lam * (alpha_k + alpha_{k-1}) <= 1`` and, if ``rho`` is set,
    ``lam * alpha_k <= 1 - rho``; ``alpha_{-1}`` is taken as
    ``alpha_0 beta_0``. Violations are reported, never raised.
    """
    method = method.upper()
    if method not in METHODS:
        raise InvalidArgument(f"unknown method {method!r}")
    if horizon < 0:
        raise InvalidArgument("horizon must be nonnegative")
    lam = schedule.lam
    a_prev = _alpha_minus_one(schedule) if method == "BEP" else None

    def bad(cond, k, detail):
        return ScheduleReport(False, method, horizon, cond, k, detail, a_prev)

    tol = 1.0 + SCHEDULE_SLACK
    for k in range(horizon + 1):
        a = schedule.alpha(k)
        if not (np.isfinite(a) and a > 0):
            return bad("alpha_k > 0", k, f"alpha_{k} = {a!r}")
        if method == "BEG":
            if not lam * a <= tol:
                return bad("lambda*alpha_k <= 1", k, f"lambda*alpha = {lam * a!r}")
            continue
        b = schedule.beta(k) if schedule.beta is not None else 1.0
        if not (np.isfinite(b) and b >= 0):
            return bad("beta_k >= 0", k, f"beta_{k} = {b!r}")
        a_km1 = a_prev if k == 0 else schedule.alpha(k - 1)
        if abs(a * b - a_km1) > SCHEDULE_SLACK * max(abs(a_km1), abs(a * b)):
            return bad("alpha_k*beta_k = alpha_{k-1}", k, f"{a * b!r} != {a_km1!r}")
        if not lam * (a + a_km1) <= tol:
            return bad("lambda*(alpha_k + alpha_{k-1}) <= 1", k, f"value {lam * (a + a_km1)!r}")
        if schedule.rho is not None and not lam * a <= (1.0 - schedule.rho) * tol:
            return bad("lambda*alpha_k <= 1 - rho", k, f"lambda*alpha = {lam * a!r}, rho = {schedule.rho!r}")
    return ScheduleReport(True, method, horizon, alpha_minus_one=a_prev)


def constant_beg_schedule(lam, safety=1.0):
    """Constant BEG step ``alpha = safety / lam``."""
    if not lam > 0:
        raise InvalidArgument(f"lambda must be positive, got {lam}")
    if not 0 < safety <= 1:
        raise InvalidArgument(f"safety must lie in (0, 1], got {safety}")
    a = safety / lam
    return StepSchedule(alpha=lambda k: a, lam=lam, description={"kind": "constant", "safety": safety})


def constant_bep_schedule(lam, safety=0.99):
    """Constant BEP steps ``alpha = safety / (2 lam)``, ``beta = 1``.

    The boundedness margin is ``rho = 1 - safety / 2``.
    """
    if not lam > 0:
        raise InvalidArgument(f"lambda must be positive, got {lam}")
    if not 0 < safety < 1:
        raise InvalidArgument(f"safety must lie in (0, 1), got {safety}")
    a = safety / (2.0 * lam)
    return StepSchedule(
        alpha=lambda k: a,
        beta=lambda k: 1.0,
        lam=lam,
        rho=1.0 - safety / 2.0,
        description={"kind": "constant", "safety": safety},
    )


def explicit_schedule(alphas, lam, betas=None, rho=None):
    """Schedule from explicit lists; the last entry repeats past the end.

    Without ``betas`` the BEP coupling ``beta_k = alpha_{k-1} / alpha_k``
    is used, with ``beta_0 = 1``.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise InvalidArgument("explicit schedule needs at least one step size")

    def alpha(k):
        return alphas[min(k, len(alphas) - 1)]

    if betas is not None:
        betas = [float(b) for b in betas]
        if not betas:
            raise InvalidArgument("empty beta list")

        def beta(k):
            return betas[min(k, len(betas) - 1)]
    else:
        def beta(k):
            return 1.0 if k == 0 else alpha(k - 1) / alpha(k)

    return StepSchedule(alpha=alpha, beta=beta, lam=lam, rho=rho, description={"kind": "explicit"})


def _finite(v, what, k):
    if not np.all(np.isfinite(v)):
        raise NumericalBreakdown(f"non-finite {what}", k)
    return v


def initial_state(method, gen, op, init):
    """Solver state at ``k = 0``.

    ``init`` is a primal vector (dual from the canonical subgradient) or a
    :class:`DualPair` (primal reset to ``mirror(dual)``). For BEP the
    operator is evaluated once at ``u_0`` and ``u_{-1} = u_0``.
    """
    if isinstance(init, DualPair):
        pair = gen.pair(dual=init.dual)
    else:
        pair = gen.pair(primal=init)
    if method.upper() == "BEP":
        f0 = _finite(np.asarray(op.apply(pair.primal), dtype=float), "operator value", 0)
        return SolverState(pair, 0, op_value=f0, prev_op_value=f0)
    return SolverState(pair)


def beg_step(gen, op, state, alpha_k):
    """One BEG step.

    ``u_bar = mirror(u* - a F(u))``, ``u*+ = u* - a F(u_bar)``,
    ``u+ = mirror(u*+)``. Two operator evaluations.
    """
    if not alpha_k > 0:
        raise InvalidArgument(f"alpha_k must be positive, got {alpha_k}")
    k = state.k
    u, u_star = state.iterate.primal, state.iterate.dual
    fu = _finite(np.asarray(op.apply(u), dtype=float), "operator value", k)
    u_bar = gen.mirror(u_star - alpha_k * fu)
    fbar = _finite(np.asarray(op.apply(u_bar), dtype=float), "operator value", k)
    new_dual = u_star - alpha_k * fbar
    new_primal = _finite(gen.mirror(new_dual), "iterate", k)
    return SolverState(DualPair(new_primal, new_dual), k + 1, midpoint=u_bar, op_value=fbar)


def bep_step(gen, op, state, alpha_k, beta_k):
    """One BEP step.

    ``u*+ = u* - a F(u_k) - a b (F(u_k) - F(u_{k-1}))``, ``u+ = mirror(u*+)``.
    The new iterate is evaluated once and cached as ``F(u_{k+1})``.
    """
    if not alpha_k > 0:
        raise InvalidArgument(f"alpha_k must be positive, got {alpha_k}")
    if not beta_k >= 0:
        raise InvalidArgument(f"beta_k must be nonnegative, got {beta_k}")
    k = state.k
    u_star = state.iterate.dual
    fu = state.op_value
    if fu is None:
        fu = _finite(np.asarray(op.apply(state.iterate.primal), dtype=float), "operator value", k)
    f_prev = state.prev_op_value if state.prev_op_value is not None else fu
    new_dual = u_star - alpha_k * fu - alpha_k * beta_k * (fu - f_prev)
    new_primal = _finite(gen.mirror(new_dual), "iterate", k)
    f_new = _finite(np.asarray(op.apply(new_primal), dtype=float), "operator value", k)
    return SolverState(DualPair(new_primal, new_dual), k + 1, op_value=f_new, prev_op_value=fu)


class _Counter:
    """Wraps an operator and counts evaluations."""

    def __init__(self, op):
        self.op = op
        self.calls = 0

    def apply(self, u):
        self.calls += 1
        return self.op.apply(u)


def _distance_to(gen, ref, pair):
    if ref is None:
        return None
    return gen.eval(ref) - gen.eval(pair.primal) - float(pair.dual @ (ref - pair.primal))


def run(method, gen, op, schedule, init, max_iters, stop=None, saddle=None, stride=1, check_schedule=True):
    """Run BEG or BEP for at most ``max_iters`` steps.

    Parameters
    ----------
    method : {"BEG", "BEP"}
    gen : BregmanGenerator
    op : OperatorHandle
    schedule : StepSchedule
    init : array_like or DualPair
        Starting point, see :func:`initial_state`.
    max_iters : int
    stop : StoppingRule, optional
    saddle : array_like, optional
        Known solution ``z_bar``; enables ``D(z_bar, u_k; u*_k)`` in records.
    stride : int
        Keep every ``stride``-th record (plus the first and last).
    check_schedule : bool
        Validate the schedule before iterating. Disabling this is only
        meant for demonstrating that the diagnostics can fail.

    Returns
    -------
    Trace
    """
    method = method.upper()
    if method not in METHODS:
        raise InvalidArgument(f"unknown method {method!r}")
    if max_iters < 0:
        raise InvalidArgument("max_iters must be nonnegative")
    if stride < 1:
        raise InvalidArgument("stride must be at least 1")
    stop = stop or StoppingRule()
    report = validate_schedule(method, schedule, max(max_iters - 1, 0))
    if check_schedule:
        report.raise_if_invalid()
    if saddle is not None:
        saddle = np.asarray(saddle, dtype=float)

    counter = _Counter(op)
    state = initial_state(method, gen, counter, init)
    if method == "BEG":
        resid0 = float(np.linalg.norm(counter.apply(state.iterate.primal)))
    else:
        resid0 = float(np.linalg.norm(state.op_value))
    records = [
        IterRecord(
            k=0,
            primal=state.iterate.primal,
            dual=state.iterate.dual,
            resid_norm=resid0,
            op_calls=counter.calls,
            dist_to_saddle=_distance_to(gen, saddle, state.iterate),
        )
    ]
    resid_min = resid_max = resid0
    max_primal = float(np.linalg.norm(state.iterate.primal))
    max_mid = 0.0
    avg = None
    stopped = False
    last = records[0]
    for k in range(max_iters):
        a = schedule.alpha(k)
        calls_before = counter.calls
        if method == "BEG":
            state = beg_step(gen, counter, state, a)
            b = None
            z = state.midpoint
        else:
            b = schedule.beta(k) if schedule.beta is not None else 1.0
            state = bep_step(gen, counter, state, a, b)
            z = state.iterate.primal
        resid = float(np.linalg.norm(state.op_value))
        avg = update_average(avg, z, a)
        rec = IterRecord(
            k=k + 1,
            primal=state.iterate.primal,
            dual=state.iterate.dual,
            resid_norm=resid,
            op_calls=counter.calls - calls_before,
            alpha=a,
            beta=b,
            midpoint=state.midpoint,
            average=avg[0],
            weight_sum=avg[1],
            dist_to_saddle=_distance_to(gen, saddle, state.iterate),
        )
        resid_min = min(resid_min, resid)
        resid_max = max(resid_max, resid)
        max_primal = max(max_primal, float(np.linalg.norm(state.iterate.primal)))
        if state.midpoint is not None:
            max_mid = max(max_mid, float(np.linalg.norm(state.midpoint)))
        last = rec
        stopped = stop.should_stop(resid)
        if (k + 1) % stride == 0 or stopped or k + 1 == max_iters:
            records.append(rec)
        if stopped:
            break
    if records[-1] is not last:
        records.append(last)

    metadata = {
        "method": method,
        "generator": gen.name,
        "generator_params": dict(gen.params),
        "modulus": gen.modulus,
        "lambda": schedule.lam,
        "rho": schedule.rho,
        "heuristic": schedule.heuristic,
        "alpha_minus_one": report.alpha_minus_one,
        "schedule_valid": report.valid,
        "stride": stride,
        "stopped_early": stopped,
        "iterations": last.k,
        "op_calls": counter.calls,
        "resid_min": resid_min,
        "resid_max": resid_max,
        "max_norm_primal": max_primal,
        "max_norm_midpoint": max_mid if method == "BEG" else None,
    }
    return Trace(method, records, metadata)


def classical_eg_step(op, u, eta):
    """Textbook extragradient step; returns ``(u_next, u_bar)``."""
    if not eta > 0:
        raise InvalidArgument(f"eta must be positive, got {eta}")
    u = np.asarray(u, dtype=float)
    u_bar = u - eta * op.apply(u)
    return u - eta * op.apply(u_bar), u_bar


def ogda_step(op, u, prev_value, eta):
    """Textbook optimistic GDA step ``u - 2 eta F(u) + eta F(u_prev)``.

    Returns ``(u_next, F(u))``; pass the second item back as ``prev_value``.
    """
    if not eta > 0:
        raise InvalidArgument(f"eta must be positive, got {eta}")
    u = np.asarray(u, dtype=float)
    fu = op.apply(u)
    if prev_value is None:
        prev_value = fu
    return u - 2.0 * eta * fu + eta * prev_value, fu


def run_reference(method, op, eta, u0, max_iters):
    """Run the plain EG or OGDA oracle; same trace layout as :func:`run`.

    Used only as an independent reference for the Euclidean special cases.
    """
    method = method.upper()
    if method not in ("EG", "OGDA"):
        raise InvalidArgument(f"unknown reference method {method!r}")
    u = np.array(u0, dtype=float)
    records = [IterRecord(0, u, u, float(np.linalg.norm(op.apply(u))))]
    prev = None
    avg = None
    for k in range(max_iters):
        if method == "EG":
            u, u_bar = classical_eg_step(op, u, eta)
            resid = float(np.linalg.norm(op.apply(u_bar)))
            z = u_bar
        else:
            u, prev = ogda_step(op, u, prev, eta)
            u_bar = None
            resid = float(np.linalg.norm(op.apply(u)))
            z = u
        _finite(u, "iterate", k)
        avg = update_average(avg, z, eta)
        records.append(
            IterRecord(k + 1, u, u, resid, alpha=eta, beta=None if method == "EG" else 1.0,
                       midpoint=u_bar, average=avg[0], weight_sum=avg[1])
        )
    return Trace(method, records, {"method": method, "generator": "euclidean", "eta": eta,
                                   "stride": 1, "iterations": max_iters})
