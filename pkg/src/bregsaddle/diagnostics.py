"""Runtime checks of the BEG/BEP regret inequalities and gap bounds.

Every checker takes a finished :class:`~bregsaddle.solvers.Trace` and
re-evaluates the operator on the recorded iterates; nothing is taken from
the solver's own caches. Residuals are ``rhs - lhs`` and a check passes
when ``residual >= -(atol + rtol * |rhs|)``.
"""

import csv
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from bregsaddle.bregman import check_dual
from bregsaddle.errors import InvalidArgument, UnsupportedOperation
from bregsaddle.operators import saddle_operator

ATOL = 1e-12
RTOL = 1e-9
TELESCOPE_ATOL = 1e-9
GAP_ATOL = 1e-9
BALL_SAFETY = 1.01

CSV_COLUMNS = ("inequality_name", "k", "lhs", "rhs", "residual", "pass")


@dataclass(frozen=True)
class InequalityReport:
    name: str
    k: int
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool
    terms: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class GapRecord:
    """Value error of the averaged iterate against its O(1/k) bound."""

    k: int
    s_k: float
    value_error: float
    bound_rhs: float
    radius: float
    passed: bool
    exact_ball: bool = True
    tight_bound: Optional[float] = None


def _report(name, k, lhs, rhs, atol=ATOL, rtol=RTOL, terms=None):
    tol = atol + rtol * abs(rhs)
    residual = rhs - lhs
    return InequalityReport(name, k, float(lhs), float(rhs), float(residual), tol, bool(residual >= -tol), terms)


def _dist(gen, u, v, v_star):
    return gen.eval(u) - gen.eval(v) - float(v_star @ (u - v))


def _require_full(trace):
    if trace.thinned:
        raise InvalidArgument("per-iteration checks need an unthinned trace (stride=1)")


def _reference(gen, u_ref, u_ref_star):
    u_ref = np.asarray(u_ref, dtype=float)
    if u_ref_star is not None:
        check_dual(gen, u_ref, u_ref_star)
    return u_ref


def _lambda(trace, lam):
    return trace.metadata["lambda"] if lam is None else lam


def check_beg_regret(gen, op, trace, u_ref, u_ref_star=None):
    """Per-step regret bound of BEG.

    ``alpha_k <F(u_bar_k), u_bar_k - u> <= D(u, u_k; u*_k) - D(u, u_{k+1}; u*_{k+1})``
    for every recorded step.
    """
    _require_full(trace)
    u = _reference(gen, u_ref, u_ref_star)
    recs = trace.records
    out = []
    for k in range(len(recs) - 1):
        cur, nxt = recs[k], recs[k + 1]
        ub = nxt.midpoint
        lhs = nxt.alpha * float(op.apply(ub) @ (ub - u))
        rhs = _dist(gen, u, cur.primal, cur.dual) - _dist(gen, u, nxt.primal, nxt.dual)
        out.append(_report("beg_regret", k, lhs, rhs))
    return out


def check_beg_telescoped(gen, op, trace, u_ref, u_ref_star=None, t=None):
    """Summed BEG regret over steps ``0..t-1`` against ``D(u,u_0) - D(u,u_t)``."""
    _require_full(trace)
    u = _reference(gen, u_ref, u_ref_star)
    recs = trace.records
    t = len(recs) - 1 if t is None else t
    if not 0 <= t < len(recs):
        raise InvalidArgument(f"t must lie in [0, {len(recs) - 1}]")
    lhs = 0.0
    for k in range(t):
        nxt = recs[k + 1]
        lhs += nxt.alpha * float(op.apply(nxt.midpoint) @ (nxt.midpoint - u))
    rhs = _dist(gen, u, recs[0].primal, recs[0].dual) - _dist(gen, u, recs[t].primal, recs[t].dual)
    return _report("beg_telescoped", t, lhs, rhs, atol=TELESCOPE_ATOL)


def check_beg_distance(gen, trace, z_bar):
    """``D(z_bar, u_t; u*_t) <= D(z_bar, u_0; u*_0)`` for every recorded ``t``."""
    z = np.asarray(z_bar, dtype=float)
    r0 = trace.records[0]
    d0 = _dist(gen, z, r0.primal, r0.dual)
    return [
        _report("beg_distance", r.k, _dist(gen, z, r.primal, r.dual), d0, atol=TELESCOPE_ATOL, rtol=0.0)
        for r in trace.records[1:]
    ]


def _bep_window(trace, k):
    """``(u_{k-1}, u*_{k-1}, u_k, u*_k, u_{k+1}, u*_{k+1})`` with ``u_{-1} = u_0``."""
    recs = trace.records
    prev = recs[max(k - 1, 0)]
    return prev, recs[k], recs[k + 1]


def bep_regret_terms(gen, op, trace, u_ref, k, lam):
    """Left side and the six right-side terms of the BEP per-step bound at step ``k``.

    Terms, in order: ``a_k <dF_{k+1}, u_{k+1} - u>``,
    ``-a_{k-1} <dF_k, u_k - u>``, ``D(u, u_k)``, ``-D(u, u_{k+1})``,
    ``lam a_{k-1} D(u_k, u_{k-1})``, ``-lam a_k D(u_{k+1}, u_k)``.
    """
    prev, cur, nxt = _bep_window(trace, k)
    a_k = nxt.alpha
    a_km1 = trace.metadata.get("alpha_minus_one") if k == 0 else cur.alpha
    if a_km1 is None:
        a_km1 = a_k * nxt.beta
    f_prev = op.apply(prev.primal)
    f_cur = op.apply(cur.primal)
    f_next = op.apply(nxt.primal)
    du_next = nxt.primal - u_ref
    lhs = a_k * float(f_next @ du_next)
    terms = (
        a_k * float((f_next - f_cur) @ du_next),
        -a_km1 * float((f_cur - f_prev) @ (cur.primal - u_ref)),
        _dist(gen, u_ref, cur.primal, cur.dual),
        -_dist(gen, u_ref, nxt.primal, nxt.dual),
        lam * a_km1 * _dist(gen, cur.primal, prev.primal, prev.dual),
        -lam * a_k * _dist(gen, nxt.primal, cur.primal, cur.dual),
    )
    return lhs, terms


def check_bep_per_iteration(gen, op, trace, u_ref, u_ref_star=None, lam=None):
    """Per-step bound of BEP (with ``u_{-1} = u_0``) at every recorded step."""
    _require_full(trace)
    u = _reference(gen, u_ref, u_ref_star)
    lam = _lambda(trace, lam)
    out = []
    for k in range(len(trace.records) - 1):
        lhs, terms = bep_regret_terms(gen, op, trace, u, k, lam)
        out.append(_report("bep_per_iteration", k, lhs, sum(terms), terms=terms))
    return out


def ogda_regret_terms(op, iterates, eta, L, u_ref):
    """The OGDA form of the BEP bound with squared Euclidean distances.

    ``iterates`` is ``u_0, u_1, ...``; returns ``[(lhs, terms), ...]`` per
    step with the same term order as :func:`bep_regret_terms`, each divided
    by ``eta``.
    """
    us = [np.asarray(v, dtype=float) for v in iterates]
    u = np.asarray(u_ref, dtype=float)
    out = []
    for k in range(len(us) - 1):
        u_prev, u_k, u_next = us[max(k - 1, 0)], us[k], us[k + 1]
        f_prev, f_k, f_next = op.apply(u_prev), op.apply(u_k), op.apply(u_next)
        lhs = float(f_next @ (u_next - u))
        terms = (
            float((f_next - f_k) @ (u_next - u)),
            -float((f_k - f_prev) @ (u_k - u)),
            float((u - u_k) @ (u - u_k)) / (2.0 * eta),
            -float((u - u_next) @ (u - u_next)) / (2.0 * eta),
            L / 2.0 * float((u_k - u_prev) @ (u_k - u_prev)),
            -L / 2.0 * float((u_next - u_k) @ (u_next - u_k)),
        )
        out.append((lhs, terms))
    return out


def check_bep_telescoped(gen, op, trace, u_ref, u_ref_star=None, t=None, lam=None):
    """Summed BEP bound ``sum a_k <F(u_{k+1}), u_{k+1} - u> <= D(u,u_0) - (1 - lam a_{t-1}) D(u,u_t)``."""
    _require_full(trace)
    u = _reference(gen, u_ref, u_ref_star)
    lam = _lambda(trace, lam)
    recs = trace.records
    t = len(recs) - 1 if t is None else t
    if not 1 <= t < len(recs):
        raise InvalidArgument(f"t must lie in [1, {len(recs) - 1}]")
    lhs = 0.0
    for k in range(t):
        nxt = recs[k + 1]
        lhs += nxt.alpha * float(op.apply(nxt.primal) @ (nxt.primal - u))
    coeff = 1.0 - lam * recs[t].alpha
    rhs = _dist(gen, u, recs[0].primal, recs[0].dual) - coeff * _dist(gen, u, recs[t].primal, recs[t].dual)
    return _report("bep_telescoped", t, lhs, rhs, atol=TELESCOPE_ATOL)


def check_bep_distance(gen, trace, z_bar, lam=None):
    """``(1 - lam a_{t-1}) D(z_bar, u_t) <= D(z_bar, u_0)`` for every recorded ``t >= 1``."""
    z = np.asarray(z_bar, dtype=float)
    lam = _lambda(trace, lam)
    r0 = trace.records[0]
    d0 = _dist(gen, z, r0.primal, r0.dual)
    return [
        _report("bep_distance", r.k, (1.0 - lam * r.alpha) * _dist(gen, z, r.primal, r.dual), d0,
                atol=TELESCOPE_ATOL, rtol=0.0)
        for r in trace.records[1:]
    ]


def _numeric_grad(fun, z, h=1e-6):
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (fun(z + e) - fun(z - e)) / (2 * h)
    return g


def ball_max_bregman(gen, radius, u0, u0_star, seed=0, inflate=True, n_random=32, n_steps=60):
    """``max_{||z|| <= radius} D(z, u_0; u*_0)``.

    Exact for the Euclidean generator: ``0.5 * (radius + ||u_0||)^2``.
    Otherwise a numerical estimate: linearised ascent on the sphere (the
    maximiser of a convex function over a ball lies on its boundary) from
    eight deterministic and ``n_random`` seeded starts, multiplied by
    ``BALL_SAFETY`` when ``inflate`` is set.
    """
    if radius < 0:
        raise InvalidArgument("radius must be nonnegative")
    u0 = np.asarray(u0, dtype=float)
    u0_star = np.asarray(u0_star, dtype=float)
    if gen.name == "euclidean":
        return 0.5 * (radius + float(np.linalg.norm(u0))) ** 2
    d = u0.size

    def D(z):
        return _dist(gen, z, u0, u0_star)

    if radius == 0:
        return D(np.zeros(d))

    def grad(z):
        if gen.subgrad is not None:
            return gen.subgrad(z) - u0_star
        return _numeric_grad(D, z)

    def unit(v):
        n = np.linalg.norm(v)
        return v / n if n > 0 else None

    starts = []
    for v in (-u0, u0, -u0_star, u0_star, np.ones(d), -np.ones(d)):
        w = unit(v)
        if w is not None:
            starts.append(w)
    i_max = int(np.argmax(np.abs(u0))) if d else 0
    e = np.zeros(d)
    e[i_max] = 1.0
    starts.extend([e, -e])
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        starts.append(unit(rng.standard_normal(d)))

    best = D(np.zeros(d))
    for s in starts:
        z = radius * s
        val = D(z)
        for _ in range(n_steps):
            w = unit(grad(z))
            if w is None:
                break
            z_new = radius * w
            new_val = D(z_new)
            if new_val <= val * (1 + 1e-15):
                break
            z, val = z_new, new_val
        best = max(best, val)
    return best * BALL_SAFETY if inflate else best


def _value_error(problem, z):
    x_bar, y_bar = problem.saddle
    x, y = problem.split(z)
    return abs(float(problem.f(x, y)) - float(problem.f(x_bar, y_bar)))


def gap_bound_series(problem, trace, gen, method=None):
    """``|f(x_hat_k, y_hat_k) - f(x_bar, y_bar)| <= max_ball D(z, u_0; u*_0) / s_k``.

    The ball radius is the largest norm over all realised iterates
    (primal iterates, and midpoints for BEG) and the saddle point. For BEG
    with the Euclidean generator ``tight_bound`` also holds the bound with
    the final distance term kept.
    """
    if problem.saddle is None:
        raise UnsupportedOperation("problem has no exact saddle oracle")
    method = (method or trace.method).upper()
    z_bar = problem.saddle_point
    recs = trace.records
    norms = trace.metadata.get("max_norm_primal")
    if norms is None:
        norms = max(float(np.linalg.norm(r.primal)) for r in recs)
    if method in ("BEG", "EG"):
        mid = trace.metadata.get("max_norm_midpoint")
        if mid is None:
            mid = max((float(np.linalg.norm(r.midpoint)) for r in recs[1:]), default=0.0)
        norms = max(norms, mid)
    radius = max(norms, float(np.linalg.norm(z_bar)))
    u0, u0_star = recs[0].primal, recs[0].dual
    d_max = ball_max_bregman(gen, radius, u0, u0_star)
    exact = gen.name == "euclidean"
    out = []
    for r in recs[1:]:
        step = r.k - 1
        err = _value_error(problem, r.average)
        bound = d_max / r.weight_sum
        tight = None
        if exact and method in ("BEG", "EG"):
            tight = (radius * float(np.linalg.norm(r.primal - u0))
                     + 0.5 * (float(u0 @ u0) - float(r.primal @ r.primal))) / r.weight_sum
        out.append(GapRecord(step, r.weight_sum, err, bound, radius, bool(err <= bound + GAP_ATOL), exact, tight))
    return out


def weighted_gap_lhs(problem, trace, z_probe, k=None):
    """Both sides of the averaged gap inequality at step ``k``.

    ``lhs = f(x_hat_k, y) - f(x, y_hat_k)`` and
    ``rhs = (1/s_k) sum_i r_i <F(z_i), z_i - z>`` for the probe
    ``z = [x; y]``; ``lhs <= rhs`` for convex-concave ``f``.
    """
    x, y = problem.split(z_probe)
    z = np.asarray(z_probe, dtype=float)
    pts = trace.averaged_points()
    weights = trace.alphas()
    k = len(pts) - 1 if k is None else k
    if not 0 <= k < len(pts):
        raise InvalidArgument(f"k must lie in [0, {len(pts) - 1}]")
    rec = trace.records[k + 1]
    x_hat, y_hat = problem.split(rec.average)
    lhs = float(problem.f(x_hat, y)) - float(problem.f(x, y_hat))
    op = saddle_operator(problem)
    acc = sum(weights[i] * float(op.apply(pts[i]) @ (pts[i] - z)) for i in range(k + 1))
    return lhs, acc / rec.weight_sum


def gap_reports(records):
    """Gap records as :class:`InequalityReport` rows for the CSV output."""
    return [
        InequalityReport("gap_bound", g.k, g.value_error, g.bound_rhs, g.bound_rhs - g.value_error,
                         GAP_ATOL, g.passed)
        for g in records
    ]


ALL_CHECKS = ("regret", "telescoped", "distance", "gap")


def run_diagnostics(problem, gen, op, trace, checks=ALL_CHECKS):
    """Run the enabled checks at the known saddle point.

    Returns ``(reports, gap_records)``. Per-step residuals are also stored
    in ``trace.records[j].residuals``.
    """
    checks = tuple(checks)
    unknown = set(checks) - set(ALL_CHECKS)
    if unknown:
        raise InvalidArgument(f"unknown diagnostics {sorted(unknown)}")
    z_bar = problem.saddle_point
    if z_bar is None:
        raise UnsupportedOperation("diagnostics need a problem with an exact saddle point")
    reports = []
    gaps = []
    method = trace.method
    if method in ("BEG", "BEP"):
        per_step = telescoped = distance = []
        if method == "BEG":
            if "regret" in checks:
                per_step = check_beg_regret(gen, op, trace, z_bar)
            if "telescoped" in checks and len(trace) > 1:
                telescoped = [check_beg_telescoped(gen, op, trace, z_bar)]
            if "distance" in checks:
                distance = check_beg_distance(gen, trace, z_bar)
        else:
            if "regret" in checks:
                per_step = check_bep_per_iteration(gen, op, trace, z_bar)
            if "telescoped" in checks and len(trace) > 1:
                telescoped = [check_bep_telescoped(gen, op, trace, z_bar)]
            if "distance" in checks:
                distance = check_bep_distance(gen, trace, z_bar)
        for rep in per_step:
            trace.records[rep.k + 1].residuals[rep.name] = rep.residual
        for rep in distance:
            trace.records[rep.k].residuals[rep.name] = rep.residual
        reports.extend(per_step)
        reports.extend(telescoped)
        reports.extend(distance)
    if "gap" in checks and len(trace) > 1:
        gaps = gap_bound_series(problem, trace, gen, method)
        reports.extend(gap_reports(gaps))
    return reports, gaps


def fmt(x):
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def write_reports_csv(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in reports:
            w.writerow([r.name, r.k, fmt(r.lhs), fmt(r.rhs), fmt(r.residual), "true" if r.passed else "false"])
