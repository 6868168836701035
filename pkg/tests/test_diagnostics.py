import csv
import itertools

import numpy as np
import pytest

from bregsaddle import (
    InvalidArgument,
    OperatorHandle,
    StepSchedule,
    augmented_l1_generator,
    constant_beg_schedule,
    constant_bep_schedule,
    euclidean_generator,
    make_bilinear,
    random_instance,
    run,
    saddle_operator,
)
from bregsaddle.diagnostics import (
    ball_max_bregman,
    bep_regret_terms,
    check_beg_distance,
    check_beg_regret,
    check_beg_telescoped,
    check_bep_distance,
    check_bep_per_iteration,
    check_bep_telescoped,
    gap_bound_series,
    ogda_regret_terms,
    run_diagnostics,
    weighted_gap_lhs,
    write_reports_csv,
)

XY = make_bilinear([[1.0]], [0.0], [0.0])
OP_XY = saddle_operator(XY)
ZERO_OP = OperatorHandle(lambda z: np.zeros_like(z), 0.0, 2)


def const(alpha, lam, beta=None):
    return StepSchedule(alpha=lambda k: alpha, beta=None if beta is None else (lambda k: beta), lam=lam)


def test_zero_operator_reports_are_trivial():
    g = euclidean_generator(2)
    tr = run("BEG", g, ZERO_OP, const(0.5, 1.0), np.ones(2), 5)
    for rep in check_beg_regret(g, ZERO_OP, tr, np.zeros(2)):
        assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.passed
    tr = run("BEP", g, ZERO_OP, const(0.25, 2.0, 1.0), np.ones(2), 5)
    for k in range(5):
        lhs, terms = bep_regret_terms(g, ZERO_OP, tr, np.ones(2), k, 2.0)
        assert lhs == 0.0 and all(t == 0.0 for t in terms)


def test_beg_regret_xy_all_pass():
    g = euclidean_generator(2)
    tr = run("BEG", g, OP_XY, const(0.25, 2.0), np.array([1.0, 1.0]), 300)
    reps = check_beg_regret(g, OP_XY, tr, np.zeros(2))
    assert len(reps) == 300 and all(r.passed for r in reps)


def test_beg_telescoped_equals_sum_of_steps():
    prob = random_instance("quadratic", (3, 4), 8)
    op = saddle_operator(prob)
    g = augmented_l1_generator(7, 0.4)
    tr = run("BEG", g, op, constant_beg_schedule(op.lipschitz / g.modulus), np.ones(7), 60)
    z = prob.saddle_point
    per = check_beg_regret(g, op, tr, z)
    for t in (1, 17, 60):
        tel = check_beg_telescoped(g, op, tr, z, t=t)
        assert tel.passed
        assert tel.lhs == pytest.approx(sum(r.lhs for r in per[:t]), abs=1e-12)
        assert tel.rhs == pytest.approx(sum(r.rhs for r in per[:t]), abs=1e-12)
    one = check_beg_telescoped(g, op, tr, z, t=1)
    assert one.lhs == per[0].lhs and one.rhs == per[0].rhs
    with pytest.raises(InvalidArgument):
        check_beg_telescoped(g, op, tr, z, t=61)


def test_beg_regret_fails_for_bad_schedule():
    g = euclidean_generator(2)
    tr = run("BEG", g, OP_XY, const(2.0, 2.0), np.array([1.0, 1.0]), 20, check_schedule=False)
    assert any(not r.passed for r in check_beg_regret(g, OP_XY, tr, np.zeros(2)))


def test_thinned_trace_rejected():
    g = euclidean_generator(2)
    tr = run("BEG", g, OP_XY, const(0.25, 2.0), np.ones(2), 20, stride=3)
    with pytest.raises(InvalidArgument):
        check_beg_regret(g, OP_XY, tr, np.zeros(2))


def test_beg_distance_nonincreasing():
    prob = random_instance("bilinear", (5, 5), 1)
    op = saddle_operator(prob)
    for g in (euclidean_generator(10), augmented_l1_generator(10, 0.8)):
        tr = run("BEG", g, op, constant_beg_schedule(op.lipschitz / g.modulus), np.ones(10), 300)
        assert all(r.passed for r in check_beg_distance(g, tr, prob.saddle_point))


def test_bep_checks_pass():
    prob = random_instance("quadratic", (4, 3), 6)
    op = saddle_operator(prob)
    z = prob.saddle_point
    for g in (euclidean_generator(7), augmented_l1_generator(7, 0.5)):
        tr = run("BEP", g, op, constant_bep_schedule(op.lipschitz / g.modulus, 0.999), np.ones(7), 300)
        assert all(r.passed for r in check_bep_per_iteration(g, op, tr, z))
        for t in (1, 50, 300):
            assert check_bep_telescoped(g, op, tr, z, t=t).passed
        assert all(r.passed for r in check_bep_distance(g, tr, z))


def test_bep_telescoped_single_step():
    g = euclidean_generator(2)
    tr = run("BEP", g, OP_XY, const(0.25, 2.0, 1.0), np.array([1.0, 0.5]), 3)
    u = np.zeros(2)
    tel = check_bep_telescoped(g, OP_XY, tr, u, t=1)
    lhs, terms = bep_regret_terms(g, OP_XY, tr, u, 0, 2.0)
    assert tel.lhs == pytest.approx(lhs, abs=1e-15)
    # with u_{-1} = u_0 the second and fifth terms vanish
    assert terms[1] == 0.0 and terms[4] == 0.0


def test_bep_telescoped_boundary_coefficient():
    g = euclidean_generator(2)
    # lam * alpha = 1 zeroes the coefficient of the final-distance term
    tr = run("BEP", g, OP_XY, const(0.25, 2.0, 1.0), np.array([1.0, 0.5]), 10)
    rep = check_bep_telescoped(g, OP_XY, tr, np.zeros(2), lam=4.0)
    assert rep.rhs == pytest.approx(1.0 * 0.5 * (1.0 + 0.25), abs=1e-15)
    assert np.isfinite(rep.residual)


def test_ogda_evaluator_matches_general_terms():
    prob = random_instance("bilinear", (6, 5), 13)
    op = saddle_operator(prob)
    L = op.lipschitz
    g = euclidean_generator(11)
    eta = 0.9 / (2 * L)
    tr = run("BEP", g, op, const(eta, L, 1.0), np.ones(11), 100)
    z = prob.saddle_point
    special = ogda_regret_terms(op, [r.primal for r in tr.records], eta, L, z)
    for k, (lhs_s, terms_s) in enumerate(special):
        lhs_g, terms_g = bep_regret_terms(g, op, tr, z, k, L)
        assert abs(lhs_g / eta - lhs_s) <= 1e-12 * max(1.0, abs(lhs_s))
        for a, b in zip(terms_g, terms_s):
            assert abs(a / eta - b) <= 1e-12 * max(1.0, abs(b))
        assert lhs_s <= sum(terms_s) + 1e-12 + 1e-9 * abs(sum(terms_s))


def test_bep_fails_for_bad_schedule():
    found = False
    for seed in range(10):
        prob = random_instance("bilinear", (4, 4), seed)
        op = saddle_operator(prob)
        g = euclidean_generator(8)
        a = 4.0 / op.lipschitz
        tr = run("BEP", g, op, const(a, op.lipschitz, 1.0), np.ones(8), 30, check_schedule=False)
        if any(not r.passed for r in check_bep_per_iteration(g, op, tr, prob.saddle_point)):
            found = True
            break
    assert found


# ------------------------------------------------------------------- ball max


def test_ball_max_euclidean_examples():
    g = euclidean_generator(3)
    assert ball_max_bregman(g, 2.0, np.zeros(3), np.zeros(3)) == 2.0
    u0 = np.array([1.0, 0.0, 0.0])
    assert ball_max_bregman(g, 0.0, u0, u0) == 0.5
    assert ball_max_bregman(g, 3.0, u0, u0) == 8.0


def test_ball_max_radius_zero_non_euclidean():
    g = augmented_l1_generator(2, 1.0)
    u0 = np.array([0.5, -1.0])
    us = g.subgrad(u0)
    d = g.eval(np.zeros(2)) - g.eval(u0) - us @ (-u0)
    assert ball_max_bregman(g, 0.0, u0, us) == pytest.approx(d, abs=1e-15)


def _grid_ball_max(g, radius, u0, u0_star, n):
    best = -np.inf
    axis = np.linspace(-radius, radius, n)
    for pt in itertools.product(axis, repeat=u0.size):
        z = np.array(pt)
        if np.linalg.norm(z) <= radius:
            best = max(best, g.eval(z) - g.eval(u0) - u0_star @ (z - u0))
    # the sphere itself, densely, where the maximiser lives
    if u0.size == 2:
        th = np.linspace(0, 2 * np.pi, 20001)
        for z in radius * np.stack([np.cos(th), np.sin(th)], axis=1):
            best = max(best, g.eval(z) - g.eval(u0) - u0_star @ (z - u0))
    return best


@pytest.mark.parametrize("d,seed", [(1, 0), (2, 1), (2, 2), (3, 3)])
def test_ball_max_augmented_l1_grid_oracle(d, seed):
    rng = np.random.default_rng(seed)
    g = augmented_l1_generator(d, float(rng.uniform(0.2, 2.0)))
    u0 = rng.normal(size=d)
    us = g.subgrad(u0)
    R = float(rng.uniform(0.5, 3.0))
    grid = _grid_ball_max(g, R, u0, us, 101 if d < 3 else 41)
    raw = ball_max_bregman(g, R, u0, us, inflate=False)
    assert abs(raw - grid) <= 0.01 * abs(grid)
    assert ball_max_bregman(g, R, u0, us) >= grid


# ------------------------------------------------------------------ gap bound


def test_gap_zero_when_starting_at_saddle():
    prob = random_instance("bilinear", (3, 3), 5)
    op = saddle_operator(prob)
    g = euclidean_generator(6)
    tr = run("BEG", g, op, constant_beg_schedule(op.lipschitz), prob.saddle_point, 20)
    for gr in gap_bound_series(prob, tr, g):
        assert gr.value_error <= 1e-14 and gr.passed


def test_gap_bound_bilinear():
    prob = random_instance("bilinear", (10, 10), 42)
    op = saddle_operator(prob)
    g = euclidean_generator(20)
    tr = run("BEG", g, op, constant_beg_schedule(op.lipschitz), np.zeros(20), 1000)
    gaps = gap_bound_series(prob, tr, g)
    assert all(gr.passed for gr in gaps)
    scaled = np.array([gr.s_k * gr.value_error for gr in gaps])
    assert np.all(np.isfinite(scaled))
    assert scaled.max() <= gaps[0].bound_rhs * gaps[0].s_k
    assert all(gr.tight_bound is not None and gr.tight_bound <= gr.bound_rhs + 1e-12 for gr in gaps)


def test_weighted_gap_lhs_examples(rng):
    A = rng.normal(size=(3, 4))
    prob = make_bilinear(A, np.zeros(3), np.zeros(4))
    op = saddle_operator(prob)
    g = euclidean_generator(7)
    tr = run("BEG", g, op, constant_beg_schedule(op.lipschitz), rng.normal(size=7), 50)
    lhs, rhs = weighted_gap_lhs(prob, tr, tr.final().average)
    assert abs(lhs) <= 1e-12 and lhs <= rhs + 1e-12
    for _ in range(50):
        probe = rng.normal(scale=3, size=7)
        lhs, rhs = weighted_gap_lhs(prob, tr, probe, k=0)
        z0 = tr.averaged_points()[0]
        assert lhs <= float(op.apply(z0) @ (z0 - probe)) + 1e-12
        lhs, rhs = weighted_gap_lhs(prob, tr, probe)
        assert lhs <= rhs + 1e-10
    lhs, rhs = weighted_gap_lhs(prob, tr, prob.saddle_point)
    assert lhs >= -1e-12 and lhs <= rhs + 1e-12


# ----------------------------------------------------------------- reporting


def test_run_diagnostics_and_csv(tmp_path):
    prob = random_instance("quadratic", (3, 3), 0)
    op = saddle_operator(prob)
    g = euclidean_generator(6)
    tr = run("BEP", g, op, constant_bep_schedule(op.lipschitz), np.zeros(6), 40)
    reps, gaps = run_diagnostics(prob, g, op, tr)
    assert all(r.passed for r in reps)
    assert len(gaps) == 40
    assert "bep_per_iteration" in tr.records[1].residuals
    path = tmp_path / "d.csv"
    write_reports_csv(path, reps)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["inequality_name", "k", "lhs", "rhs", "residual", "pass"]
    assert len(rows) == len(reps) + 1
    assert {r[5] for r in rows[1:]} == {"true"}
    with pytest.raises(InvalidArgument):
        run_diagnostics(prob, g, op, tr, checks=("bogus",))
