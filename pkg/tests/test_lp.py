import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from tuplan import lp, petri, planner
from tuplan.errors import TokenCountMismatch

from conftest import random_net


def test_single_bound():
    sol = lp.solve_lp(lp.make_lp([1.0], lower=[3.0]))
    assert sol.optimal
    assert sol.x[0] == pytest.approx(3.0)
    assert sol.objective_value == pytest.approx(3.0)


def test_degenerate_tie():
    sol = lp.solve_lp(lp.make_lp([1, 1], a_le=[[-1, -1]], b_le=[-1]))
    assert sol.objective_value == pytest.approx(1.0)
    assert sorted(np.round(sol.x, 9).tolist()) == [0.0, 1.0]


def test_status_flags():
    assert lp.solve_lp(lp.make_lp([1], a_le=[[1]], b_le=[-1])).status is lp.Status.INFEASIBLE
    assert lp.solve_lp(lp.make_lp([-1], a_le=[[-1]], b_le=[0])).status is lp.Status.UNBOUNDED


def test_fixed_variables():
    p = lp.make_lp([1.0], upper=[5.0])
    assert lp.solve_lp_with_fixed(p, {0: 2}).objective_value == pytest.approx(2.0)
    q = lp.make_lp([1, 1], a_le=[[1, 1]], b_le=[1], upper=[5, 5])
    assert lp.solve_lp_with_fixed(q, {0: 2}).status is lp.Status.INFEASIBLE
    with pytest.raises(ValueError):
        lp.solve_lp_with_fixed(p, {0: 7})


def test_make_lp_validation():
    with pytest.raises(ValueError):
        lp.make_lp([1, 2], a_eq=[[1, 2, 3]], b_eq=[1])
    with pytest.raises(ValueError):
        lp.make_lp([1], lower=[2], upper=[1])


def test_problem7_four_cell(four_cell):
    prob = planner.build_problem7(four_cell, [1, 0, 0, 0])
    sol = lp.solve_lp(prob)
    sigma = prob.block(sol.x, "sigma")
    np.testing.assert_allclose(sigma, [0, 1, 0, 1, 0, 0, 0, 0], atol=1e-9)
    assert prob.block(sol.x, "s")[0] == pytest.approx(1.0)
    assert sigma.sum() == pytest.approx(2.0)


def test_problem7_token_mismatch(four_cell):
    with pytest.raises(TokenCountMismatch):
        planner.build_problem7(four_cell, [1, 1, 0, 0])


def _scipy(p):
    bounds = list(zip(p.lower, [None if np.isinf(u) else u for u in p.upper]))
    return linprog(
        p.objective,
        A_ub=p.a_le if p.a_le.shape[0] else None,
        b_ub=p.b_le if p.a_le.shape[0] else None,
        A_eq=p.a_eq if p.a_eq.shape[0] else None,
        b_eq=p.b_eq if p.a_eq.shape[0] else None,
        bounds=bounds,
        method="highs",
    )


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_matches_highs_on_random_lps(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    m_le, m_eq = int(rng.integers(0, 5)), int(rng.integers(0, 3))
    a_le = rng.integers(-3, 4, (m_le, n)).astype(float)
    x0 = rng.uniform(0, 3, n)
    b_le = a_le @ x0 + rng.uniform(0, 2, m_le)
    a_eq = rng.integers(-2, 3, (m_eq, n)).astype(float)
    b_eq = a_eq @ x0
    upper = np.where(rng.random(n) < 0.5, np.inf, x0 + rng.uniform(0, 3, n))
    c = rng.integers(-3, 4, n).astype(float)
    p = lp.make_lp(c, a_eq, b_eq, a_le, b_le, np.zeros(n), upper)
    ours = lp.solve_lp(p)
    ref = _scipy(p)
    if ref.status == 3:
        assert ours.status is lp.Status.UNBOUNDED
    else:
        assert ref.status == 0
        assert ours.optimal
        assert ours.objective_value == pytest.approx(ref.fun, abs=1e-6)
        assert p.violation(ours.x) < 1e-7
        # recomputed objective agrees with the reported one
        assert float(c @ ours.x) == pytest.approx(ours.objective_value, abs=1e-7)


def test_deterministic(rng):
    net = random_net(rng, 8, 14, robots=3)
    target = np.zeros(net.n_places, int)
    target[: net.n_robots] = 1
    prob = planner.build_problem7(net, target)
    a, b = lp.solve_lp(prob), lp.solve_lp(prob)
    assert a.status == b.status
    if a.optimal:
        assert a.x.tobytes() == b.x.tobytes()


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_problem7_vertices_integral(seed):
    rng = np.random.default_rng(seed)
    n_p = int(rng.integers(2, 13))
    robots = int(rng.integers(1, n_p + 1))
    net = petri.random_state_machine(n_p, int(rng.integers(n_p, 3 * n_p + 1)), rng, robots)
    m_f = np.bincount(rng.integers(0, n_p, robots), minlength=n_p)
    s = int(rng.integers(1, robots + 2))
    sol = lp.solve_lp(planner.build_problem7(net, m_f, s_fixed=s))
    if sol.optimal:
        assert lp.max_fractional(sol.x) < 1e-6
