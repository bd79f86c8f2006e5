import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import Bounds, LinearConstraint, milp

from tuplan import env as envmod
from tuplan import lp, oracle, petri, planner, spec
from tuplan.errors import BudgetExhausted


def test_knapsack_matches_enumeration():
    value = np.array([5.0, 4.0, 3.0])
    weight = np.array([4.0, 3.0, 2.0])
    p = lp.make_lp(-value, a_le=[weight], b_le=[6.0], upper=np.ones(3))
    ilp = oracle.IlpProblem(p, np.arange(3))
    root = lp.solve_lp(p)
    assert lp.max_fractional(root.x) > 1e-3
    sol = oracle.solve_ilp(ilp)
    best = min(-value @ x for x in itertools.product([0, 1], repeat=3) if weight @ x <= 6)
    assert sol.objective_value == pytest.approx(best)
    assert sol.nodes > 1


def test_integral_root_one_node(four_cell):
    prob = planner.build_problem7(four_cell, [1, 0, 0, 0], s_fixed=1)
    sol = oracle.solve_ilp(oracle.IlpProblem(prob, np.arange(prob.n_vars)))
    assert sol.nodes == 1
    assert sol.objective_value == pytest.approx(lp.solve_lp(prob).objective_value)


def test_four_cell_costs_equal(four_cell):
    rep = oracle.compare(four_cell, spec.CnfFormula(2, (frozenset({1}),)))
    assert rep["planner_cost"] == rep["ilp_cost"] == 2
    assert rep["relative_error"] == 0


def test_infeasible_both_sides(four_cell):
    rep = oracle.compare(four_cell, spec.CnfFormula(2, (frozenset({1}), frozenset({-1}))))
    assert rep["planner_status"] == "infeasible" and rep["ilp_status"] == "infeasible"
    assert rep["planner_phase"] == "boolean-task"


def test_budget_exhausted_carries_incumbent():
    rng = np.random.default_rng(3)
    n = 14
    value = rng.integers(10, 40, n).astype(float)
    weight = rng.integers(10, 40, n).astype(float)
    p = lp.make_lp(-value, a_le=[weight], b_le=[weight.sum() / 2 + 0.5], upper=np.ones(n))
    with pytest.raises(BudgetExhausted) as exc:
        oracle.solve_ilp(oracle.IlpProblem(p, np.arange(n)), node_budget=3)
    assert exc.value.nodes <= 3
    assert exc.value.bound <= (exc.value.incumbent.objective_value if exc.value.incumbent else np.inf)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_matches_highs_milp(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    a = rng.integers(-3, 6, (m, n)).astype(float)
    b = rng.integers(2, 12, m).astype(float)
    c = rng.integers(-6, 3, n).astype(float)
    ub = rng.integers(1, 5, n).astype(float)
    p = lp.make_lp(c, a_le=a, b_le=b, upper=ub)
    ours = oracle.solve_ilp(oracle.IlpProblem(p, np.arange(n)))
    ranked = oracle.solve_ilp(oracle.IlpProblem(p, np.arange(n), rng.choice(n, 1)))
    ref = milp(c, constraints=[LinearConstraint(a, -np.inf, b)], integrality=np.ones(n), bounds=Bounds(0, ub))
    if ref.status == 2:
        assert ours.status is lp.Status.INFEASIBLE
    else:
        assert ours.objective_value == pytest.approx(ref.fun, abs=1e-6)
        assert ranked.objective_value == pytest.approx(ref.fun, abs=1e-6)


def test_priority_must_be_integer():
    p = lp.make_lp([1.0, 1.0], upper=[1.0, 1.0])
    with pytest.raises(ValueError):
        oracle.IlpProblem(p, [0], [1])


def test_planning_ilp_branches_on_x_and_s(four_cell):
    ilp = oracle.planning_ilp(four_cell, spec.conjunction(2), planner.PlanConfig().resolve(1))
    b = ilp.base.blocks
    expect = np.concatenate([np.arange(ilp.base.n_vars)[b[k]] for k in ("x", "s")])
    assert np.array_equal(ilp.priority_vars, np.sort(expect))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_ilp_never_worse_than_planner(seed):
    rng = np.random.default_rng(seed)
    e = envmod.generate(6, 6, 5, 4, 0.1, seed)
    net = petri.grid_to_rmpn(e)
    f, _ = spec.random_formula(5, 4, rng)
    cfg = planner.PlanConfig(rng_seed=seed)
    rep = oracle.compare(net, f, cfg)
    assert rep["ilp_objective"] <= rep["planner_objective"] + 1e-6
