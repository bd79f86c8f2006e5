"""Exact ILP reference by best-bound branch-and-bound over the simplex solver."""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import lp
from .errors import BudgetExhausted, Infeasible
from .petri import Rmpn
from .planner import PlanConfig, build_problem6, plan
from .spec import CnfFormula, encode_cnf

DEFAULT_NODE_BUDGET = 100_000
# open-node count above which the search dives depth-first to find incumbents
DIVE_THRESHOLD = 5_000


@dataclass(frozen=True, eq=False)
class IlpProblem:
    base: lp.LpStandardForm
    integer_vars: np.ndarray
    # branched on before any other fractional integer variable
    priority_vars: np.ndarray = np.zeros(0, dtype=np.int64)

    def __post_init__(self):
        iv = np.unique(np.asarray(self.integer_vars, dtype=np.int64))
        if iv.size and (iv[0] < 0 or iv[-1] >= self.base.n_vars):
            raise ValueError("integer variable index out of range")
        pv = np.unique(np.asarray(self.priority_vars, dtype=np.int64))
        if not np.isin(pv, iv).all():
            raise ValueError("priority variables must be integer variables")
        object.__setattr__(self, "integer_vars", iv)
        object.__setattr__(self, "priority_vars", pv)


def _integral_objective(p: IlpProblem) -> bool:
    c = p.base.objective
    nz = np.flatnonzero(c)
    return bool(np.isin(nz, p.integer_vars).all() and np.allclose(c[nz], np.round(c[nz])))


def solve_ilp(p: IlpProblem, node_budget: int = DEFAULT_NODE_BUDGET, tol: float = lp.INT_TOL) -> lp.LpSolution:
    """Proven-optimal integral solution, or ``BudgetExhausted`` with the incumbent."""
    base = p.base
    iv = p.integer_vars
    prio = np.isin(iv, p.priority_vars)
    step = 1.0 if _integral_objective(p) else 0.0
    counter = itertools.count()
    incumbent: lp.LpSolution | None = None
    nodes = 0
    iterations = 0

    def prunable(bound):
        if incumbent is None:
            return False
        if step:
            return math.ceil(bound - 1e-6) >= incumbent.objective_value - 1e-6
        return bound >= incumbent.objective_value - 1e-9

    root = lp.solve_lp(base)
    nodes += 1
    iterations += root.iterations
    if not root.optimal:
        return lp.LpSolution(root.status, nodes=nodes, iterations=iterations)
    heap = [(root.objective_value, 0, next(counter), base.lower, base.upper, root)]
    best_bound = root.objective_value
    while heap:
        if len(heap) > DIVE_THRESHOLD and incumbent is None:
            # dive on the deepest node until an incumbent shows up
            idx = max(range(len(heap)), key=lambda i: heap[i][1])
            entry = heap.pop(idx)
            heapq.heapify(heap)
        else:
            entry = heapq.heappop(heap)
        bound, depth, _, lower, upper, sol = entry
        best_bound = bound
        if prunable(bound):
            continue
        vals = sol.x[iv]
        frac = np.abs(vals - np.round(vals))
        if frac.max(initial=0.0) <= tol:
            x = sol.x.copy()
            x[iv] = np.round(vals)
            incumbent = lp.LpSolution(
                lp.Status.OPTIMAL, x, float(base.objective @ x), sol.basis, iterations, nodes
            )
            continue
        # most fractional, lowest index on ties; priority variables first
        score = np.abs(vals - np.floor(vals) - 0.5)
        score[frac <= tol] = np.inf
        if prio.any() and np.isfinite(score[prio]).any():
            score[~prio] = np.inf
        j = int(iv[int(np.argmin(score))])
        v = sol.x[j]
        for lo_j, up_j in ((lower[j], math.floor(v)), (math.ceil(v), upper[j])):
            if lo_j > up_j:
                continue
            if nodes >= node_budget:
                raise BudgetExhausted(incumbent, best_bound, nodes)
            lo = lower.copy()
            up = upper.copy()
            lo[j], up[j] = lo_j, up_j
            child = lp.solve_lp(base.with_bounds(lo, up))
            nodes += 1
            iterations += child.iterations
            if child.optimal and not prunable(child.objective_value):
                heapq.heappush(heap, (child.objective_value, depth + 1, next(counter), lo, up, child))
    if incumbent is None:
        return lp.LpSolution(lp.Status.INFEASIBLE, nodes=nodes, iterations=iterations)
    incumbent.nodes = nodes
    incumbent.iterations = iterations
    return incumbent


def planning_ilp(net: Rmpn, f: CnfFormula, cfg: PlanConfig) -> IlpProblem:
    """The full planning problem with every variable integer.

    Branching starts on ``x`` and ``s``: with those fixed the remaining
    relaxation is typically integral, so subtrees close quickly.
    """
    prob = build_problem6(net, encode_cnf(f), cfg)
    idx = np.arange(prob.n_vars)
    prio = np.concatenate([idx[prob.blocks[k]].ravel() for k in ("x", "s") if k in prob.blocks])
    return IlpProblem(prob, idx, prio)


def compare(net: Rmpn, f: CnfFormula, cfg: PlanConfig = PlanConfig(), node_budget: int = DEFAULT_NODE_BUDGET) -> dict:
    """Planner against the exact ILP on the same lowering.

    Costs are the firing-count term only; ``relative_error`` is
    ``(planner - ilp) / ilp``.
    """
    report = {
        "planner_cost": None,
        "ilp_cost": None,
        "relative_error": None,
        "planner_runtime": None,
        "ilp_runtime": None,
        "planner_objective": None,
        "ilp_objective": None,
        "planner_status": None,
        "ilp_status": None,
        "ilp_nodes": None,
        "budget_exhausted": False,
    }
    cfg = cfg.resolve(net.n_robots)
    t0 = time.perf_counter()
    try:
        out = plan(net, f, cfg)
        report["planner_status"] = "solved"
        report["planner_cost"] = out.cost_first_term
        report["planner_objective"] = out.cost_first_term + cfg.big_n * out.s_bar
    except Infeasible as exc:
        report["planner_status"] = "infeasible"
        report["planner_phase"] = exc.phase
    report["planner_runtime"] = time.perf_counter() - t0

    ilp = planning_ilp(net, f, cfg)
    t1 = time.perf_counter()
    try:
        sol = solve_ilp(ilp, node_budget)
    except BudgetExhausted as exc:
        report["budget_exhausted"] = True
        report["ilp_nodes"] = exc.nodes
        sol = exc.incumbent
    report["ilp_runtime"] = time.perf_counter() - t1
    if sol is None or not sol.optimal:
        report["ilp_status"] = "infeasible" if sol is not None else "unknown"
    else:
        report["ilp_status"] = "optimal" if not report["budget_exhausted"] else "incumbent"
        report["ilp_nodes"] = sol.nodes
        report["ilp_cost"] = float(round(ilp.base.block(sol.x, "sigma").sum()))
        report["ilp_objective"] = float(sol.objective_value)
    if report["planner_cost"] is not None and report["ilp_cost"] is not None:
        p, q = report["planner_cost"], report["ilp_cost"]
        report["relative_error"] = 0.0 if p == q else ((p - q) / q if q else math.inf)
    return report
