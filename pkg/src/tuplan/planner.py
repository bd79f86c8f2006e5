"""Task assignment and path planning by iterated LP relaxations.

The pipeline:

1. relax the full planning problem (markings, firings, task vector ``x`` and
   cell capacity ``s``) and solve it as an LP;
2. while ``x`` is fractional, pin every entry at 1 plus the fractional entry
   closest to 1 and solve again;
3. fix ``s`` to the rounded-up capacity of the last LP and solve the
   remaining reachability LP, whose constraint matrix is totally unimodular
   so its vertex optimum is integral;
4. optionally split the motion into stages of capacity one (intermediate
   markings) to rule out two robots crossing the same cell.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .errors import DimensionMismatch, Infeasible, NotIntegral, TokenCountMismatch
from .petri import Rmpn
from .spec import CnfFormula, SpecConstraints, check_constraints, encode_cnf

log = logging.getLogger(__name__)


class CollisionMode(str, enum.Enum):
    NONE = "none"
    CAPACITY_ONLY = "capacity"
    INTERMEDIATE_MARKINGS = "staged"


@dataclass(frozen=True)
class PlanConfig:
    """Planner settings.

    ``big_n`` defaults to ``n_R + 2`` once the net is known. ``stage_weighting``
    selects the staged objective: ``"weighted"`` charges stage ``i`` of ``k``
    ``1 + (k - i)`` per firing, ``"uniform"`` charges 1.
    """

    big_n: float | None = None
    collision_mode: CollisionMode = CollisionMode.NONE
    rng_seed: int = 0
    max_stage_growth: int | None = None
    integrality_tol: float = lp.INT_TOL
    stage_weighting: str = "weighted"

    def resolve(self, n_robots: int) -> "PlanConfig":
        big_n = n_robots + 2 if self.big_n is None else self.big_n
        growth = n_robots if self.max_stage_growth is None else self.max_stage_growth
        if big_n <= n_robots + 1:
            raise ValueError(f"big_n must exceed n_R + 1 = {n_robots + 1}, got {big_n}")
        if not 0 <= growth <= max(n_robots, 0):
            raise ValueError(f"max_stage_growth must lie in 0..{n_robots}")
        if self.stage_weighting not in ("weighted", "uniform"):
            raise ValueError("stage_weighting must be 'weighted' or 'uniform'")
        return PlanConfig(
            big_n, CollisionMode(self.collision_mode), self.rng_seed, growth, self.integrality_tol, self.stage_weighting
        )


@dataclass
class Stage:
    sigma: np.ndarray
    marking_after: np.ndarray


@dataclass
class PlanOutcome:
    x_star: np.ndarray
    s_bar: int
    stages: list[Stage]
    cost_first_term: float
    rounding_iterations: int
    status: str = "solved"
    seed: int = 0
    s_star: float = float("nan")
    m0: np.ndarray | None = None
    timings: dict = field(default_factory=dict)
    lp_solves: int = 0

    @property
    def final_marking(self) -> np.ndarray:
        return self.stages[-1].marking_after if self.stages else self.m0

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "x": [int(v) for v in self.x_star],
            "s_bar": int(self.s_bar),
            "s_star": round(float(self.s_star), 9),
            "cost": int(round(self.cost_first_term)),
            "iterations": int(self.rounding_iterations),
            "stages": [
                {
                    "sigma_nonzeros": [[int(t), int(st.sigma[t])] for t in np.flatnonzero(st.sigma)],
                    "marking": [int(v) for v in st.marking_after],
                }
                for st in self.stages
            ],
            "seed": int(self.seed),
        }


def _as_int(v, tol, what):
    r = np.round(v)
    if np.abs(v - r).max(initial=0.0) > tol:
        raise NotIntegral(f"{what} is not integral (max residue {np.abs(v - r).max():.3g})")
    return r.astype(np.int64)


def build_problem6(net: Rmpn, sc: SpecConstraints, cfg: PlanConfig) -> lp.LpStandardForm:
    """Full relaxation over ``(m, sigma, x, s)``."""
    n_p, n_t, n_y = net.n_places, net.n_transitions, net.n_symbols
    if sc.a_phi.shape[1] != n_y:
        raise DimensionMismatch(f"formula has {sc.a_phi.shape[1]} symbols, net has {n_y}")
    cfg = cfg.resolve(net.n_robots)
    big_n = cfg.big_n
    n = n_p + n_t + n_y + 1
    sm, ss, sx, s_idx = slice(0, n_p), slice(n_p, n_p + n_t), slice(n_p + n_t, n - 1), n - 1

    a_eq = np.zeros((n_p, n))
    a_eq[:, sm] = np.eye(n_p)
    a_eq[:, ss] = -net.c
    b_eq = net.m0.astype(float)

    n_d = sc.a_phi.shape[0]
    a_le = np.zeros((2 * n_y + n_d + n_p, n))
    b_le = np.zeros(a_le.shape[0])
    r = 0
    a_le[r : r + n_y, sm] = -net.v
    a_le[r : r + n_y, sx] = np.eye(n_y)
    r += n_y
    a_le[r : r + n_y, sm] = net.v
    a_le[r : r + n_y, sx] = -big_n * np.eye(n_y)
    r += n_y
    a_le[r : r + n_d, sx] = sc.a_phi
    b_le[r : r + n_d] = sc.b_phi
    r += n_d
    a_le[r:, ss] = net.post
    a_le[r:, s_idx] = -1.0
    b_le[r:] = -net.m0

    c = np.zeros(n)
    c[ss] = 1.0
    c[s_idx] = big_n
    upper = np.full(n, np.inf)
    upper[sx] = 1.0
    blocks = {"m": sm, "sigma": ss, "x": sx, "s": slice(s_idx, s_idx + 1)}
    return lp.make_lp(c, a_eq, b_eq, a_le, b_le, upper=upper, blocks=blocks)


def build_problem7(net: Rmpn, m_f, s_fixed=None, big_n=None) -> lp.LpStandardForm:
    """Reachability LP over ``(sigma, s)`` towards a known final marking."""
    m_f = np.asarray(m_f)
    if m_f.shape != (net.n_places,):
        raise DimensionMismatch(f"final marking has shape {m_f.shape}")
    if np.abs(m_f - np.round(m_f)).max(initial=0) > 0 or (m_f < 0).any():
        raise ValueError("final marking must be a non-negative integer vector")
    if int(m_f.sum()) != net.n_robots:
        raise TokenCountMismatch(f"final marking holds {int(m_f.sum())} tokens, net has {net.n_robots}")
    if big_n is None:
        big_n = net.n_robots + 2
    n_p, n_t = net.n_places, net.n_transitions
    n = n_t + 1
    a_eq = np.zeros((n_p, n))
    a_eq[:, :n_t] = net.c
    b_eq = (m_f - net.m0).astype(float)
    a_le = np.zeros((n_p, n))
    a_le[:, :n_t] = net.post
    a_le[:, n_t] = -1.0
    b_le = -net.m0.astype(float)
    c = np.ones(n)
    c[n_t] = big_n
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    if s_fixed is not None:
        lower[n_t] = upper[n_t] = s_fixed
    blocks = {"sigma": slice(0, n_t), "s": slice(n_t, n)}
    return lp.make_lp(c, a_eq, b_eq, a_le, b_le, lower, upper, blocks)


def build_problem8(net: Rmpn, m_f, s_bar: int, weighting: str = "weighted") -> lp.LpStandardForm:
    """Staged reachability with ``s_bar`` intermediate markings of capacity one.

    Variables are ordered ``(m_1, sigma_1, ..., m_k, sigma_k)``; ``m_k`` is pinned
    to ``m_f`` through its bounds.
    """
    if s_bar < 1:
        raise ValueError("s_bar must be at least 1")
    m_f = np.asarray(m_f, dtype=float)
    if m_f.shape != (net.n_places,):
        raise DimensionMismatch(f"final marking has shape {m_f.shape}")
    n_p, n_t = net.n_places, net.n_transitions
    w = n_p + n_t
    n = s_bar * w
    a_eq = np.zeros((s_bar * n_p, n))
    b_eq = np.zeros(s_bar * n_p)
    a_le = np.zeros((s_bar * n_p, n))
    b_le = np.ones(s_bar * n_p)
    c = np.zeros(n)
    blocks = {}
    for i in range(s_bar):
        rows = slice(i * n_p, (i + 1) * n_p)
        mi = slice(i * w, i * w + n_p)
        si = slice(i * w + n_p, (i + 1) * w)
        blocks[f"m{i + 1}"] = mi
        blocks[f"sigma{i + 1}"] = si
        a_eq[rows, mi] = np.eye(n_p)
        a_eq[rows, si] = -net.c
        a_le[rows, si] = net.post
        if i == 0:
            b_eq[rows] = net.m0
            b_le[rows] -= net.m0
        else:
            prev = slice((i - 1) * w, (i - 1) * w + n_p)
            a_eq[rows, prev] = -np.eye(n_p)
            a_le[rows, prev] = np.eye(n_p)
        c[si] = 1.0 + (s_bar - (i + 1)) if weighting == "weighted" else 1.0
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    last = slice((s_bar - 1) * w, (s_bar - 1) * w + n_p)
    lower[last] = m_f
    upper[last] = m_f
    return lp.make_lp(c, a_eq, b_eq, a_le, b_le, lower, upper, blocks)


def element_rounding(x_star, tol: float, rng) -> tuple[dict[int, int], bool]:
    """Pins for one rounding step: entries at 1 plus the fractional one nearest 1."""
    x_star = np.asarray(x_star, dtype=float)
    fixed = {int(i): 1 for i in np.flatnonzero(x_star >= 1.0 - tol)}
    frac = np.flatnonzero((x_star > tol) & (x_star < 1.0 - tol))
    if frac.size == 0:
        return fixed, True
    best = x_star[frac].max()
    ties = frac[x_star[frac] >= best - tol]
    pick = int(ties[0]) if ties.size == 1 else int(rng.choice(ties))
    fixed[pick] = 1
    return fixed, False


@dataclass
class BooleanTaskResult:
    x_star: np.ndarray
    s_bar: int
    rounding_iterations: int
    s_star: float
    solution: lp.LpSolution
    lp_solves: int


def solve_boolean_task(net: Rmpn, sc: SpecConstraints, cfg: PlanConfig, rng=None) -> BooleanTaskResult:
    """Round the task vector to a binary one by repeated LP solves."""
    cfg = cfg.resolve(net.n_robots)
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    prob = build_problem6(net, sc, cfg)
    xs = prob.blocks["x"]
    x_cols = np.arange(prob.n_vars)[xs]
    pins: dict[int, int] = {}
    iterations = 0
    solves = 0
    tol = cfg.integrality_tol
    while True:
        sol = lp.solve_lp_with_fixed(prob, {int(x_cols[i]): v for i, v in pins.items()})
        solves += 1
        if not sol.optimal:
            raise Infeasible("boolean-task", f"LP relaxation is {sol.status.value}", iteration=iterations)
        x = sol.x[xs]
        fixed, done = element_rounding(x, tol, rng)
        if done:
            break
        new = set(fixed) - set(pins)
        if not new:
            raise RuntimeError("rounding made no progress")
        pins.update(fixed)
        iterations += 1
    x_star = np.round(x).astype(np.int64)
    s_star = float(sol.x[prob.blocks["s"]][0])
    s_bar = max(1, math.ceil(s_star - tol))
    return BooleanTaskResult(x_star, s_bar, iterations, s_star, sol, solves)


def unique_final_marking(net: Rmpn, x_star) -> np.ndarray | None:
    """``V^T x`` when it is the only marking compatible with ``x``, else None."""
    x_star = np.asarray(x_star)
    if (net.v.sum(axis=1) != 1).any():
        return None
    m_f = net.v.T @ x_star
    if int(m_f.sum()) != net.n_robots or (m_f > 1).any():
        return None
    return m_f.astype(np.int64)


def _single_stage(net, sc, cfg, x_star, s_fixed):
    """Integral firing vector and final marking for a binary ``x``.

    ``s_fixed=None`` leaves the capacity free; a fractional optimum is then
    rounded up and solved again with the capacity pinned.
    Returns ``(sigma, m_f, s_used, s_star, solves)``.
    """
    tol = cfg.integrality_tol
    m_f = unique_final_marking(net, x_star)
    solves = 0
    if m_f is not None:
        prob = build_problem7(net, m_f, s_fixed, big_n=cfg.big_n)
        pins = {}
    else:
        # big_n floored so the pinned system keeps an integral right-hand side
        prob = build_problem6(net, sc, PlanConfig(math.floor(cfg.big_n), rng_seed=cfg.rng_seed))
        cols = np.arange(prob.n_vars)
        pins = {int(j): int(v) for j, v in zip(cols[prob.blocks["x"]], x_star)}
        if s_fixed is not None:
            pins[int(cols[prob.blocks["s"]][0])] = s_fixed
    sol = lp.solve_lp_with_fixed(prob, pins)
    solves += 1
    if not sol.optimal:
        raise Infeasible("reachability", f"LP is {sol.status.value}")
    s_star = float(sol.x[prob.blocks["s"]][0])
    if s_fixed is None and abs(s_star - round(s_star)) > tol:
        s_fixed = max(1, math.ceil(s_star - tol))
        s_col = int(np.arange(prob.n_vars)[prob.blocks["s"]][0])
        pins[s_col] = s_fixed
        sol = lp.solve_lp_with_fixed(prob, pins)
        solves += 1
        if not sol.optimal:
            raise Infeasible("reachability", f"LP with pinned capacity is {sol.status.value}")
    sigma = _as_int(sol.x[prob.blocks["sigma"]], tol, "firing vector")
    if m_f is None:
        m_f = _as_int(sol.x[prob.blocks["m"]], tol, "final marking")
    s_used = int(round(sol.x[prob.blocks["s"]][0]))
    return sigma, m_f, s_used, s_star, solves


def solve_staged(net: Rmpn, m_f, s_bar: int, cfg: PlanConfig):
    """Try ``s_bar``, ``s_bar + 1``, ... intermediate markings until feasible.

    Returns ``(stages, solves)``.
    """
    cfg = cfg.resolve(net.n_robots)
    tol = cfg.integrality_tol
    solves = 0
    for k in range(s_bar, s_bar + cfg.max_stage_growth + 1):
        prob = build_problem8(net, m_f, k, cfg.stage_weighting)
        sol = lp.solve_lp(prob)
        solves += 1
        if sol.optimal:
            stages = []
            for i in range(1, k + 1):
                sigma = _as_int(prob.block(sol.x, f"sigma{i}"), tol, f"stage {i} firing vector")
                m = _as_int(prob.block(sol.x, f"m{i}"), tol, f"stage {i} marking")
                stages.append(Stage(sigma, m))
            return stages, solves
        log.info("staged problem with %d markings is %s", k, sol.status.value)
    raise Infeasible(
        "staged", f"no collision-free staging with {s_bar}..{s_bar + cfg.max_stage_growth} intermediate markings"
    )


def plan(net: Rmpn, f: CnfFormula, cfg: PlanConfig = PlanConfig()) -> PlanOutcome:
    """Assign tasks and compute integral firing vectors for the whole team."""
    if f.n_symbols != net.n_symbols:
        raise DimensionMismatch(f"formula has {f.n_symbols} symbols, net has {net.n_symbols}")
    cfg = cfg.resolve(net.n_robots)
    rng = np.random.default_rng(cfg.rng_seed)
    sc = encode_cnf(f)
    timings = {}

    t0 = time.perf_counter()
    task = solve_boolean_task(net, sc, cfg, rng)
    timings["boolean_task"] = time.perf_counter() - t0
    solves = task.lp_solves

    t1 = time.perf_counter()
    s_pin = None if cfg.collision_mode is CollisionMode.CAPACITY_ONLY else task.s_bar
    sigma, m_f, s_used, s_star, n = _single_stage(net, sc, cfg, task.x_star, s_pin)
    solves += n
    timings["reachability"] = time.perf_counter() - t1
    s_bar = s_used
    if cfg.collision_mode is CollisionMode.CAPACITY_ONLY:
        s_star_report = s_star
    else:
        s_star_report = task.s_star
    stages = [Stage(sigma, m_f)]

    if cfg.collision_mode is CollisionMode.INTERMEDIATE_MARKINGS:
        realized = int((net.post @ sigma + net.m0).max(initial=0))
        if realized > 1:
            t2 = time.perf_counter()
            stages, n = solve_staged(net, m_f, max(s_bar, 2), cfg)
            solves += n
            timings["staged"] = time.perf_counter() - t2

    x_star = task.x_star
    if not check_constraints(sc, x_star):
        raise RuntimeError("rounded task vector violates the mission constraints")
    cost = float(sum(int(st.sigma.sum()) for st in stages))
    timings["total"] = time.perf_counter() - t0
    return PlanOutcome(
        x_star=x_star,
        s_bar=s_bar,
        stages=stages,
        cost_first_term=cost,
        rounding_iterations=task.rounding_iterations,
        seed=cfg.rng_seed,
        s_star=s_star_report,
        m0=net.m0.copy(),
        timings=timings,
        lp_solves=solves,
    )
