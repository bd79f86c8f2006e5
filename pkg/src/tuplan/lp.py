"""Two-phase revised simplex for small and medium dense linear programs.

Problems are stated as::

    minimize    c @ x
    subject to  a_eq @ x == b_eq
                a_le @ x <= b_le
                lower <= x <= upper

with finite lower bounds. The solver always returns a basic (vertex)
solution, which is what makes LP relaxations of totally unimodular systems
come back integral.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
INT_TOL = 1e-6
PIVOT_TOL = 1e-11
OPT_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_LIMIT = 30


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


def _matrix(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1) if a.size else np.zeros((0, n))
    return a


def _vector(b, k):
    if b is None:
        return np.zeros(k)
    return np.asarray(b, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class LpStandardForm:
    objective: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_le: np.ndarray
    b_le: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    blocks: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def with_bounds(self, lower=None, upper=None) -> "LpStandardForm":
        return LpStandardForm(
            self.objective,
            self.a_eq,
            self.b_eq,
            self.a_le,
            self.b_le,
            self.lower if lower is None else np.asarray(lower, dtype=float),
            self.upper if upper is None else np.asarray(upper, dtype=float),
            self.blocks,
        )

    def with_objective(self, objective) -> "LpStandardForm":
        return LpStandardForm(
            np.asarray(objective, dtype=float),
            self.a_eq,
            self.b_eq,
            self.a_le,
            self.b_le,
            self.lower,
            self.upper,
            self.blocks,
        )

    def block(self, x, name):
        return np.asarray(x)[self.blocks[name]]

    def violation(self, x) -> float:
        """Largest constraint or bound violation of ``x``."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.a_eq.shape[0]:
            worst = max(worst, float(np.abs(self.a_eq @ x - self.b_eq).max()))
        if self.a_le.shape[0]:
            worst = max(worst, float((self.a_le @ x - self.b_le).max()))
        worst = max(worst, float((self.lower - x).max(initial=0.0)))
        worst = max(worst, float((x - self.upper).max(initial=0.0)))
        return worst


def make_lp(
    objective, a_eq=None, b_eq=None, a_le=None, b_le=None, lower=None, upper=None, blocks=None
) -> LpStandardForm:
    c = np.asarray(objective, dtype=float).reshape(-1)
    n = c.size
    a_eq = _matrix(a_eq, n)
    a_le = _matrix(a_le, n)
    b_eq = _vector(b_eq, a_eq.shape[0])
    b_le = _vector(b_le, a_le.shape[0])
    lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float).reshape(-1)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).reshape(-1)
    if a_eq.shape[1] != n or a_le.shape[1] != n:
        raise ValueError("constraint matrices must have one column per variable")
    if b_eq.shape != (a_eq.shape[0],) or b_le.shape != (a_le.shape[0],):
        raise ValueError("right-hand sides must have one entry per row")
    if lower.shape != (n,) or upper.shape != (n,):
        raise ValueError("bounds must have one entry per variable")
    if not np.isfinite(lower).all():
        raise ValueError("lower bounds must be finite")
    if (lower > upper).any():
        raise ValueError("lower bound above upper bound")
    return LpStandardForm(c, a_eq, b_eq, a_le, b_le, lower, upper, dict(blocks or {}))


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray | None = None
    objective_value: float = float("nan")
    basis: tuple[int, ...] = ()
    iterations: int = 0
    nodes: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class _Standard:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    free: np.ndarray  # original indices of the non-fixed variables
    n_struct: int
    n_slack: int
    n_art: int
    art_rows: np.ndarray
    init_basis: np.ndarray
    offset: np.ndarray  # lower bounds (fixed vars carry their value)


def _standardize(p: LpStandardForm):
    """Shift bounds, eliminate fixed variables and append slacks/artificials.

    Returns ``None`` when an emptied row is already violated.
    """
    lo, up = p.lower, p.upper
    fixed = up - lo <= 0.0
    free = np.flatnonzero(~fixed)
    offset = lo.copy()
    a_eq = p.a_eq[:, free]
    b_eq = p.b_eq - p.a_eq @ offset
    a_le = p.a_le[:, free]
    b_le = p.b_le - p.a_le @ offset
    finite = np.flatnonzero(np.isfinite(up[free]))
    if finite.size:
        rows = np.zeros((finite.size, free.size))
        rows[np.arange(finite.size), finite] = 1.0
        a_le = np.vstack([a_le, rows])
        b_le = np.concatenate([b_le, (up - lo)[free][finite]])

    keep_eq = np.abs(a_eq).max(axis=1, initial=0.0) > 0
    if (np.abs(b_eq[~keep_eq]) > FEAS_TOL).any():
        return None
    keep_le = np.abs(a_le).max(axis=1, initial=0.0) > 0
    if (b_le[~keep_le] < -FEAS_TOL).any():
        return None
    a_eq, b_eq = a_eq[keep_eq], b_eq[keep_eq]
    a_le, b_le = a_le[keep_le], b_le[keep_le]

    n_eq, n_le, nf = a_eq.shape[0], a_le.shape[0], free.size
    m = n_eq + n_le
    a = np.zeros((m, nf + n_le))
    a[:n_eq, :nf] = a_eq
    a[n_eq:, :nf] = a_le
    a[n_eq + np.arange(n_le), nf + np.arange(n_le)] = 1.0
    b = np.concatenate([b_eq, b_le])
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # rows whose slack kept a +1 start with the slack basic, the rest need artificials
    basis = np.full(m, -1, dtype=np.int64)
    le_ok = ~neg[n_eq:]
    basis[n_eq + np.flatnonzero(le_ok)] = nf + np.flatnonzero(le_ok)
    art_rows = np.flatnonzero(basis < 0)
    n_art = art_rows.size
    art = np.zeros((m, n_art))
    art[art_rows, np.arange(n_art)] = 1.0
    a = np.hstack([a, art])
    basis[art_rows] = nf + n_le + np.arange(n_art)
    c = np.zeros(a.shape[1])
    c[:nf] = p.objective[free]
    return _Standard(a, b, c, free, nf, n_le, n_art, art_rows, basis, offset)


class _Simplex:
    """Revised simplex on ``a x = b, x >= 0`` with an explicit basis inverse."""

    def __init__(self, a, b, basis, max_iter):
        self.a = a
        self.b = b
        self.basis = basis.copy()
        self.m, self.n = a.shape
        self.max_iter = max_iter
        self.iterations = 0
        self.refactor()

    def refactor(self):
        bmat = self.a[:, self.basis]
        try:
            self.binv = np.linalg.inv(bmat) if self.m else np.zeros((0, 0))
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("basis matrix became singular") from exc
        self.xb = self.binv @ self.b
        self.since_refactor = 0

    def run(self, c, allowed) -> Status:
        bland = False
        degenerate = 0
        in_basis = np.zeros(self.n, dtype=bool)
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"iteration limit {self.max_iter} reached")
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            in_basis[:] = False
            in_basis[self.basis] = True
            y = c[self.basis] @ self.binv
            d = c - y @ self.a
            cand = allowed & ~in_basis & (d < -OPT_TOL)
            if not cand.any():
                return Status.OPTIMAL
            if bland:
                q = int(np.argmax(cand))
            else:
                q = int(np.argmin(np.where(cand, d, np.inf)))
            alpha = self.binv @ self.a[:, q]
            pos = alpha > PIVOT_TOL
            if not pos.any():
                if (np.abs(alpha) > PIVOT_TOL).any() or not bland:
                    return Status.UNBOUNDED
                raise NumericalFailure("no usable pivot element")
            xb = np.maximum(self.xb, 0.0)
            ratios = np.full(self.m, np.inf)
            ratios[pos] = xb[pos] / alpha[pos]
            theta = ratios.min()
            ties = np.flatnonzero(ratios <= theta + 1e-12 * max(1.0, theta))
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(alpha[ties])])
            self._pivot(r, q, alpha, ratios[r])
            if ratios[r] <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_LIMIT:
                    bland = True
            else:
                degenerate = 0
                bland = False

    def _pivot(self, r, q, alpha, theta):
        ar = alpha[r]
        self.xb = self.xb - theta * alpha
        self.xb[r] = theta
        prow = self.binv[r] / ar
        self.binv -= np.outer(alpha, prow)
        self.binv[r] = prow
        self.basis[r] = q
        self.iterations += 1
        self.since_refactor += 1

    def values(self):
        self.refactor()
        x = np.zeros(self.n)
        x[self.basis] = self.xb
        return x


def solve_lp(p: LpStandardForm, max_iter: int = 200_000) -> LpSolution:
    """Vertex-optimal solution of ``p`` by the two-phase revised simplex."""
    std = _standardize(p)
    if std is None:
        return LpSolution(Status.INFEASIBLE)
    m = std.a.shape[0]
    n_total = std.a.shape[1]
    n_real = std.n_struct + std.n_slack
    sx = _Simplex(std.a, std.b, std.init_basis, max_iter)

    if std.n_art:
        c1 = np.zeros(n_total)
        c1[n_real:] = 1.0
        allowed = np.ones(n_total, dtype=bool)
        sx.run(c1, allowed)
        x = sx.values()
        infeas = float(x[n_real:].sum())
        if infeas > FEAS_TOL * max(1.0, float(np.abs(std.b).max(initial=0.0))):
            return LpSolution(Status.INFEASIBLE, iterations=sx.iterations)
        _drive_out_artificials(sx, n_real)

    allowed = np.zeros(n_total, dtype=bool)
    allowed[:n_real] = True
    status = sx.run(std.c, allowed)
    if status is Status.UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, iterations=sx.iterations)
    z = sx.values()
    x = std.offset.copy()
    x[std.free] += z[: std.n_struct]
    viol = p.violation(x)
    if viol > 1e-6 * max(1.0, float(np.abs(std.b).max(initial=0.0))):
        raise NumericalFailure(f"solution violates constraints by {viol:.3g}")
    return LpSolution(
        Status.OPTIMAL,
        x=x,
        objective_value=float(p.objective @ x),
        basis=tuple(sorted(int(j) for j in sx.basis)),
        iterations=sx.iterations,
    )


def _drive_out_artificials(sx: _Simplex, n_real: int) -> None:
    """Pivot zero-level artificials out of the basis where a real column allows it.

    Artificials left behind sit on redundant rows; they stay basic at zero and
    can never leave because their tableau row vanishes on every real column.
    """
    for r in range(sx.m):
        if sx.basis[r] < n_real:
            continue
        row = sx.binv[r] @ sx.a[:, :n_real]
        row[sx.basis[sx.basis < n_real]] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > 1e-9:
            alpha = sx.binv @ sx.a[:, j]
            sx._pivot(r, j, alpha, 0.0)
    sx.refactor()


def solve_lp_with_fixed(p: LpStandardForm, fixed: dict) -> LpSolution:
    """Solve ``p`` with some variables pinned to given values."""
    lower = p.lower.copy()
    upper = p.upper.copy()
    for j, value in fixed.items():
        if not lower[j] - FEAS_TOL <= value <= upper[j] + FEAS_TOL:
            raise ValueError(f"pin x[{j}] = {value} lies outside [{lower[j]}, {upper[j]}]")
        lower[j] = upper[j] = value
    return solve_lp(p.with_bounds(lower, upper))


def max_fractional(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.abs(x - np.round(x)).max())


def dump_tableau(p: LpStandardForm, path) -> None:
    """Write the standardized system to a text file for debugging."""
    std = _standardize(p)
    with open(path, "w") as fh:
        if std is None:
            fh.write("trivially infeasible after bound elimination\n")
            return
        fh.write(
            f"rows {std.a.shape[0]} cols {std.a.shape[1]} "
            f"(struct {std.n_struct}, slack {std.n_slack}, art {std.n_art})\n"
        )
        fh.write("c " + " ".join(f"{v:g}" for v in std.c) + "\n")
        for i in range(std.a.shape[0]):
            fh.write(" ".join(f"{v:g}" for v in std.a[i]) + f" | {std.b[i]:g}\n")
