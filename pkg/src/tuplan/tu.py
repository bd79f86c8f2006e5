"""Total unimodularity of the planning constraint matrices.

Two independent certificates are offered:

* ``is_tu_bruteforce`` evaluates exact integer determinants (fraction-free
  Bareiss elimination) of square submatrices;
* ``ghouila_houri_partition`` builds, for any row subset of the stacked
  ``[C; Post]`` style layouts, a signing whose column sums stay in
  {-1, 0, 1}; ``verify_partition`` checks it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NotStateMachine, TooLarge, UnsupportedLayout
from .petri import Rmpn, is_state_machine

DEFAULT_BUDGET = 2_000_000
_BATCH = 8192


@dataclass(frozen=True)
class RowBlock:
    kind: str  # "C", "Post" or "Pin"
    stage: int
    start: int
    size: int


@dataclass(frozen=True, eq=False)
class StackedMatrix:
    data: np.ndarray
    layout: str
    n_places: int
    stages: int
    blocks: tuple[RowBlock, ...]

    @property
    def shape(self):
        return self.data.shape

    def row_role(self, r: int) -> tuple[str, int, int]:
        """``(kind, stage, place)`` of row ``r``."""
        for blk in self.blocks:
            if blk.start <= r < blk.start + blk.size:
                return blk.kind, blk.stage, r - blk.start
        raise IndexError(f"row {r} outside matrix with {self.data.shape[0]} rows")

    def row_of(self, kind: str, stage: int, place: int) -> int | None:
        for blk in self.blocks:
            if blk.kind == kind and blk.stage == stage:
                return blk.start + place
        return None


@dataclass(frozen=True)
class RowPartition:
    r: frozenset[int]
    r1: frozenset[int]
    r2: frozenset[int]


def build_theorem1_matrix(net: Rmpn, check: bool = True) -> StackedMatrix:
    """``[C; Post]``: token-flow rows on top of post-incidence rows."""
    if check and not is_state_machine(net):
        raise NotStateMachine("net has a transition without exactly one input and one output place")
    n_p = net.n_places
    data = np.vstack([net.c, net.post]).astype(np.int64)
    blocks = (RowBlock("C", 1, 0, n_p), RowBlock("Post", 1, n_p, n_p))
    return StackedMatrix(data, "theorem1", n_p, 1, blocks)


def build_theorem2_matrix(net: Rmpn, stages: int, pin_final: bool = False, check: bool = True) -> StackedMatrix:
    """Staged matrix over columns ``(m_1, sigma_1, ..., m_k, sigma_k)``.

    Stage ``i`` contributes rows ``[I(m_{i-1}) -I(m_i) C(sigma_i)]`` and
    ``[I(m_{i-1}) Post(sigma_i)]``; the ``I(m_{i-1})`` blocks are absent for
    the first stage. ``pin_final`` appends identity rows on ``m_k``.
    """
    if stages < 1:
        raise ValueError("stages must be at least 1")
    if check and not is_state_machine(net):
        raise NotStateMachine("net has a transition without exactly one input and one output place")
    n_p, n_t = net.n_places, net.n_transitions
    w = n_p + n_t
    n_rows = 2 * n_p * stages + (n_p if pin_final else 0)
    data = np.zeros((n_rows, w * stages), dtype=np.int64)
    eye = np.eye(n_p, dtype=np.int64)
    blocks = []
    for i in range(stages):
        rc = 2 * n_p * i
        rp = rc + n_p
        mi = slice(i * w, i * w + n_p)
        si = slice(i * w + n_p, (i + 1) * w)
        data[rc : rc + n_p, mi] = -eye
        data[rc : rc + n_p, si] = net.c
        data[rp : rp + n_p, si] = net.post
        if i > 0:
            prev = slice((i - 1) * w, (i - 1) * w + n_p)
            data[rc : rc + n_p, prev] = eye
            data[rp : rp + n_p, prev] = eye
        blocks += [RowBlock("C", i + 1, rc, n_p), RowBlock("Post", i + 1, rp, n_p)]
    if pin_final:
        start = 2 * n_p * stages
        last = slice((stages - 1) * w, (stages - 1) * w + n_p)
        data[start:, last] = eye
        blocks.append(RowBlock("Pin", stages, start, n_p))
    layout = "theorem2-pinned" if pin_final else "theorem2"
    return StackedMatrix(data, layout, n_p, stages, tuple(blocks))


def ghouila_houri_partition(m: StackedMatrix, r) -> RowPartition:
    """Signing of the row subset ``r`` (0-based) for the stacked layouts.

    Token-flow and pinning rows go to ``r1``. A post-incidence row goes to
    ``r2`` exactly when the token-flow row of the same place and stage is
    selected, otherwise to ``r1``.
    """
    if m.layout not in ("theorem1", "theorem2", "theorem2-pinned"):
        raise UnsupportedLayout(f"no constructive partition for layout {m.layout!r}")
    r = frozenset(int(i) for i in r)
    r1, r2 = set(), set()
    for row in r:
        kind, stage, place = m.row_role(row)
        if kind == "Post" and m.row_of("C", stage, place) in r:
            r2.add(row)
        else:
            r1.add(row)
    return RowPartition(r, frozenset(r1), frozenset(r2))


def verify_partition(m: StackedMatrix | np.ndarray, p: RowPartition) -> bool:
    data = m.data if isinstance(m, StackedMatrix) else np.asarray(m)
    if p.r1 & p.r2 or (p.r1 | p.r2) != p.r:
        return False
    sums = data[sorted(p.r1)].sum(axis=0) - data[sorted(p.r2)].sum(axis=0)
    return bool(np.isin(sums, (-1, 0, 1)).all())


def sample_partitions(m: StackedMatrix, n_samples: int, rng, min_size: int = 1):
    """Verify the constructive partition on random row subsets.

    Returns the first failing subset, or ``None``.
    """
    n_rows = m.data.shape[0]
    for _ in range(n_samples):
        k = int(rng.integers(min(min_size, n_rows), n_rows + 1))
        r = rng.choice(n_rows, size=k, replace=False)
        if not verify_partition(m, ghouila_houri_partition(m, r)):
            return sorted(int(i) for i in r)
    return None


def bareiss_det(mat) -> int:
    """Exact determinant of an integer matrix by fraction-free elimination."""
    a = [[int(v) for v in row] for row in mat]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def batched_bareiss(batch: np.ndarray) -> np.ndarray:
    """Exact determinants of a stack of small integer matrices, shape (N, k, k).

    int64 is ample for {-1, 0, 1} entries up to order 12 (Hadamard's bound).
    """
    a = np.array(batch, dtype=np.int64, copy=True)
    n_mat, k, _ = a.shape
    if k == 0:
        return np.ones(n_mat, dtype=np.int64)
    sign = np.ones(n_mat, dtype=np.int64)
    alive = np.ones(n_mat, dtype=bool)
    prev = np.ones(n_mat, dtype=np.int64)
    idx = np.arange(n_mat)
    for i in range(k - 1):
        nz = a[:, i:, i] != 0
        has = nz.any(axis=1)
        alive &= has
        r = np.argmax(nz, axis=1) + i
        swap = has & (r != i)
        if swap.any():
            s = idx[swap]
            rows_i = a[s, i, :].copy()
            a[s, i, :] = a[s, r[swap], :]
            a[s, r[swap], :] = rows_i
            sign[swap] = -sign[swap]
        piv = np.where(alive, a[:, i, i], 1)
        lower = a[:, i + 1 :, i + 1 :] * piv[:, None, None] - a[:, i + 1 :, i : i + 1] * a[:, i : i + 1, i + 1 :]
        a[:, i + 1 :, i + 1 :] = lower // prev[:, None, None]
        prev = piv
    det = sign * a[:, k - 1, k - 1]
    det[~alive] = 0
    return det


def _two_core(nz: np.ndarray):
    rows = np.ones(nz.shape[0], dtype=bool)
    cols = np.ones(nz.shape[1], dtype=bool)
    while True:
        sub = nz[np.ix_(rows, cols)]
        r_ok = sub.sum(axis=1) >= 2
        c_ok = sub.sum(axis=0) >= 2
        if r_ok.all() and c_ok.all():
            return np.flatnonzero(rows), np.flatnonzero(cols)
        rows[np.flatnonzero(rows)[~r_ok]] = False
        cols[np.flatnonzero(cols)[~c_ok]] = False
        if not rows.any() or not cols.any():
            return np.flatnonzero(rows), np.flatnonzero(cols)


def _connected_sets(adj: list[set[int]], max_size: int):
    """Every connected vertex set of size 2..max_size exactly once (ESU)."""

    def extend(sub, ext, excl, v):
        if len(sub) >= 2:
            yield sub
        if len(sub) == max_size:
            return
        ext = list(ext)
        while ext:
            w = ext.pop()
            new_ext = set(ext)
            new_ext.update(u for u in adj[w] if u > v and u not in excl)
            yield from extend(sub + [w], new_ext, excl | adj[w], v)

    for v in range(len(adj)):
        nb = {u for u in adj[v] if u > v}
        yield from extend([v], nb, adj[v] | {v}, v)


@lru_cache(maxsize=None)
def _combos(n: int, k: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n), k)), dtype=np.int64).reshape(-1, k)


def find_tu_violation(mat, max_order: int, budget: int = DEFAULT_BUDGET):
    """A square submatrix of order <= ``max_order`` with determinant outside {-1, 0, 1}.

    Returns ``(rows, cols, det)`` or ``None``. Only connected submatrices whose
    rows and columns all hold two or more nonzeros are evaluated: a smallest
    violating submatrix always has that shape, every other one factors into
    smaller minors.
    """
    a = np.asarray(mat, dtype=np.int64)
    if a.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    bad = np.argwhere(~np.isin(a, (-1, 0, 1)))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        return [i], [j], int(a[i, j])
    max_order = min(max_order, *a.shape) if a.size else 0
    if max_order < 2:
        return None
    nz = a != 0
    rows, cols = _two_core(nz)
    if rows.size < 2 or cols.size < 2:
        return None
    core = a[np.ix_(rows, cols)]
    cnz = core != 0
    inter = cnz.astype(np.int64) @ cnz.T.astype(np.int64)
    adj = [set(np.flatnonzero(inter[i]).tolist()) - {i} for i in range(rows.size)]

    evaluated = 0
    pending: dict[int, list] = {}
    pending_meta: dict[int, list] = {}

    def flush(k):
        nonlocal evaluated
        mats = pending.pop(k, [])
        meta = pending_meta.pop(k, [])
        if not mats:
            return None
        stack = np.concatenate(mats)
        evaluated += stack.shape[0]
        dets = batched_bareiss(stack)
        hit = np.flatnonzero(np.abs(dets) > 1)
        if hit.size:
            h = int(hit[0])
            for sub_rows, sub_cols in meta:
                if h < sub_cols.shape[0]:
                    return (
                        [int(rows[i]) for i in sub_rows],
                        [int(cols[j]) for j in sub_cols[h]],
                        int(dets[hit[0]]),
                    )
                h -= sub_cols.shape[0]
        return None

    counts: dict[int, int] = {}
    for sub in _connected_sets(adj, max_order):
        k = len(sub)
        block = cnz[sub]
        cand = np.flatnonzero(block.sum(axis=0) >= 2)
        if cand.size < k:
            continue
        if ((block[:, cand]).sum(axis=1) < 2).any():
            continue
        combos = cand[_combos(cand.size, k)]
        sub_arr = core[sub]
        mats = sub_arr[:, combos].transpose(1, 0, 2)
        deg_ok = ((mats != 0).sum(axis=2) >= 2).all(axis=1)
        if not deg_ok.any():
            continue
        mats = mats[deg_ok]
        combos = combos[deg_ok]
        if evaluated + sum(counts.values()) + mats.shape[0] > budget:
            raise TooLarge(f"more than {budget} determinant evaluations needed")
        pending.setdefault(k, []).append(mats)
        pending_meta.setdefault(k, []).append((list(sub), combos))
        counts[k] = counts.get(k, 0) + mats.shape[0]
        if counts[k] >= _BATCH:
            counts[k] = 0
            found = flush(k)
            if found:
                return found
    for k in sorted(pending):
        counts[k] = 0
        found = flush(k)
        if found:
            return found
    return None


def is_tu_bruteforce(mat, max_order: int, budget: int = DEFAULT_BUDGET) -> bool:
    """True iff no square submatrix up to ``max_order`` has determinant outside {-1, 0, 1}."""
    return find_tu_violation(mat, max_order, budget) is None


def certify(m: StackedMatrix, max_order: int = 6, budget: int = DEFAULT_BUDGET, samples: int = 1000, rng=None) -> dict:
    """JSON-ready certification report.

    Brute force first; when the enumeration is too large, falls back to the
    constructive partition on random row subsets.
    """
    report = {"matrix_shape": list(m.data.shape), "layout": m.layout}
    try:
        hit = find_tu_violation(m.data, max_order, budget)
        report["method"] = "bruteforce"
        report["max_order"] = int(min(max_order, *m.data.shape)) if m.data.size else 0
        report["certified"] = hit is None
        if hit is not None:
            report["counterexample"] = {"rows": hit[0], "cols": hit[1], "det": hit[2]}
        return report
    except TooLarge:
        pass
    if rng is None:
        rng = np.random.default_rng(0)
    report["method"] = "partition-sampling"
    report["samples"] = samples
    try:
        failing = sample_partitions(m, samples, rng)
    except UnsupportedLayout:
        report["certified"] = False
        report["reason"] = "enumeration too large and no constructive partition for this layout"
        return report
    report["certified"] = failing is None
    if failing is not None:
        report["counterexample"] = {"rows": failing}
    return report
