"""Robot motion Petri nets (state machines over workspace cells).

Places are cells, transitions are moves between adjacent cells and tokens are
robots. Tokens are indistinguishable: a marking only counts robots per cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import Cell, GridEnvironment
from .errors import DimensionMismatch, EmptyEnvironment, NegativeMarking, ParseError, RobotOnObstacle


@dataclass(frozen=True, eq=False)
class Rmpn:
    """State-machine Petri net with labelled places.

    ``pre`` and ``post`` are |P| x |T| 0/1 arrays, ``m0`` the initial marking and
    ``labels[p]`` the set of symbol indices observed in place ``p``.
    """

    pre: np.ndarray
    post: np.ndarray
    m0: np.ndarray
    labels: tuple[frozenset[int], ...]
    n_symbols: int
    cells: tuple[Cell, ...] | None = None
    c: np.ndarray = field(init=False, repr=False)
    v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pre = np.asarray(self.pre, dtype=np.int64)
        post = np.asarray(self.post, dtype=np.int64)
        if pre.ndim != 2 or pre.shape != post.shape:
            raise DimensionMismatch(f"pre {pre.shape} and post {post.shape} differ")
        n_p = pre.shape[0]
        m0 = np.asarray(self.m0, dtype=np.int64).reshape(-1)
        if m0.shape != (n_p,):
            raise DimensionMismatch(f"m0 has length {m0.size}, expected {n_p}")
        if (m0 < 0).any():
            raise ValueError("initial marking must be non-negative")
        labels = tuple(frozenset(int(s) for s in lab) for lab in self.labels)
        if len(labels) != n_p:
            raise DimensionMismatch(f"{len(labels)} label sets for {n_p} places")
        v = np.zeros((self.n_symbols, n_p), dtype=np.int64)
        for p, lab in enumerate(labels):
            for s in lab:
                if not 0 <= s < self.n_symbols:
                    raise ValueError(f"place {p} carries unknown symbol {s}")
                v[s, p] = 1
        for name, arr in (("pre", pre), ("post", post), ("m0", m0), ("v", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "labels", labels)
        c = post - pre
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def n_places(self) -> int:
        return self.pre.shape[0]

    @property
    def n_transitions(self) -> int:
        return self.pre.shape[1]

    @property
    def n_robots(self) -> int:
        return int(self.m0.sum())

    def source(self, t: int) -> int:
        """Input place of transition ``t`` (state machines only)."""
        return int(np.flatnonzero(self.pre[:, t])[0])

    def target(self, t: int) -> int:
        return int(np.flatnonzero(self.post[:, t])[0])

    def arcs(self) -> list[tuple[int, int]]:
        """(input place, output place) per transition."""
        src = self.pre.argmax(axis=0)
        dst = self.post.argmax(axis=0)
        return [(int(a), int(b)) for a, b in zip(src, dst)]

    def with_marking(self, m0) -> "Rmpn":
        return Rmpn(self.pre, self.post, m0, self.labels, self.n_symbols, self.cells)


def from_arcs(n_places, arcs, m0, labels=None, n_symbols=0, cells=None) -> Rmpn:
    """Build a state machine from a list of ``(source, target)`` transitions."""
    pre = np.zeros((n_places, len(arcs)), dtype=np.int64)
    post = np.zeros_like(pre)
    for t, (a, b) in enumerate(arcs):
        pre[a, t] = 1
        post[b, t] = 1
    if labels is None:
        labels = [()] * n_places
    return Rmpn(pre, post, m0, tuple(labels), n_symbols, cells)


def grid_to_rmpn(env: GridEnvironment) -> Rmpn:
    """One place per free cell, a pair of opposite transitions per 4-adjacency."""
    cells = env.free_cells()
    if not cells:
        raise EmptyEnvironment("environment has no free cells")
    place_of = {c: i for i, c in enumerate(cells)}
    for c in env.robot_starts:
        if c not in place_of:
            raise RobotOnObstacle(f"robot start {c} is not a free cell")
    arcs = []
    for i, (x, y) in enumerate(cells):
        for nb in ((x + 1, y), (x, y + 1)):
            j = place_of.get(nb)
            if j is not None:
                arcs.append((i, j))
                arcs.append((j, i))
    m0 = np.zeros(len(cells), dtype=np.int64)
    for c in env.robot_starts:
        m0[place_of[c]] += 1
    label_of = env.label_of()
    labels = [frozenset([label_of[c]]) if c in label_of else frozenset() for c in cells]
    return from_arcs(len(cells), arcs, m0, labels, env.n_symbols, tuple(cells))


def apply_state_equation(net: Rmpn, m0, sigma) -> np.ndarray:
    """Marking reached from ``m0`` after firing counts ``sigma``."""
    m0 = np.asarray(m0)
    sigma = np.asarray(sigma)
    if m0.shape != (net.n_places,) or sigma.shape != (net.n_transitions,):
        raise DimensionMismatch(
            f"expected marking of length {net.n_places} and firing vector of length "
            f"{net.n_transitions}, got {m0.shape} and {sigma.shape}"
        )
    m = m0 + net.c @ sigma
    if (m < 0).any():
        bad = np.flatnonzero(m < 0).tolist()
        raise NegativeMarking(f"places {bad} would hold a negative number of tokens")
    return m


def observe(net: Rmpn, m) -> np.ndarray:
    """Number of robots observing each symbol."""
    m = np.asarray(m)
    if m.shape != (net.n_places,):
        raise DimensionMismatch(f"marking has shape {m.shape}, expected ({net.n_places},)")
    return net.v @ m


def is_state_machine(net: Rmpn) -> bool:
    for mat in (net.pre, net.post):
        if not np.isin(mat, (0, 1)).all():
            return False
        if (mat.sum(axis=0) != 1).any():
            return False
    return True


def four_cell_net() -> Rmpn:
    """Four-place, eight-transition net with y1 on p4 and y2 on p1, robot on p3."""
    arcs = [(0, 1), (1, 0), (1, 2), (2, 1), (1, 3), (3, 1), (3, 0), (0, 3)]
    labels = [{1}, (), (), {0}]
    return from_arcs(4, arcs, [0, 0, 1, 0], labels, n_symbols=2)


def random_state_machine(n_places: int, n_transitions: int, rng, n_robots: int = 1) -> Rmpn:
    """Random state machine without self-loops; arcs may repeat."""
    if n_places < 2:
        raise ValueError("need at least two places")
    arcs = []
    for _ in range(n_transitions):
        a, b = rng.choice(n_places, size=2, replace=False)
        arcs.append((int(a), int(b)))
    m0 = np.bincount(rng.integers(0, n_places, size=n_robots), minlength=n_places)
    return from_arcs(n_places, arcs, m0)


def to_dict(net: Rmpn) -> dict:
    """JSON form: incidence as explicit input/output place lists per transition."""
    return {
        "places": net.n_places,
        "transitions": [
            {"pre": np.flatnonzero(net.pre[:, t]).tolist(), "post": np.flatnonzero(net.post[:, t]).tolist()}
            for t in range(net.n_transitions)
        ],
        "m0": net.m0.tolist(),
        "labels": [sorted(lab) for lab in net.labels],
        "n_symbols": net.n_symbols,
    }


def from_dict(data) -> Rmpn:
    """Inverse of ``to_dict``; also accepts nets that are not state machines."""
    try:
        n_p = int(data["places"])
        trans = data["transitions"]
        pre = np.zeros((n_p, len(trans)), dtype=np.int64)
        post = np.zeros_like(pre)
        for t, tr in enumerate(trans):
            for p in tr["pre"]:
                pre[int(p), t] += 1
            for p in tr["post"]:
                post[int(p), t] += 1
        labels = data.get("labels") or [[]] * n_p
        return Rmpn(pre, post, data["m0"], tuple(labels), int(data.get("n_symbols", 0)))
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ParseError(f"malformed net: {exc}") from exc


def save(net: Rmpn, path) -> None:
    Path(path).write_text(json.dumps(to_dict(net), indent=1) + "\n")


def load(path) -> Rmpn:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}") from exc
    return from_dict(data)
