"""Per-robot trajectories recovered from integral firing vectors."""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundaryMismatch, FlowInconsistent, NotIntegral
from .petri import Rmpn

log = logging.getLogger(__name__)


@dataclass
class RobotTrajectory:
    """Cells visited by one robot.

    ``stage_boundaries[i]`` indexes the cell where stage ``i`` ends; the next
    stage starts from that same cell.
    """

    robot_id: int
    cells: list[int]
    stage_boundaries: list[int]
    transitions: list[int] = field(default_factory=list)

    @property
    def start(self) -> int:
        return self.cells[0]

    @property
    def end(self) -> int:
        return self.cells[-1]


def _integral(v, what, tol=1e-6) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    r = np.round(v)
    if np.abs(v - r).max(initial=0.0) > tol:
        raise NotIntegral(f"{what} has fractional entries")
    return r.astype(np.int64)


def _bfs(net: Rmpn, residual, src: int, targets) -> list[int] | None:
    """Shortest transition sequence from ``src`` to any place in ``targets``."""
    arcs = net.arcs()
    out = [[] for _ in range(net.n_places)]
    for t in np.flatnonzero(residual > 0):
        out[arcs[t][0]].append(int(t))
    prev = {src: None}
    queue = deque([src])
    while queue:
        p = queue.popleft()
        if targets[p] > 0 and p != src:
            seq = []
            while prev[p] is not None:
                t = prev[p]
                seq.append(t)
                p = arcs[t][0]
            return seq[::-1]
        for t in out[p]:
            q = arcs[t][1]
            if q not in prev:
                prev[q] = t
                queue.append(q)
    return None


def _find_cycle(net: Rmpn, residual) -> list[int]:
    arcs = net.arcs()
    t = int(np.flatnonzero(residual > 0)[0])
    seq = [t]
    seen = {arcs[t][0]: 0}
    p = arcs[t][1]
    while p not in seen:
        seen[p] = len(seq)
        nxt = [u for u in np.flatnonzero(residual > 0) if arcs[u][0] == p]
        if not nxt:
            raise FlowInconsistent(f"residual flow is not conserved at place {p}")
        seq.append(int(nxt[0]))
        p = arcs[int(nxt[0])][1]
    return seq[seen[p]:]


def decompose_firing_vector(net: Rmpn, m_start, sigma, m_end) -> list[RobotTrajectory]:
    """One walk per token whose edge uses add up to ``sigma`` exactly."""
    m_start = _integral(m_start, "start marking")
    m_end = _integral(m_end, "end marking")
    sigma = _integral(sigma, "firing vector")
    if (sigma < 0).any() or (m_start < 0).any() or (m_end < 0).any():
        raise FlowInconsistent("negative firing counts or markings")
    if not np.array_equal(m_start + net.c @ sigma, m_end):
        raise FlowInconsistent("end marking does not follow from the firing vector")
    arcs = net.arcs()
    residual = sigma.copy()
    supply = np.maximum(m_start - m_end, 0)
    demand = np.maximum(m_end - m_start, 0)
    walks: list[tuple[list[int], list[int]]] = []
    for p in range(net.n_places):
        while supply[p] > 0:
            seq = _bfs(net, residual, p, demand)
            if seq is None:
                raise FlowInconsistent(f"no residual route out of place {p}")
            residual[seq] -= 1
            cells = [p] + [arcs[t][1] for t in seq]
            supply[p] -= 1
            demand[cells[-1]] -= 1
            walks.append((cells, seq))
    moved = np.bincount([w[0][0] for w in walks], minlength=net.n_places)
    for p in range(net.n_places):
        walks += [([p], []) for _ in range(int(m_start[p] - moved[p]))]
    walks.sort(key=lambda w: (w[0][0], w[0][-1], len(w[1])))

    while residual.any():
        cycle = _find_cycle(net, residual)
        on_cycle = {arcs[t][0] for t in cycle}
        log.warning("firing vector contains a cycle through places %s", sorted(on_cycle))
        for cells, seq in walks:
            hit = next((i for i, c in enumerate(cells) if c in on_cycle), None)
            if hit is None:
                continue
            k = next(j for j, t in enumerate(cycle) if arcs[t][0] == cells[hit])
            rot = cycle[k:] + cycle[:k]
            cells[hit + 1 : hit + 1] = [arcs[t][1] for t in rot]
            seq[hit:hit] = rot
            residual[rot] -= 1
            break
        else:
            raise FlowInconsistent(f"cycle through {sorted(on_cycle)} is not visited by any robot")
    return [RobotTrajectory(i, cells, [len(cells) - 1], seq) for i, (cells, seq) in enumerate(walks)]


def stitch_stages(stage_fragments) -> list[RobotTrajectory]:
    """Chain per-stage fragments through their shared boundary cells."""
    stage_fragments = [list(fr) for fr in stage_fragments]
    if not stage_fragments:
        return []
    trajs = [RobotTrajectory(i, list(f.cells), [len(f.cells) - 1], list(f.transitions)) for i, f in enumerate(stage_fragments[0])]
    for k, frags in enumerate(stage_fragments[1:], start=1):
        if len(frags) != len(trajs):
            raise BoundaryMismatch(f"stage {k} has {len(frags)} fragments, expected {len(trajs)}")
        by_cell: dict[int, list] = {}
        for f in frags:
            by_cell.setdefault(f.start, []).append(f)
        for cell, group in by_cell.items():
            if len(group) > 1:
                raise BoundaryMismatch(f"{len(group)} robots share boundary cell {cell} before stage {k}")
        for tr in trajs:
            group = by_cell.get(tr.end)
            if not group:
                raise BoundaryMismatch(f"no stage-{k} fragment starts at cell {tr.end}")
            f = group.pop()
            tr.cells += f.cells[1:]
            tr.transitions += f.transitions
            tr.stage_boundaries.append(len(tr.cells) - 1)
    return trajs


def audit_capacity(net: Rmpn, m_start, sigma, cap: int) -> bool:
    """Every place receives at most ``cap`` tokens in total."""
    return bool((net.post @ np.asarray(sigma) + np.asarray(m_start) <= cap).all())


def is_connected_walk(net: Rmpn, traj: RobotTrajectory) -> bool:
    arcs = net.arcs()
    if len(traj.transitions) != len(traj.cells) - 1:
        return False
    return all(arcs[t] == (a, b) for t, a, b in zip(traj.transitions, traj.cells, traj.cells[1:]))


def outcome_trajectories(net: Rmpn, outcome) -> list[RobotTrajectory]:
    """Decompose every stage of a plan outcome and chain the pieces."""
    m = np.asarray(outcome.m0)
    frags = []
    for st in outcome.stages:
        frags.append(decompose_firing_vector(net, m, st.sigma, st.marking_after))
        m = np.asarray(st.marking_after)
    return stitch_stages(frags)


def to_json(trajs) -> list[dict]:
    return [{"robot": t.robot_id, "cells": list(map(int, t.cells)), "stages": list(map(int, t.stage_boundaries))} for t in trajs]


def save(trajs, path) -> None:
    Path(path).write_text(json.dumps(to_json(trajs)) + "\n")


_CELL = 24
_COLORS = {"free": "#ffffff", "obstacle": "#9e9e9e", "start": "#d32f2f", "pending": "#1e63d6", "visited": "#2e9d3f"}


def stage_svg(env, net: Rmpn, outcome, stage: int, trajs=None, seed=None) -> str:
    """SVG of the workspace after ``stage`` (0-based).

    Obstacles gray, initial robot cells red, regions not yet reached blue and
    reached regions green; robot moves of this stage are drawn as polylines.
    """
    if net.cells is None:
        raise ValueError("net carries no cell coordinates")
    w, h = env.width * _CELL, env.height * _CELL
    reached = set()
    for st in outcome.stages[: stage + 1]:
        reached.update(int(p) for p in np.flatnonzero(st.marking_after))
    place_of = {c: i for i, c in enumerate(net.cells)}
    region_cells = {c for r in env.regions for c in r.cells}
    starts = set(env.robot_starts)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">']
    if seed is not None:
        out.append(f"<!-- seed: {seed} -->")
    out.append(f"<title>stage {stage + 1} of {len(outcome.stages)}</title>")
    for y in range(env.height):
        for x in range(env.width):
            c = (x, y)
            if c in env.obstacles:
                kind = "obstacle"
            elif c in region_cells:
                kind = "visited" if place_of.get(c) in reached else "pending"
            elif c in starts:
                kind = "start"
            else:
                kind = "free"
            out.append(
                f'<rect class="{kind}" x="{x * _CELL}" y="{y * _CELL}" width="{_CELL}" height="{_CELL}" '
                f'fill="{_COLORS[kind]}" stroke="#444" stroke-width="0.5"/>'
            )
    for tr in trajs or []:
        lo = 0 if stage == 0 else tr.stage_boundaries[stage - 1]
        hi = tr.stage_boundaries[stage]
        seg = tr.cells[lo : hi + 1]
        if len(seg) < 2:
            continue
        pts = " ".join(f"{net.cells[p][0] * _CELL + _CELL / 2:g},{net.cells[p][1] * _CELL + _CELL / 2:g}" for p in seg)
        out.append(f'<polyline class="path" data-robot="{tr.robot_id}" points="{pts}" fill="none" stroke="#000" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
