import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tuplan import env as envmod
from tuplan import paths, petri, planner, spec
from tuplan.errors import BoundaryMismatch, FlowInconsistent, NotIntegral
from tuplan.paths import RobotTrajectory

from conftest import line_env


def edge_uses(net, trajs):
    use = np.zeros(net.n_transitions, dtype=np.int64)
    for t in trajs:
        np.add.at(use, t.transitions, 1)
    return use


def test_single_walk(four_cell):
    trajs = paths.decompose_firing_vector(four_cell, [0, 0, 1, 0], [0, 1, 0, 1, 0, 0, 0, 0], [1, 0, 0, 0])
    assert len(trajs) == 1
    assert trajs[0].cells == [2, 1, 0]
    assert trajs[0].transitions == [3, 1]


def test_zero_sigma_keeps_tokens():
    net = petri.grid_to_rmpn(line_env(4, [0, 3]))
    trajs = paths.decompose_firing_vector(net, net.m0, np.zeros(net.n_transitions, int), net.m0)
    assert sorted(t.cells for t in trajs) == [[0], [3]]


def test_two_disjoint_moves():
    net = petri.grid_to_rmpn(line_env(5, [0, 3]))
    sigma = np.zeros(net.n_transitions, int)
    arcs = net.arcs()
    sigma[arcs.index((0, 1))] = 1
    sigma[arcs.index((3, 4))] = 1
    trajs = paths.decompose_firing_vector(net, net.m0, sigma, [0, 1, 0, 0, 1])
    assert sorted(t.cells for t in trajs) == [[0, 1], [3, 4]]


def test_cycle_spliced_into_walk(four_cell, caplog):
    # one step p3 -> p2 plus a detour p2 -> p1 -> p2
    sigma = np.array([1, 1, 0, 1, 0, 0, 0, 0])
    trajs = paths.decompose_firing_vector(four_cell, [0, 0, 1, 0], sigma, [0, 1, 0, 0])
    np.testing.assert_array_equal(edge_uses(four_cell, trajs), sigma)
    assert trajs[0].cells[0] == 2 and trajs[0].cells[-1] == 1
    assert paths.is_connected_walk(four_cell, trajs[0])
    assert "cycle" in caplog.text


def test_errors(four_cell):
    with pytest.raises(NotIntegral):
        paths.decompose_firing_vector(four_cell, [0, 0, 1, 0], [0, 0.5, 0, 0.5, 0, 0, 0, 0], [1, 0, 0, 0])
    with pytest.raises(FlowInconsistent):
        paths.decompose_firing_vector(four_cell, [0, 0, 1, 0], np.zeros(8), [1, 0, 0, 0])
    # a cycle that no robot passes through cannot be realised
    with pytest.raises(FlowInconsistent):
        paths.decompose_firing_vector(four_cell, [0, 0, 1, 0], [0, 0, 0, 0, 1, 1, 0, 0], [0, 0, 1, 0])


def test_stitch_single_robot():
    a = RobotTrajectory(0, [0, 1], [1], [0])
    b = RobotTrajectory(0, [1, 2], [1], [2])
    (t,) = paths.stitch_stages([[a], [b]])
    assert t.cells == [0, 1, 2] and t.stage_boundaries == [1, 2]


def test_stitch_distinct_boundaries():
    s1 = [RobotTrajectory(0, [0, 1], [1], [0]), RobotTrajectory(1, [5, 4], [1], [9])]
    s2 = [RobotTrajectory(0, [4, 3], [1], [7]), RobotTrajectory(1, [1, 2], [1], [2])]
    t = paths.stitch_stages([s1, s2])
    assert [x.cells for x in t] == [[0, 1, 2], [5, 4, 3]]


def test_stitch_shared_cell_rejected():
    s1 = [RobotTrajectory(0, [0, 1], [1], [0]), RobotTrajectory(1, [2, 1], [1], [3])]
    s2 = [RobotTrajectory(0, [1], [0], []), RobotTrajectory(1, [1], [0], [])]
    with pytest.raises(BoundaryMismatch):
        paths.stitch_stages([s1, s2])
    with pytest.raises(BoundaryMismatch):
        paths.stitch_stages([s1[:1], s2])


def test_audit_capacity(four_cell):
    assert not paths.audit_capacity(four_cell, [2, 0, 0, 0], np.zeros(8), 1)
    assert paths.audit_capacity(four_cell, [0, 0, 1, 0], [0, 1, 0, 1, 0, 0, 0, 0], 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_capacity_mode_respects_its_bound(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    e = envmod.generate(7, 7, n, n, 0.2, seed)
    net = petri.grid_to_rmpn(e)
    out = planner.plan(net, spec.conjunction(n), planner.PlanConfig(collision_mode="capacity"))
    assert paths.audit_capacity(net, net.m0, out.stages[0].sigma, out.s_bar)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["none", "staged"]))
def test_decomposition_conservation(seed, mode):
    n = 5
    e = envmod.generate(7, 7, n, n, 0.2, seed)
    net = petri.grid_to_rmpn(e)
    out = planner.plan(net, spec.conjunction(n), planner.PlanConfig(collision_mode=mode))
    m = net.m0
    frags = []
    for st_ in out.stages:
        tr = paths.decompose_firing_vector(net, m, st_.sigma, st_.marking_after)
        np.testing.assert_array_equal(edge_uses(net, tr), st_.sigma)
        np.testing.assert_array_equal(np.bincount([t.start for t in tr], minlength=net.n_places), m)
        np.testing.assert_array_equal(np.bincount([t.end for t in tr], minlength=net.n_places), st_.marking_after)
        if mode == "staged":
            assert paths.audit_capacity(net, m, st_.sigma, 1)
        frags.append(tr)
        m = st_.marking_after
    for t in paths.stitch_stages(frags):
        assert paths.is_connected_walk(net, t)
        assert len(t.stage_boundaries) == len(out.stages)


def test_svg_and_json(tmp_path):
    e = envmod.generate(6, 6, 3, 3, 0.1, 4)
    net = petri.grid_to_rmpn(e)
    out = planner.plan(net, spec.conjunction(3))
    trajs = paths.outcome_trajectories(net, out)
    svg = paths.stage_svg(e, net, out, 0, trajs, seed=4)
    assert svg.count('class="obstacle"') == len(e.obstacles)
    assert svg.count('class="visited"') == 3 and 'class="pending"' not in svg
    assert svg.count('class="start"') + sum(1 for c in e.robot_starts if c in {r for g in e.regions for r in g.cells}) == 3
    assert "seed: 4" in svg
    paths.save(trajs, tmp_path / "t.json")
    assert (tmp_path / "t.json").read_text().startswith("[{")
