from __future__ import annotations

from collections import Counter, deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from parcelsort.errors import InvalidConfigurationError, PlanningError
from parcelsort.planner import (
    LocalView,
    Mark,
    PathMode,
    Planner,
    RobotState,
    detect_cycle,
    resolve_priority,
)
from parcelsort.gridworld import generate_map
from parcelsort.roadnet import directed_distance, orient

SQUARE = [(0, 0), (0, 1), (1, 1), (1, 0)]  # a directed 4-cycle of the 5 x 5 network


def robot(net, rid, at, path=(), carried=None, goal=None):
    idx = net.map.index
    cells = deque(idx(c) for c in path)
    if goal is None and cells:
        goal = cells[-1]
    elif goal is not None:
        goal = idx(goal)
    return RobotState(rid, idx(at), goal, carried, cells)


def ring(wmap):
    """Border cells of a block map in clockwise order from (0, 0)."""
    r, c = wmap.rows - 1, wmap.cols - 1
    top = [(0, j) for j in range(c)]
    right = [(i, c) for i in range(r)]
    bottom = [(r, j) for j in range(c, 0, -1)]
    left = [(i, 0) for i in range(r, 0, -1)]
    return top + right + bottom + left


# -- priority ------------------------------------------------------------------

def test_carrier_beats_longer_path(tiny_net):
    rng = np.random.default_rng(0)
    a = robot(tiny_net, 0, (0, 0), [(0, 1)], carried=2)
    b = robot(tiny_net, 1, (1, 1), [(1, 0), (0, 0), (0, 1), (0, 2)])
    for _ in range(20):
        assert resolve_priority(a, b, rng) is a
        assert resolve_priority(b, a, rng) is a


def test_longer_path_wins_between_equals(tiny_net):
    rng = np.random.default_rng(0)
    a = robot(tiny_net, 0, (0, 0), [(0, 1)])
    b = robot(tiny_net, 1, (1, 1), [(1, 0), (0, 0)])
    assert resolve_priority(a, b, rng) is b
    a.carried = b.carried = 0
    assert resolve_priority(a, b, rng) is b


def test_full_tie_is_a_fair_coin(tiny_net):
    rng = np.random.default_rng(123)
    a = robot(tiny_net, 0, (0, 0), [(0, 1)])
    b = robot(tiny_net, 1, (1, 1), [(1, 0)])
    wins = sum(resolve_priority(a, b, rng) is a for _ in range(10_000))
    assert abs(wins / 10_000 - 0.5) <= 0.05


# -- cycles --------------------------------------------------------------------

def test_square_is_a_directed_cycle(tiny_net):
    idx = tiny_net.map.index
    for u, v in zip(SQUARE, SQUARE[1:] + SQUARE[:1]):
        assert idx(v) in tiny_net.succ[idx(u)]


def test_cycle_detected_and_rotated(tiny_net):
    robots = [robot(tiny_net, k, SQUARE[k], [SQUARE[(k + 1) % 4]]) for k in range(4)]
    occ = {r.position: r for r in robots}
    assert all(detect_cycle(r, occ) for r in robots)
    out = Planner(tiny_net).step(robots)
    assert out.cycles_detected == 1
    assert len(out.moves) == 4
    assert [tiny_net.map.coord(r.position) for r in robots] == SQUARE[1:] + SQUARE[:1]


def test_no_cycle_when_next_vertex_free(tiny_net):
    robots = [robot(tiny_net, k, SQUARE[k], [SQUARE[k + 1]]) for k in range(3)]
    occ = {r.position: r for r in robots}
    assert not any(detect_cycle(r, occ) for r in robots)


def test_no_cycle_when_a_member_waits(tiny_net):
    robots = [robot(tiny_net, k, SQUARE[k], [SQUARE[(k + 1) % 4]]) for k in range(4)]
    robots[2].path.clear()
    robots[2].goal = robots[2].position  # parked, so no replanning
    occ = {r.position: r for r in robots}
    assert not detect_cycle(robots[0], occ)
    out = Planner(tiny_net).step(robots)
    assert out.moves == {}


def test_full_border_ring_rotates(tiny_net):
    cells = ring(tiny_net.map)
    assert len(cells) == 16
    robots = [robot(tiny_net, k, c, [cells[(k + 1) % 16]]) for k, c in enumerate(cells)]
    out = Planner(tiny_net).step(robots)
    assert out.cycles_detected == 1
    assert len(out.moves) == 16
    assert [tiny_net.map.coord(r.position) for r in robots] == cells[1:] + cells[:1]


def test_cycle_token_visits_each_robot_once(tiny_net):
    # a tail feeding into a cycle it is not part of: the token must stop
    robots = [robot(tiny_net, k, SQUARE[k], [SQUARE[(k + 1) % 4]]) for k in range(4)]
    tail = robot(tiny_net, 9, (2, 0), [(1, 0)])
    occ = {r.position: r for r in [*robots, tail]}
    assert not detect_cycle(tail, occ)


# -- contests and queues ----------------------------------------------------------

def test_converging_pair_moves_exactly_one(tiny_net):
    for seed in range(30):
        a = robot(tiny_net, 0, (1, 1), [(1, 0)])
        b = robot(tiny_net, 1, (2, 0), [(1, 0)])
        out = Planner(tiny_net, seed=seed).step([a, b])
        assert len(out.moves) == 1 and len(out.waits) == 1
        assert out.conflicts_resolved == 1


def test_converging_carrier_always_wins(tiny_net):
    for seed in range(30):
        a = robot(tiny_net, 0, (1, 1), [(1, 0)])
        b = robot(tiny_net, 1, (2, 0), [(1, 0), (0, 0)], carried=0)
        out = Planner(tiny_net, seed=seed).step([a, b])
        assert list(out.moves) == [1]


def test_queue_waits_behind_parked_robot(tiny_net):
    a = robot(tiny_net, 0, (0, 0), [(0, 1), (0, 2)])
    b = robot(tiny_net, 1, (0, 1))
    out = Planner(tiny_net).step([a, b])
    assert out.moves == {}
    assert a.decision is Mark.WAIT


def test_queue_follows_moving_leader(tiny_net):
    cells = [(0, 0), (0, 1), (0, 2), (0, 3)]
    robots = [robot(tiny_net, k, cells[k], [cells[k + 1]]) for k in range(3)]
    out = Planner(tiny_net).step(robots)
    assert len(out.moves) == 3


def test_follower_waits_when_leader_loses(tiny_net):
    # leader at (1,1) loses (1,0) to a carrier from (2,0); its follower at (1,2) must wait
    lead = robot(tiny_net, 0, (1, 1), [(1, 0)])
    rival = robot(tiny_net, 1, (2, 0), [(1, 0)], carried=0)
    follow = robot(tiny_net, 2, (1, 2), [(1, 1)])
    out = Planner(tiny_net).step([follow, lead, rival])
    assert set(out.moves) == {1}


def test_local_view_is_three_by_three(tiny_net):
    view = LocalView({}, tiny_net.map.cols)
    view.center = tiny_net.map.index((1, 1))
    assert view.occupant(tiny_net.map.index((2, 2))) is None
    with pytest.raises(PlanningError):
        view.occupant(tiny_net.map.index((3, 1)))


def test_shared_start_cell_rejected(tiny_net):
    with pytest.raises(PlanningError):
        Planner(tiny_net).step([robot(tiny_net, 0, (0, 0)), robot(tiny_net, 1, (0, 0))])


# -- initial paths -------------------------------------------------------------------

def _coords(net, path):
    return tuple(net.map.coord(v) for v in path)


def test_single_robot_arrives_in_directed_distance(small_net):
    wmap = small_net.map
    rng = np.random.default_rng(1)
    cells = wmap.free_cells()
    for mode in PathMode:
        planner = Planner(small_net, mode, seed=3)
        for _ in range(10):
            s, t = (cells[i] for i in rng.integers(len(cells), size=2))
            r = robot(small_net, 0, s, goal=t)
            steps = 0
            while r.position != r.goal:
                planner.step([r])
                steps += 1
            assert steps == directed_distance(small_net, s, t)


def test_plain_path_is_smallest_shortest_path(tiny_net):
    succ = oracles.directed_edges(tiny_net)
    planner = Planner(tiny_net, PathMode.PLAIN)
    cells = tiny_net.map.free_cells()
    for s in cells:
        for t in cells[::3]:
            if s == t:
                continue
            r = robot(tiny_net, 0, s, goal=t)
            assert _coords(tiny_net, planner.plan(r)) == min(oracles.all_shortest_paths(succ, s, t))


def test_diversified_paths_are_uniform():
    net = orient(generate_map(2, 2, 2))
    succ = oracles.directed_edges(net)
    cells = net.map.free_cells()
    s, t = max(
        ((a, b) for a in cells for b in cells if a != b),
        key=lambda p: len(oracles.all_shortest_paths(succ, *p)),
    )
    options = oracles.all_shortest_paths(succ, s, t)
    assert len(options) >= 3
    planner = Planner(net, PathMode.DIVERSIFIED, seed=5)
    n = 6000
    seen = Counter(_coords(net, planner.plan(robot(net, 0, s, goal=t))) for _ in range(n))
    assert set(seen) == set(options)
    expected = n / len(options)
    chi2 = sum((seen[p] - expected) ** 2 / expected for p in options)
    assert chi2 < 3 * len(options) + 20  # loose bound, far above the df = k - 1 mean


def test_path_counts_match_enumeration(tiny_net):
    succ = oracles.directed_edges(tiny_net)
    planner = Planner(tiny_net, PathMode.DIVERSIFIED)
    goal = (4, 0)
    counts = planner.path_counts(tiny_net.map.index(goal))
    for s in tiny_net.map.free_cells():
        if s != goal:
            assert counts[tiny_net.map.index(s)] == len(oracles.all_shortest_paths(succ, s, goal))


def _conflicts(path, start_time, announced):
    return sum(announced.get((v, start_time + i + 1), 0) for i, v in enumerate(path))


def test_focal_path_respects_length_bound_and_dodges(small_net):
    wmap = small_net.map
    succ = oracles.directed_edges(small_net)
    rng = np.random.default_rng(2)
    cells = wmap.free_cells()
    planner = Planner(small_net, PathMode.FOCAL, focal_w=1.5, seed=0)
    others = []
    for k in range(12):
        s, t = (cells[i] for i in rng.integers(len(cells), size=2))
        others.append(robot(small_net, k, s, goal=t))
    # announce their paths through one step of planning (robots may share no cell)
    occupied = {}
    for r in others:
        occupied.setdefault(r.position, r)
    planner.step(list(occupied.values()))
    for trial in range(15):
        s, t = (cells[i] for i in rng.integers(len(cells), size=2))
        if s == t:
            continue
        r = robot(small_net, 100 + trial, s, goal=t)
        path = list(planner.plan(r))
        d = directed_distance(small_net, s, t)
        assert len(path) <= int(1.5 * d)
        prev = r.position
        for v in path:
            assert v in small_net.succ[prev]
            prev = v
        assert prev == r.goal
        mine = _conflicts(path, planner.time, planner._announced)
        if d <= 14:
            for option in oracles.all_shortest_paths(succ, s, t):
                other = [wmap.index(c) for c in option]
                assert mine <= _conflicts(other, planner.time, planner._announced)


def test_planner_validation(tiny_net):
    with pytest.raises(InvalidConfigurationError):
        Planner(tiny_net, "astar")
    with pytest.raises(InvalidConfigurationError):
        Planner(tiny_net, "epry-focal", focal_w=0.5)
    assert Planner(tiny_net, "epry-random").mode is PathMode.DIVERSIFIED
    assert Planner(tiny_net, "plain").mode is PathMode.PLAIN


def test_unreachable_goal(tiny_net):
    r = robot(tiny_net, 0, (0, 0), goal=(2, 2))  # the bin cell
    with pytest.raises(PlanningError):
        Planner(tiny_net).plan(r)


# -- step invariants ----------------------------------------------------------------------

def _random_robots(net, n, seed):
    rng = np.random.default_rng(seed)
    cells = net.map.free_cells()
    picks = rng.choice(len(cells), size=n, replace=False)
    goals = rng.integers(len(cells), size=n)
    return [
        RobotState(k, net.map.index(cells[p]), net.map.index(cells[g]), 0 if rng.random() < 0.5 else None)
        for k, (p, g) in enumerate(zip(picks, goals))
    ]


@settings(max_examples=25)
@given(st.integers(1, 60), st.sampled_from(list(PathMode)), st.integers(0, 10**6))
def test_step_invariants(small_net, n, mode, seed):
    robots = _random_robots(small_net, n, seed)
    planner = Planner(small_net, mode, seed=seed)
    cells = small_net.map.free_cells()
    rng = np.random.default_rng(seed + 1)
    for _ in range(25):
        before = {r.id: r.position for r in robots}
        wanted = {r.id: (r.path[0] if r.path else None) for r in robots}
        out = planner.step(robots)
        after = {r.id: r.position for r in robots}
        assert len(set(after.values())) == n  # no two robots meet
        for rid, cell in out.moves.items():
            assert cell in small_net.succ[before[rid]]
            if wanted[rid] is not None:
                assert cell == wanted[rid]
        for rid in out.waits:
            assert after[rid] == before[rid]
        back = {(before[i], after[i]) for i in out.moves}
        assert not any((b, a) in back for a, b in back)  # no swaps
        for r in robots:
            if r.position == r.goal:
                r.goal = small_net.map.index(cells[rng.integers(len(cells))])


def test_steps_are_deterministic(small_net):
    def trace(seed):
        robots = _random_robots(small_net, 40, 7)
        planner = Planner(small_net, PathMode.DIVERSIFIED, seed=seed)
        out = []
        for _ in range(30):
            planner.step(robots)
            out.append(tuple(r.position for r in robots))
        return out

    assert trace(4) == trace(4)
