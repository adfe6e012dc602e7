from __future__ import annotations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from parcelsort.errors import InvalidConfigurationError, OrientationError
from parcelsort.gridworld import generate_map, load_map, save_map, undirected_distance
from parcelsort.roadnet import directed_distance, orient

IRREGULAR = "6 7\nS......\n.B...B.\n.......\n...B...\n.......\n......S\n"


def _digraph(net) -> nx.DiGraph:
    g = nx.DiGraph()
    for u, vs in oracles.directed_edges(net).items():
        if not net.map.is_bin(u):
            g.add_node(u)
        for v in vs:
            g.add_edge(u, v)
    return g


@given(st.integers(1, 5), st.integers(1, 8))
def test_orientation_is_strongly_connected(a, b):
    net = orient(generate_map(a, b, 3))
    g = _digraph(net)
    assert g.number_of_nodes() == len(net.map.free_cells())
    assert nx.is_strongly_connected(g)


@given(st.integers(1, 5), st.integers(1, 8))
def test_every_adjacency_gets_exactly_one_direction(a, b):
    wmap = generate_map(a, b, 3)
    net = orient(wmap)
    succ = oracles.directed_edges(net)
    for u in wmap.free_cells():
        for v in wmap.neighbors(u):
            assert (v in succ[u]) != (u in succ[v]), (u, v)


def test_tiny_network_picture(tiny_net):
    assert tiny_net.dump() == (
        ".>.>.>.>.\n"
        "^ v v ^ v\n"
        ".<.<.<.<.\n"
        "^ v   ^ v\n"
        ".>. B .>.\n"
        "^ v   ^ v\n"
        ".>.>.>.>.\n"
        "^ v v ^ v\n"
        ".<.<.<S<.\n"
    )


def test_border_circulates_clockwise(small_net):
    wmap = small_net.map
    assert small_net.allowed_moves((0, 5)) >= {"E"}
    assert "S" in small_net.allowed_moves((5, wmap.cols - 1))
    assert "W" in small_net.allowed_moves((wmap.rows - 1, 5))
    assert "N" in small_net.allowed_moves((5, 0))


def test_streets_alternate(small_net):
    # free rows 0, 1, 3, 4, ... are streets 0, 1, 2, 3, ...: even streets run east
    assert small_net.has_edge((0, 10), (0, 11))
    assert small_net.has_edge((1, 11), (1, 10))
    assert small_net.has_edge((3, 10), (3, 11))
    assert small_net.has_edge((4, 11), (4, 10))


def test_directed_distances_match_bfs_oracle(small_net):
    wmap = small_net.map
    grid = oracles.grid_from_text(save_map(wmap))
    succ = oracles.directed_edges(small_net)
    rng = np.random.default_rng(3)
    cells = wmap.free_cells()
    for _ in range(120):
        s = cells[rng.integers(len(cells))]
        t = cells[rng.integers(len(cells))] if rng.random() < 0.7 else wmap.bins[rng.integers(wmap.n_bins)]
        assert directed_distance(small_net, s, t) == oracles.directed_distance(succ, grid, s, t)


def test_directed_distance_basics(tiny_net):
    assert directed_distance(tiny_net, (0, 0), (0, 0)) == 0
    assert directed_distance(tiny_net, (0, 0), (0, 1)) == 1
    # against the one-way street: all the way around
    assert directed_distance(tiny_net, (0, 1), (0, 0)) > 1
    with pytest.raises(InvalidConfigurationError):
        directed_distance(tiny_net, (2, 2), (0, 0))
    with pytest.raises(InvalidConfigurationError):
        directed_distance(tiny_net, (0, 0), (7, 7))


def test_directed_never_shorter_and_same_parity(small_net):
    wmap = small_net.map
    cells = wmap.free_cells()
    rng = np.random.default_rng(9)
    for _ in range(200):
        u = cells[rng.integers(len(cells))]
        v = cells[rng.integers(len(cells))]
        dd = directed_distance(small_net, u, v)
        du = undirected_distance(wmap, u, v)
        assert dd >= du
        assert (dd - du) % 2 == 0  # the grid is bipartite


def test_measured_detour_profile(small_net):
    """Largest directed-minus-undirected gap over all free pairs of the 14 x 29 map."""
    wmap = small_net.map
    free = small_net.free_indices
    from scipy.sparse.csgraph import shortest_path

    directed = shortest_path(small_net._graph, method="D", unweighted=True, indices=free)[:, free]
    undirected = shortest_path(wmap._graph, method="D", unweighted=True, indices=free)[:, free]
    assert np.isfinite(directed).all()
    assert int((directed - undirected).max()) == 8


def test_bin_target_uses_best_access_cell(small_net):
    wmap = small_net.map
    s = wmap.stations[3]
    for b in wmap.bins[:6]:
        best = min(directed_distance(small_net, s, a) for a in wmap.access_cells(b))
        assert directed_distance(small_net, s, b) == best + 1


def test_distance_tables_cover_goals(small_net):
    wmap = small_net.map
    goal = wmap.index(wmap.access_cells(wmap.bins[0])[0])
    table = small_net.distances_to(goal)
    assert table[goal] == 0
    assert (table[small_net.free_indices] >= 0).all()


def test_irregular_map_uses_dfs_fallback():
    wmap = load_map(IRREGULAR)
    net = orient(wmap)
    assert net.method == "dfs"
    assert not net.detour_bound_guaranteed
    assert nx.is_strongly_connected(_digraph(net))
    with pytest.raises(OrientationError):
        orient(wmap, "streets")


def test_dfs_orientation_also_works_on_block_maps(small_map):
    net = orient(small_map, "dfs")
    assert nx.is_strongly_connected(_digraph(net))


def test_unknown_method_rejected(tiny_map):
    with pytest.raises(InvalidConfigurationError):
        orient(tiny_map, "magic")


def test_diameter_matches_oracle(tiny_net):
    g = _digraph(tiny_net)
    lengths = dict(nx.all_pairs_shortest_path_length(g))
    assert tiny_net.diameter == max(max(d.values()) for d in lengths.values())
