"""Directed road network over a warehouse map.

Every free row between bin rows (plus the border rows) is a one-way
horizontal street and every free column is a one-way vertical street.
Streets alternate direction by street index, starting with the top border
heading east and the left border heading north, so the outer ring
circulates clockwise.  The remaining free-free adjacencies (the short rungs
beside each bin) are oriented east in bin rows and south in bin columns.

Maps that do not follow the block construction fall back to a depth-first
search orientation, which is strongly connected on any 2-edge-connected
map but carries no detour guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidConfigurationError, OrientationError
from .gridworld import UNREACHABLE, CellKind, Coord, WarehouseMap, _bfs_table, block_shape

_DIR_NAMES = {(-1, 0): "N", (0, 1): "E", (1, 0): "S", (0, -1): "W"}


def street_directions(wmap: WarehouseMap) -> dict[tuple[int, int], tuple[int, int]]:
    """Edge orientation of a block map as ``{(u, v): (u, v)}`` keyed by sorted cell indices."""
    rows, cols = wmap.rows, wmap.cols
    free_rows = [r for r in range(rows) if r % 3 != 2]
    free_cols = [c for c in range(cols) if c % 3 != 2]
    row_step = {r: (1 if i % 2 == 0 else -1) for i, r in enumerate(free_rows)}  # +1 east
    col_step = {c: (-1 if i % 2 == 0 else 1) for i, c in enumerate(free_cols)}  # -1 north
    idx = wmap.index
    oriented: dict[tuple[int, int], tuple[int, int]] = {}

    def put(a: Coord, b: Coord) -> None:
        u, v = idx(a), idx(b)
        key = (min(u, v), max(u, v))
        assert key not in oriented, f"edge {a}-{b} oriented twice"
        oriented[key] = (u, v)

    for r in range(rows):
        for c in range(cols):
            if wmap.cells[r, c] == CellKind.BIN:
                continue
            if r in row_step and 0 <= c + row_step[r] < cols:
                put((r, c), (r, c + row_step[r]))
            if c in col_step and 0 <= r + col_step[c] < rows:
                put((r, c), (r + col_step[c], c))
    # rungs beside the bins
    for r in range(2, rows - 1, 3):
        for c in range(0, cols - 1, 3):
            put((r, c), (r, c + 1))
    for c in range(2, cols - 1, 3):
        for r in range(0, rows - 1, 3):
            put((r, c), (r + 1, c))
    return oriented


def dfs_orientation(wmap: WarehouseMap) -> dict[tuple[int, int], tuple[int, int]]:
    """Robbins orientation: tree edges away from the root, back edges toward it."""
    free = wmap.free_cells()
    idx = wmap.index
    order = {}
    oriented: dict[tuple[int, int], tuple[int, int]] = {}
    root = free[0]
    order[root] = 0
    stack = [(root, iter(wmap.neighbors(root)))]
    while stack:
        cell, it = stack[-1]
        for nb in it:
            key = (min(idx(cell), idx(nb)), max(idx(cell), idx(nb)))
            if key in oriented:
                continue
            if nb not in order:
                order[nb] = len(order)
                oriented[key] = (idx(cell), idx(nb))
                stack.append((nb, iter(wmap.neighbors(nb))))
                break
            # back edge: descendant -> ancestor
            oriented[key] = (idx(cell), idx(nb))
        else:
            stack.pop()
    return oriented


@dataclass(frozen=True, eq=False)
class RoadNetwork:
    """Oriented traversable graph plus distance-to-goal tables.

    ``succ[u]`` lists the cell indices reachable from cell index ``u`` in one
    move.  Tables of distances *to* every station and every bin access cell
    are built at construction.
    """

    map: WarehouseMap
    edges: dict[tuple[int, int], tuple[int, int]] = field(repr=False)
    method: str = "streets"

    def __post_init__(self) -> None:
        n = self.map.rows * self.map.cols
        succ: list[list[int]] = [[] for _ in range(n)]
        pred: list[list[int]] = [[] for _ in range(n)]
        for u, v in sorted(self.edges.values()):
            succ[u].append(v)
            pred[v].append(u)
        object.__setattr__(self, "succ", tuple(tuple(s) for s in succ))
        object.__setattr__(self, "pred", tuple(tuple(p) for p in pred))
        src, dst = zip(*self.edges.values()) if self.edges else ((), ())
        graph = csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
        object.__setattr__(self, "_graph", graph)
        free_idx = np.array([self.map.index(c) for c in self.map.free_cells()])
        object.__setattr__(self, "free_indices", free_idx)
        sub = graph[free_idx][:, free_idx]
        n_comp, _ = connected_components(sub, directed=True, connection="strong")
        if n_comp != 1:
            raise OrientationError(f"orientation has {n_comp} strongly connected components")
        goals = sorted(
            {self.map.index(s) for s in self.map.stations}
            | {self.map.index(a) for b in self.map.bins for a in self.map.access_cells(b)}
        )
        # distances *to* each goal = BFS on the reversed graph
        table = _bfs_table(graph.T.tocsr(), goals, directed=True).astype(np.int16)
        table.setflags(write=False)
        object.__setattr__(self, "_to_table", table)
        object.__setattr__(self, "_to_row", {g: i for i, g in enumerate(goals)})

    @property
    def detour_bound_guaranteed(self) -> bool:
        return self.method == "streets"

    # -- queries ---------------------------------------------------------
    def allowed_moves(self, cell: Coord) -> set[str]:
        u = self.map.index(cell)
        out = set()
        for v in self.succ[u]:
            r, c = self.map.coord(v)
            out.add(_DIR_NAMES[(r - cell[0], c - cell[1])])
        return out

    def has_edge(self, a: Coord, b: Coord) -> bool:
        return self.map.index(b) in self.succ[self.map.index(a)]

    def distances_to(self, goal: int) -> np.ndarray:
        """Flat array of directed distances from every cell index to cell index ``goal``."""
        row = self._to_row.get(goal)
        if row is not None:
            return self._to_table[row]
        return _bfs_table(self._graph.T.tocsr(), [goal], directed=True)[0]

    def distances_from(self, source: int) -> np.ndarray:
        return _bfs_table(self._graph, [source], directed=True)[0]

    def cell_distance(self, u: int, v: int) -> int:
        """Directed hop count between two cell indices (UNREACHABLE if none)."""
        if u == v:
            return 0
        if v in self._to_row:
            return int(self._to_table[self._to_row[v]][u])
        return int(self.distances_from(u)[v])

    @cached_property
    def diameter(self) -> int:
        """Largest finite directed distance between traversable cells."""
        d = _bfs_table(self._graph, list(self.free_indices), directed=True)[:, self.free_indices]
        return int(d.max())

    def dump(self) -> str:
        """Arrow picture of the network.

        Cells print as ``.``/``B``/``S``; the gaps between them hold ``>``/``<``
        for horizontal edges and ``v``/``^`` for vertical ones.
        """
        wmap = self.map
        chars = {CellKind.FREE: ".", CellKind.BIN: "B", CellKind.STATION: "S"}
        lines = []
        for r in range(wmap.rows):
            line = []
            for c in range(wmap.cols):
                line.append(chars[wmap.kind((r, c))])
                if c + 1 < wmap.cols:
                    u, v = wmap.index((r, c)), wmap.index((r, c + 1))
                    line.append(">" if v in self.succ[u] else "<" if u in self.succ[v] else " ")
            lines.append("".join(line))
            if r + 1 < wmap.rows:
                gap = []
                for c in range(wmap.cols):
                    u, v = wmap.index((r, c)), wmap.index((r + 1, c))
                    gap.append("v" if v in self.succ[u] else "^" if u in self.succ[v] else " ")
                    if c + 1 < wmap.cols:
                        gap.append(" ")
                lines.append("".join(gap).rstrip())
        return "\n".join(lines) + "\n"


def orient(wmap: WarehouseMap, method: str = "auto") -> RoadNetwork:
    """Orient ``wmap`` into a strongly connected road network.

    ``method`` is ``"streets"``, ``"dfs"`` or ``"auto"`` (streets for block
    maps, depth-first search otherwise).
    """
    if method not in ("auto", "streets", "dfs"):
        raise InvalidConfigurationError(f"unknown orientation method {method!r}")
    if method == "auto":
        method = "streets" if block_shape(wmap) is not None else "dfs"
    if method == "streets":
        if block_shape(wmap) is None:
            raise OrientationError("street orientation needs a block-construction map")
        return RoadNetwork(wmap, street_directions(wmap), "streets")
    return RoadNetwork(wmap, dfs_orientation(wmap), "dfs")


def directed_distance(net: RoadNetwork, source: Coord, target: Coord) -> int | None:
    """Shortest directed path length; a bin target costs 1 + its best access cell.

    ``None`` signals unreachable, which on a valid network is an invariant
    failure rather than an expected outcome.
    """
    wmap = net.map
    for cell in (source, target):
        if not wmap.in_bounds(cell):
            raise InvalidConfigurationError(f"cell {cell} is outside the map")
    if wmap.is_bin(source):
        raise InvalidConfigurationError(f"source {source} is a bin")
    u = wmap.index(source)
    if wmap.is_bin(target):
        vals = [net.cell_distance(u, wmap.index(a)) for a in wmap.access_cells(target)]
        vals = [v for v in vals if v != UNREACHABLE]
        return min(vals) + 1 if vals else None
    d = net.cell_distance(u, wmap.index(target))
    return None if d == UNREACHABLE else d
