"""Warehouse grid construction, validation, text I/O and undirected distances.

A generated warehouse is a grid of 3x3 blocks, each with a bin in its
center, surrounded by a one-cell border on which the pickup stations sit::

    rows = 3 * block_rows + 2
    cols = 3 * block_cols + 2

Bins are obstacles: robots never enter them.  The distance to a bin is one
more than the distance to its closest orthogonal non-bin neighbour (the
"access" cell a robot drops the parcel from).

Map text format (``save_map`` / ``load_map``)::

    <rows> <cols>
    <row 0: one character per cell>
    ...
    <row rows-1>

with ``.`` a free cell, ``B`` a bin and ``S`` a pickup station.  Bins and
stations are numbered row-major in both generated and loaded maps.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import InvalidConfigurationError, MapParseError

Coord = tuple[int, int]

#: Sentinel used inside integer distance tables for "no path".
UNREACHABLE = -1

# N, E, S, W as (drow, dcol); order is relied on by roadnet.
DIRECTIONS: tuple[Coord, ...] = ((-1, 0), (0, 1), (1, 0), (0, -1))


class CellKind(enum.IntEnum):
    FREE = 0
    BIN = 1
    STATION = 2


_CHAR_TO_KIND = {".": CellKind.FREE, "B": CellKind.BIN, "S": CellKind.STATION}
_KIND_TO_CHAR = {v: k for k, v in _CHAR_TO_KIND.items()}


def _bfs_table(graph: csr_matrix, sources: Sequence[int], directed: bool = False) -> np.ndarray:
    """Hop distances from each source to every node; UNREACHABLE where no path."""
    if len(sources) == 0:
        return np.zeros((0, graph.shape[0]), dtype=np.int32)
    d = shortest_path(graph, method="D", directed=directed, unweighted=True, indices=list(sources))
    d = np.atleast_2d(d)
    out = np.full(d.shape, UNREACHABLE, dtype=np.int32)
    finite = np.isfinite(d)
    out[finite] = d[finite].astype(np.int32)
    return out


def find_bridges(n_nodes: int, adjacency: Sequence[Sequence[int]]) -> list[tuple[int, int]]:
    """Return every bridge of an undirected simple graph (iterative Tarjan)."""
    disc = [-1] * n_nodes
    low = [0] * n_nodes
    bridges: list[tuple[int, int]] = []
    timer = 0
    for root in range(n_nodes):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adjacency[root]))]
        while stack:
            node, parent, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt == parent:
                    continue
                if disc[nxt] == -1:
                    disc[nxt] = low[nxt] = timer
                    timer += 1
                    stack.append((nxt, node, iter(adjacency[nxt])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nxt])
            if advanced:
                continue
            stack.pop()
            if parent != -1:
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    bridges.append((min(parent, node), max(parent, node)))
    return bridges


@dataclass(frozen=True, eq=False)
class WarehouseMap:
    """Immutable warehouse grid.

    Construct through :func:`generate_map` or :func:`load_map`; direct
    construction from a ``cells`` array validates the same invariants.
    Undirected distance tables from every station and every bin are built
    eagerly so that later reads never mutate the object.
    """

    cells: np.ndarray
    bins: tuple[Coord, ...] = field(init=False)
    stations: tuple[Coord, ...] = field(init=False)

    def __post_init__(self) -> None:
        cells = np.array(self.cells, dtype=np.int8, copy=True)
        if cells.ndim != 2 or cells.shape[0] < 3 or cells.shape[1] < 3:
            raise InvalidConfigurationError("map must be a 2-D grid of at least 3x3 cells")
        if not np.isin(cells, [k.value for k in CellKind]).all():
            raise InvalidConfigurationError("map contains unknown cell kinds")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "bins", tuple(map(tuple, np.argwhere(cells == CellKind.BIN).tolist())))
        object.__setattr__(self, "stations", tuple(map(tuple, np.argwhere(cells == CellKind.STATION).tolist())))
        self._validate()
        self._build_tables()

    # -- basic geometry -------------------------------------------------
    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    def index(self, cell: Coord) -> int:
        return cell[0] * self.cols + cell[1]

    def coord(self, index: int) -> Coord:
        return divmod(int(index), self.cols)

    def in_bounds(self, cell: Coord) -> bool:
        return 0 <= cell[0] < self.rows and 0 <= cell[1] < self.cols

    def kind(self, cell: Coord) -> CellKind:
        return CellKind(int(self.cells[cell]))

    def is_bin(self, cell: Coord) -> bool:
        return self.in_bounds(cell) and self.cells[cell] == CellKind.BIN

    def is_border(self, cell: Coord) -> bool:
        r, c = cell
        return r in (0, self.rows - 1) or c in (0, self.cols - 1)

    def neighbors(self, cell: Coord) -> list[Coord]:
        """Orthogonal in-bounds non-bin neighbours."""
        out = []
        for dr, dc in DIRECTIONS:
            nb = (cell[0] + dr, cell[1] + dc)
            if self.in_bounds(nb) and self.cells[nb] != CellKind.BIN:
                out.append(nb)
        return out

    def access_cells(self, bin_cell: Coord) -> list[Coord]:
        """Non-bin cells a robot may drop a parcel into ``bin_cell`` from."""
        return self.neighbors(bin_cell)

    def free_cells(self) -> list[Coord]:
        """All traversable cells (free and station), row-major."""
        return [tuple(rc) for rc in np.argwhere(self.cells != CellKind.BIN).tolist()]

    # -- validation -----------------------------------------------------
    def _validate(self) -> None:
        rows, cols = self.cells.shape
        border = np.zeros_like(self.cells, dtype=bool)
        border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
        bad = np.argwhere(border & (self.cells == CellKind.BIN))
        if len(bad):
            r, c = bad[0]
            raise InvalidConfigurationError(f"bin on the border at ({r}, {c})")
        bad = np.argwhere(~border & (self.cells == CellKind.STATION))
        if len(bad):
            r, c = bad[0]
            raise InvalidConfigurationError(f"station off the border at ({r}, {c})")
        if not self.bins:
            raise InvalidConfigurationError("map has no bins")
        if not self.stations:
            raise InvalidConfigurationError("map has no stations")
        for b in self.bins:
            if not self.neighbors(b):
                raise InvalidConfigurationError(f"bin {b} has no accessible neighbour")

        free = [tuple(rc) for rc in np.argwhere(self.cells != CellKind.BIN).tolist()]
        local = {cell: i for i, cell in enumerate(free)}
        adjacency = [[local[nb] for nb in self.neighbors(cell)] for cell in free]
        seen = {0}
        todo = [0]
        while todo:
            u = todo.pop()
            for v in adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        if len(seen) != len(free):
            raise InvalidConfigurationError("non-bin cells are not connected")
        bridges = find_bridges(len(free), adjacency)
        if bridges:
            a, b = bridges[0]
            raise InvalidConfigurationError(
                f"non-bin cells are not 2-edge-connected: bridge {free[a]}-{free[b]}"
            )

    # -- distances ------------------------------------------------------
    def _build_tables(self) -> None:
        n = self.rows * self.cols
        src, dst = [], []
        for cell in self.free_cells():
            u = self.index(cell)
            for nb in self.neighbors(cell):
                src.append(u)
                dst.append(self.index(nb))
        graph = csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
        object.__setattr__(self, "_graph", graph)
        station_idx = [self.index(s) for s in self.stations]
        object.__setattr__(self, "_station_dist", _bfs_table(graph, station_idx))
        access = sorted({self.index(a) for b in self.bins for a in self.access_cells(b)})
        table = _bfs_table(graph, access)
        row_of = {u: i for i, u in enumerate(access)}
        bin_dist = np.empty((self.n_bins, n), dtype=np.int32)
        for i, b in enumerate(self.bins):
            rows_ = table[[row_of[self.index(a)] for a in self.access_cells(b)]]
            rows_ = np.where(rows_ == UNREACHABLE, np.iinfo(np.int32).max, rows_)
            best = rows_.min(axis=0)
            bin_dist[i] = np.where(best == np.iinfo(np.int32).max, UNREACHABLE, best + 1)
            bin_dist[i, self.index(b)] = 0
        object.__setattr__(self, "_bin_dist", bin_dist)
        object.__setattr__(self, "_bin_number", {b: i for i, b in enumerate(self.bins)})
        object.__setattr__(self, "_station_number", {s: i for i, s in enumerate(self.stations)})

    def distances_from(self, cell: Coord) -> np.ndarray:
        """Undirected distances from ``cell`` to every cell as a ``rows x cols`` array.

        Bin entries hold the access-adjusted distance; UNREACHABLE marks
        cells with no path.
        """
        if cell in self._station_number:
            flat = self._station_dist[self._station_number[cell]]
        elif cell in self._bin_number:
            flat = self._bin_dist[self._bin_number[cell]]
        else:
            flat = _bfs_table(self._graph, [self.index(cell)])[0]
        flat = flat.copy()
        # bin targets: 1 + best access neighbour
        for b in self.bins:
            if b == cell:
                continue
            vals = [flat[self.index(a)] for a in self.access_cells(b)]
            vals = [v for v in vals if v != UNREACHABLE]
            flat[self.index(b)] = min(vals) + 1 if vals else UNREACHABLE
        return flat.reshape(self.rows, self.cols)

    def station_bin_distances(self) -> np.ndarray:
        """``n_stations x n_bins`` matrix of dist(p_k, b_i)."""
        return self._bin_dist[:, [self.index(s) for s in self.stations]].T.copy()


def undirected_distance(wmap: WarehouseMap, source: Coord, target: Coord) -> int | None:
    """Shortest 4-connected path length over non-bin cells; ``None`` if unreachable."""
    for cell in (source, target):
        if not wmap.in_bounds(cell):
            raise InvalidConfigurationError(f"cell {cell} is outside the map")
    if source == target:
        return 0
    # prefer an eagerly built table; the metric is symmetric
    if target in wmap._station_number or target in wmap._bin_number:
        source, target = target, source
    d = int(wmap.distances_from(source)[target])
    return None if d == UNREACHABLE else d


# -- generation ----------------------------------------------------------

def perimeter(rows: int, cols: int) -> list[Coord]:
    """Border cells clockwise from the top-left corner."""
    ring = [(0, c) for c in range(cols)]
    ring += [(r, cols - 1) for r in range(1, rows)]
    ring += [(rows - 1, c) for c in range(cols - 2, -1, -1)]
    ring += [(r, 0) for r in range(rows - 2, 0, -1)]
    return ring


def even_station_offsets(rows: int, cols: int, count: int) -> list[int]:
    """Perimeter offsets of ``count`` stations spread evenly, never on a corner."""
    ring = perimeter(rows, cols)
    corners = {(0, 0), (0, cols - 1), (rows - 1, 0), (rows - 1, cols - 1)}
    candidates = [i for i, cell in enumerate(ring) if cell not in corners]
    if not 1 <= count <= len(candidates):
        raise InvalidConfigurationError(
            f"station count must be in [1, {len(candidates)}] for a {rows}x{cols} map, got {count}"
        )
    step = len(candidates) / count
    return [candidates[int((i + 0.5) * step)] for i in range(count)]


def generate_map(block_rows: int, block_cols: int, stations: int | Iterable[int] = 12) -> WarehouseMap:
    """Build the block warehouse.

    ``stations`` is either a count (spread evenly along the border, corners
    skipped) or explicit offsets into the clockwise perimeter walk starting
    at ``(0, 0)``.
    """
    if block_rows < 1 or block_cols < 1:
        raise InvalidConfigurationError("block counts must be >= 1")
    rows, cols = 3 * block_rows + 2, 3 * block_cols + 2
    ring = perimeter(rows, cols)
    if isinstance(stations, (int, np.integer)):
        offsets = even_station_offsets(rows, cols, int(stations))
    else:
        offsets = [int(o) for o in stations]
        if not offsets:
            raise InvalidConfigurationError("at least one station is required")
        if len(set(offsets)) != len(offsets):
            raise InvalidConfigurationError("duplicated station position")
        for o in offsets:
            if not 0 <= o < len(ring):
                raise InvalidConfigurationError(
                    f"station offset {o} is off the border (perimeter has {len(ring)} cells)"
                )
    cells = np.zeros((rows, cols), dtype=np.int8)
    cells[2::3, 2::3][:block_rows, :block_cols] = CellKind.BIN
    for o in offsets:
        cells[ring[o]] = CellKind.STATION
    return WarehouseMap(cells)


# -- text format -----------------------------------------------------------

def save_map(wmap: WarehouseMap) -> str:
    lines = [f"{wmap.rows} {wmap.cols}"]
    for row in wmap.cells:
        lines.append("".join(_KIND_TO_CHAR[CellKind(int(v))] for v in row))
    return "\n".join(lines) + "\n"


def load_map(text: str) -> WarehouseMap:
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MapParseError("empty map text", line=1)
    header = lines[0].split()
    if len(header) != 2 or not all(h.isdigit() for h in header):
        raise MapParseError("header must be '<rows> <cols>'", line=1)
    rows, cols = int(header[0]), int(header[1])
    body = [ln.rstrip() for ln in lines[1:]]
    if len(body) != rows:
        raise MapParseError(f"expected {rows} grid rows, found {len(body)}", line=len(lines) + 1)
    cells = np.zeros((rows, cols), dtype=np.int8)
    for r, ln in enumerate(body):
        if len(ln) != cols:
            raise MapParseError(f"expected {cols} cells, found {len(ln)}", line=r + 2)
        for c, ch in enumerate(ln):
            if ch not in _CHAR_TO_KIND:
                raise MapParseError(f"unknown cell character {ch!r}", line=r + 2, column=c + 1)
            cells[r, c] = _CHAR_TO_KIND[ch]
    for r in range(rows):
        for c in range(cols):
            border = r in (0, rows - 1) or c in (0, cols - 1)
            if border and cells[r, c] == CellKind.BIN:
                raise MapParseError("bin on the border", line=r + 2, column=c + 1)
            if not border and cells[r, c] == CellKind.STATION:
                raise MapParseError("station off the border", line=r + 2, column=c + 1)
    try:
        return WarehouseMap(cells)
    except MapParseError:
        raise
    except InvalidConfigurationError as exc:
        raise MapParseError(str(exc)) from exc


def block_shape(wmap: WarehouseMap) -> tuple[int, int] | None:
    """``(block_rows, block_cols)`` if ``wmap`` follows the block construction."""
    if (wmap.rows - 2) % 3 or (wmap.cols - 2) % 3:
        return None
    a, b = (wmap.rows - 2) // 3, (wmap.cols - 2) // 3
    expected = np.zeros_like(wmap.cells, dtype=bool)
    expected[2::3, 2::3][:a, :b] = True
    if not np.array_equal(expected, wmap.cells == CellKind.BIN):
        return None
    return a, b


# -- parcel type distribution --------------------------------------------

@dataclass(frozen=True, eq=False)
class TypeDistribution:
    """Station x type arrival probabilities ``m[k, j]``."""

    m: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.m, dtype=float, copy=True)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise InvalidConfigurationError("distribution must be a non-empty n_p x n_c matrix")
        if not np.isfinite(m).all() or (m < 0).any() or (m > 1).any():
            raise InvalidConfigurationError("probabilities must lie in [0, 1]")
        sums = m.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-9)
        if len(bad):
            raise InvalidConfigurationError(f"row {bad[0]} sums to {sums[bad[0]]!r}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def n_stations(self) -> int:
        return self.m.shape[0]

    @property
    def n_types(self) -> int:
        return self.m.shape[1]

    def check_against(self, wmap: WarehouseMap) -> None:
        if self.n_stations != wmap.n_stations:
            raise InvalidConfigurationError(
                f"distribution has {self.n_stations} rows but the map has {wmap.n_stations} stations"
            )
        if self.n_types > wmap.n_bins:
            raise InvalidConfigurationError(
                f"{self.n_types} parcel types exceed the {wmap.n_bins} bins"
            )

    @classmethod
    def dirichlet(cls, n_stations: int, n_types: int, rng: np.random.Generator) -> "TypeDistribution":
        """Rows drawn uniformly from the probability simplex (Dirichlet(1))."""
        m = rng.dirichlet(np.ones(n_types), size=n_stations)
        m /= m.sum(axis=1, keepdims=True)
        return cls(m)

    def to_text(self) -> str:
        return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in self.m)

    @classmethod
    def from_text(cls, text: str) -> "TypeDistribution":
        rows = []
        for ln, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].replace(",", " ").strip()
            if not line:
                continue
            try:
                rows.append([float(x) for x in line.split()])
            except ValueError as exc:
                raise InvalidConfigurationError(f"line {ln}: {exc}") from exc
        if not rows or len({len(r) for r in rows}) != 1:
            raise InvalidConfigurationError("distribution rows must be non-empty and equally long")
        return cls(np.array(rows))
