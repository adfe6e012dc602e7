"""Prioritized recursive yielding on a directed road network.

Every timestep each robot holding a path either advances one vertex or
waits.  Decisions follow the recursive rule: a robot may move when the
robot ahead of it moves (or the vertex is empty) and it wins any contest for
the vertex it wants.  Fully occupied directed cycles rotate together.

Cells are handled as flat indices (``row * cols + col``) throughout; use
``net.map.coord`` to turn them back into coordinates.

Decision code reads the world only through :class:`LocalView` (the 3x3
block around the deciding robot) and :class:`MessageChannel` (claims on
vertices and the cycle-detection token).  Both are built fresh each step.
"""

from __future__ import annotations

import enum
import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigurationError, PlanningError
from .roadnet import RoadNetwork


class Mark(enum.IntEnum):
    UNMARKED = 0
    MOVE = 1
    WAIT = 2


class PathMode(enum.Enum):
    PLAIN = "plain"
    DIVERSIFIED = "diversified"
    FOCAL = "focal"


# CLI planner names -> initial path mode
PLANNERS = {
    "pry": PathMode.PLAIN,
    "epry-random": PathMode.DIVERSIFIED,
    "epry-focal": PathMode.FOCAL,
}


@dataclass
class RobotState:
    id: int
    position: int
    goal: int | None = None
    carried: int | None = None  # parcel type, None when empty
    path: deque = field(default_factory=deque)
    decision: Mark = Mark.UNMARKED

    @property
    def has_undelivered(self) -> bool:
        return self.carried is not None


@dataclass
class StepOutcome:
    moves: dict[int, int]  # robot id -> cell entered
    waits: set[int]
    cycles_detected: int = 0
    conflicts_resolved: int = 0
    messages: int = 0
    replans: int = 0


class MessageChannel:
    """Messages robots exchange during one step.

    A robot with a path broadcasts a claim on its next vertex to the robots
    around that vertex, and cycle detection forwards a token from robot to
    robot along next-vertex links.  ``sent`` counts every message.
    """

    def __init__(self, robots: list[RobotState]) -> None:
        self._claims: dict[int, list[RobotState]] = {}
        self.sent = 0
        for r in robots:
            if r.path:
                self._claims.setdefault(r.path[0], []).append(r)
                self.sent += 1

    def claimants(self, vertex: int) -> list[RobotState]:
        return self._claims.get(vertex, [])

    def forward(self) -> None:
        self.sent += 1


class LocalView:
    """Occupancy restricted to the 3x3 block around one robot."""

    def __init__(self, occupancy: dict[int, RobotState], cols: int) -> None:
        self._occ = occupancy
        self._cols = cols
        self.center = -1

    def occupant(self, cell: int) -> RobotState | None:
        cr, cc = divmod(self.center, self._cols)
        r, c = divmod(cell, self._cols)
        if abs(r - cr) > 1 or abs(c - cc) > 1:
            raise PlanningError(f"cell {cell} is outside the 3x3 view of cell {self.center}")
        return self._occ.get(cell)


def resolve_priority(a: RobotState, b: RobotState, rng: np.random.Generator) -> RobotState:
    """Winner of a contest for one vertex.

    A robot still carrying its parcel beats an empty one; then the longer
    remaining path wins; a full tie is a fair coin flip.
    """
    if a.has_undelivered != b.has_undelivered:
        return a if a.has_undelivered else b
    if len(a.path) != len(b.path):
        return a if len(a.path) > len(b.path) else b
    return a if rng.random() < 0.5 else b


def detect_cycle(robot: RobotState, occupancy: dict[int, RobotState], channel: MessageChannel | None = None) -> bool:
    """Forward a token along next-vertex occupants; True if it comes back.

    Every robot on the way must itself intend to move.  The walk visits each
    robot at most once, so it ends within ``len(occupancy)`` hops.
    """
    if not robot.path:
        return False
    seen = {robot.id}
    cur = robot
    while True:
        nxt = occupancy.get(cur.path[0])
        if channel is not None:
            channel.forward()
        if nxt is None or not nxt.path:
            return False
        if nxt is robot:
            return True
        if nxt.id in seen:
            return False  # ran into a cycle that excludes the sender
        seen.add(nxt.id)
        cur = nxt


class Planner:
    """Initial-path planning plus the per-step yielding protocol."""

    def __init__(self, net: RoadNetwork, mode: PathMode | str = PathMode.PLAIN, focal_w: float = 1.5, seed=0) -> None:
        if isinstance(mode, str):
            if mode in PLANNERS:
                mode = PLANNERS[mode]
            else:
                try:
                    mode = PathMode(mode)
                except ValueError:
                    raise InvalidConfigurationError(
                        f"unknown planner {mode!r}; choose from {', '.join(PLANNERS)}"
                    ) from None
        if focal_w < 1:
            raise InvalidConfigurationError("focal bound w must be >= 1")
        self.net = net
        self.mode = mode
        self.focal_w = focal_w
        self.rng = np.random.default_rng(seed)
        self.time = 0
        self._cols = net.map.cols
        self._counts: dict[int, np.ndarray] = {}
        edges = np.array(sorted(net.edges.values()), dtype=np.int64).reshape(-1, 2)
        self._src, self._dst = edges[:, 0], edges[:, 1]
        # focal mode: announced (cell, absolute time) reservations of every robot
        self._announced: dict[tuple[int, int], int] = {}
        self._announced_by: dict[int, list[tuple[int, int]]] = {}

    # -- initial paths ----------------------------------------------------
    def plan(self, robot: RobotState) -> deque:
        """Path from the robot's position to its goal (start excluded)."""
        if robot.goal is None or robot.goal == robot.position:
            return deque()
        dist = self.net.distances_to(robot.goal)
        if dist[robot.position] < 0:
            raise PlanningError(f"goal {robot.goal} unreachable from {robot.position}")
        if self.mode is PathMode.PLAIN:
            path = self._plain(robot.position, dist)
        elif self.mode is PathMode.DIVERSIFIED:
            path = self._diversified(robot.position, robot.goal, dist)
        else:
            path = self._focal(robot, dist)
        return deque(path)

    def _plain(self, start: int, dist: np.ndarray) -> list[int]:
        path = []
        u = start
        while dist[u] > 0:
            # successors are stored in ascending index order = (row, col) order
            u = next(v for v in self.net.succ[u] if dist[v] == dist[u] - 1)
            path.append(u)
        return path

    def path_counts(self, goal: int) -> np.ndarray:
        """Number of shortest paths from every cell to ``goal`` (float64)."""
        counts = self._counts.get(goal)
        if counts is not None:
            return counts
        dist = self.net.distances_to(goal).astype(np.int64)
        src, dst = self._src, self._dst
        tight = (dist[src] > 0) & (dist[dst] == dist[src] - 1)
        src, dst = src[tight], dst[tight]
        layer = dist[src]
        order = np.argsort(layer, kind="stable")
        src, dst, layer = src[order], dst[order], layer[order]
        bounds = np.searchsorted(layer, np.arange(1, int(layer.max(initial=0)) + 2))
        counts = np.zeros(len(dist))
        counts[goal] = 1.0
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            np.add.at(counts, src[lo:hi], counts[dst[lo:hi]])
        self._counts[goal] = counts
        return counts

    def _diversified(self, start: int, goal: int, dist: np.ndarray) -> list[int]:
        """Uniformly random shortest path: step to each successor in proportion to its path count."""
        counts = self.path_counts(goal)
        path = []
        u = start
        while dist[u] > 0:
            nxt = [v for v in self.net.succ[u] if dist[v] == dist[u] - 1]
            if len(nxt) > 1:
                weights = np.array([counts[v] for v in nxt])
                pick = self.rng.random() * weights.sum()
                u = nxt[min(int(np.searchsorted(np.cumsum(weights), pick, side="right")), len(nxt) - 1)]
            else:
                u = nxt[0]
            path.append(u)
        return path

    def _focal(self, robot: RobotState, dist: np.ndarray) -> list[int]:
        """Fewest announced conflicts among paths no longer than ``w`` times the shortest."""
        start, goal = robot.position, robot.goal
        limit = math.floor(self.focal_w * int(dist[start]) + 1e-9)
        announced = self._announced
        t0 = self.time
        succ = self.net.succ
        best = {(start, 0): 0}
        parent: dict[tuple[int, int], tuple[int, int] | None] = {(start, 0): None}
        closed = set()
        heap = [(0, int(dist[start]), 0, start)]
        while heap:
            conf, _, neg_g, u = heapq.heappop(heap)
            g = -neg_g
            state = (u, g)
            if state in closed:
                continue
            closed.add(state)
            if u == goal:
                path = []
                while state is not None and state[1] > 0:
                    path.append(state[0])
                    state = parent[state]
                return path[::-1]
            g2 = g + 1
            for v in succ[u]:
                h = int(dist[v])
                if h < 0 or g2 + h > limit:
                    continue
                c2 = conf + announced.get((v, t0 + g2), 0)
                key = (v, g2)
                if c2 < best.get(key, 1 << 60):
                    best[key] = c2
                    parent[key] = state
                    heapq.heappush(heap, (c2, g2 + h, -g2, v))
        raise PlanningError(f"focal search found no path from {start} to {goal}")

    def _announce(self, robot: RobotState) -> None:
        for key in self._announced_by.pop(robot.id, ()):
            left = self._announced[key] - 1
            if left:
                self._announced[key] = left
            else:
                del self._announced[key]
        keys = [(v, self.time + i + 1) for i, v in enumerate(robot.path)]
        for key in keys:
            self._announced[key] = self._announced.get(key, 0) + 1
        self._announced_by[robot.id] = keys

    # -- one timestep -------------------------------------------------------
    def step(self, robots: list[RobotState]) -> StepOutcome:
        """Decide and apply one synchronous move for every robot."""
        replans = 0
        for r in robots:
            r.decision = Mark.UNMARKED
            if not r.path and r.goal is not None and r.goal != r.position:
                r.path = self.plan(r)
                replans += 1
                if self.mode is PathMode.FOCAL:
                    self._announce(r)
        ctx = StepContext(self, robots)
        ctx.run()
        moves = {}
        waits = set()
        for r in robots:
            if r.decision is Mark.MOVE:
                r.position = r.path.popleft()
                moves[r.id] = r.position
            else:
                waits.add(r.id)
        self.time += 1
        return StepOutcome(moves, waits, ctx.cycles, ctx.conflicts, ctx.channel.sent, replans)

    def forget(self, robot: RobotState) -> None:
        """Drop a robot's announced path (focal mode bookkeeping)."""
        if self.mode is PathMode.FOCAL:
            robot.path = deque()
            self._announce(robot)


class StepContext:
    """State of one timestep's decision round."""

    def __init__(self, planner: Planner, robots: list[RobotState]) -> None:
        self.planner = planner
        self.robots = robots
        self.occupancy = {r.position: r for r in robots}
        if len(self.occupancy) != len(robots):
            raise PlanningError("two robots share a cell at step start")
        self.channel = MessageChannel(robots)
        self.view = LocalView(self.occupancy, planner._cols)
        self.cycles = 0
        self.conflicts = 0
        self.max_depth = 0

    def run(self) -> None:
        # cycle detection once, at step start; members rotate together
        for r in self.robots:
            if r.decision is Mark.UNMARKED and r.path and detect_cycle(r, self.occupancy, self.channel):
                self.cycles += 1
                cur = r
                while True:
                    cur.decision = Mark.MOVE
                    cur = self.occupancy[cur.path[0]]
                    if cur is r:
                        break
        for r in self.robots:
            self.recursive_move(r)

    def recursive_move(self, robot: RobotState) -> Mark:
        """Mark ``robot`` and, first, every robot it is queued behind.

        The recursion on the occupant of the next vertex is unrolled into a
        chain so long queues cannot hit Python's recursion limit.
        """
        chain = []
        cur = robot
        while cur.decision is Mark.UNMARKED:
            if not cur.path:
                cur.decision = Mark.WAIT
                break
            chain.append(cur)
            self.view.center = cur.position
            nxt = self.view.occupant(cur.path[0])
            if nxt is None:
                break
            if nxt in chain:
                raise PlanningError("undetected robot cycle")  # cycles are pre-marked
            cur = nxt
        self.max_depth = max(self.max_depth, len(chain))
        for r in reversed(chain):
            if r.decision is Mark.UNMARKED:
                self._decide(r)
        return robot.decision

    def _decide(self, r: RobotState) -> None:
        target = r.path[0]
        self.view.center = r.position
        occ = self.view.occupant(target)
        if occ is not None and occ.decision is not Mark.MOVE:
            r.decision = Mark.WAIT
            return
        rivals = [k for k in self.channel.claimants(target) if k is not r]
        if any(k.decision is Mark.MOVE for k in rivals):
            r.decision = Mark.WAIT
            return
        contenders = [k for k in rivals if k.decision is Mark.UNMARKED]
        if not contenders:
            r.decision = Mark.MOVE
            return
        # street maps admit at most two claimants per vertex; more are ranked pairwise in id order
        winner = r
        for k in sorted(contenders, key=lambda x: x.id):
            self.conflicts += 1
            winner = resolve_priority(winner, k, self.planner.rng)
        for k in [r, *contenders]:
            k.decision = Mark.MOVE if k is winner else Mark.WAIT
