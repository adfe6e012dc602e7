"""Lifelong parcel-sorting loop.

Robots shuttle between stations and bins.  An empty robot standing on a
station loads a parcel whose type is drawn from that station's row of the
type distribution, then heads for the nearest bin of that type; after the
drop it heads for the nearest station.  Loading and dropping take no time.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .assignment import BinAssignment
from .errors import DeadlockError, InvalidConfigurationError, PlanningError
from .gridworld import TypeDistribution, WarehouseMap
from .planner import PLANNERS, Planner, RobotState
from .roadnet import RoadNetwork, orient


@dataclass
class SimConfig:
    map: WarehouseMap
    distribution: TypeDistribution
    assignment: BinAssignment
    n_robots: int
    horizon: int
    planner: str = "epry-random"
    focal_w: float = 1.5
    parcel_seed: int = 0
    planner_seed: int = 1
    start_seed: int = 2
    warmup: int = 0
    age_factor: float = 10.0  # liveness bound = age_factor x directed diameter
    record_trace: bool = False
    net: RoadNetwork | None = None  # reuse a prebuilt network

    def validate(self) -> None:
        free = len(self.map.free_cells())
        if not 1 <= self.n_robots < free:
            raise InvalidConfigurationError(f"robot count must lie in [1, {free - 1}], got {self.n_robots}")
        if self.horizon < 0 or not 0 <= self.warmup <= self.horizon:
            raise InvalidConfigurationError("need horizon >= 0 and 0 <= warmup <= horizon")
        if self.planner not in PLANNERS:
            raise InvalidConfigurationError(f"unknown planner {self.planner!r}; choose from {', '.join(PLANNERS)}")
        self.distribution.check_against(self.map)
        if len(self.assignment) != self.map.n_bins:
            raise InvalidConfigurationError(
                f"assignment covers {len(self.assignment)} bins, map has {self.map.n_bins}"
            )
        if self.assignment.n_types != self.distribution.n_types:
            raise InvalidConfigurationError(
                f"assignment has {self.assignment.n_types} types, distribution {self.distribution.n_types}"
            )
        if self.net is not None and self.net.map is not self.map:
            raise InvalidConfigurationError("road network was built for a different map")


@dataclass
class Metrics:
    deliveries: int
    measured_steps: int
    throughput: float
    per_type: list[int]
    mean_task_distance: float  # mean steps per completed station-to-station cycle
    mean_step_ms: float
    max_step_ms: float
    waits: int
    conflicts: int
    cycles: int
    messages: int
    replans: int
    max_task_age: int
    age_limit: int
    meet_violations: int = 0
    swap_violations: int = 0
    bin_violations: int = 0
    trace: list[tuple[int, int, int, int, int | None]] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "trace"}


def sample_parcel(station: int, distribution: TypeDistribution, rng: np.random.Generator) -> int:
    """Draw a 0-based parcel type from the station's row."""
    row = distribution.m[station]
    u = rng.random()
    j = int(np.searchsorted(np.cumsum(row), u * row.sum(), side="right"))
    return min(j, len(row) - 1)


def nearest_goal(position: int, candidates, net: RoadNetwork) -> int:
    """Candidate cell index with the smallest directed distance; ties go to the smaller (row, col)."""
    best = None
    for c in sorted(candidates):
        d = int(net.distances_to(c)[position])
        if d < 0:
            continue
        if best is None or d < best[0]:
            best = (d, c)
    if best is None:
        raise PlanningError(f"no candidate goal reachable from cell {position}")
    return best[1]


class Simulation:
    """One run; call :meth:`run` once."""

    def __init__(self, config: SimConfig) -> None:
        config.validate()
        self.config = config
        wmap = config.map
        self.net = config.net or orient(wmap)
        self.planner = Planner(self.net, config.planner, config.focal_w, config.planner_seed)
        self.parcel_rng = np.random.default_rng(config.parcel_seed)
        m = config.distribution.m
        if ((m == 1.0).sum(axis=1) == 1).any():
            warnings.warn(
                "a station always emits the same parcel type; deadlock freedom relies on random tasks",
                RuntimeWarning,
                stacklevel=2,
            )
        self.station_cells = [wmap.index(s) for s in wmap.stations]
        self.station_of = {c: k for k, c in enumerate(self.station_cells)}
        self.bin_cells = [wmap.index(b) for b in wmap.bins]
        # access cell -> bin number, per type
        self.access_by_type: list[dict[int, int]] = [dict() for _ in range(config.assignment.n_types)]
        for i, b in enumerate(wmap.bins):
            t = int(config.assignment.types[i])
            for a in wmap.access_cells(b):
                self.access_by_type[t].setdefault(wmap.index(a), i)
        self._goal_cache: dict[tuple[int, int], int] = {}
        self.robots: list[RobotState] = []
        self.target_bin: dict[int, int] = {}
        self.goal_time: dict[int, int] = {}
        self.cycle_start: dict[int, int] = {}

    # -- goal issuance ----------------------------------------------------------
    def _bin_goal(self, position: int, t: int) -> int:
        key = (position, t)
        goal = self._goal_cache.get(key)
        if goal is None:
            goal = nearest_goal(position, self.access_by_type[t], self.net)
            self._goal_cache[key] = goal
        return goal

    def _station_goal(self, position: int) -> int:
        key = (position, -1)
        goal = self._goal_cache.get(key)
        if goal is None:
            goal = nearest_goal(position, self.station_cells, self.net)
            self._goal_cache[key] = goal
        return goal

    def _events(self, robot: RobotState, now: int, counting: bool, metrics: dict) -> None:
        """Drop and load at the robot's cell; both take zero time."""
        if robot.carried is not None and robot.position == robot.goal:
            b = self.target_bin.pop(robot.id)
            if int(self.config.assignment.types[b]) != robot.carried:
                raise PlanningError(f"robot {robot.id} dropped type {robot.carried} into bin {b}")
            if counting:
                metrics["deliveries"] += 1
                metrics["per_type"][robot.carried] += 1
            robot.carried = None
            robot.goal = self._station_goal(robot.position)
            robot.path.clear()
            self.goal_time[robot.id] = now
        if robot.carried is None and robot.position in self.station_of:
            k = self.station_of[robot.position]
            if robot.id in self.cycle_start and counting:
                metrics["cycle_lengths"].append(now - self.cycle_start[robot.id])
            self.cycle_start[robot.id] = now
            t = sample_parcel(k, self.config.distribution, self.parcel_rng)
            robot.carried = t
            robot.goal = self._bin_goal(robot.position, t)
            self.target_bin[robot.id] = self.access_by_type[t][robot.goal]
            robot.path.clear()
            self.goal_time[robot.id] = now

    def _place(self) -> None:
        cfg = self.config
        rng = np.random.default_rng(cfg.start_seed)
        free = np.array(sorted(self.net.map.index(c) for c in self.net.map.free_cells()))
        starts = rng.choice(free, size=cfg.n_robots, replace=False)
        for i, cell in enumerate(starts):
            r = RobotState(i, int(cell))
            r.goal = self._station_goal(r.position)
            self.goal_time[i] = 0
            self.robots.append(r)

    # -- main loop --------------------------------------------------------
    def run(self) -> Metrics:
        cfg = self.config
        self._place()
        age_limit = int(cfg.age_factor * self.net.diameter)
        bins = set(self.bin_cells)
        tally = {"deliveries": 0, "per_type": [0] * cfg.assignment.n_types, "cycle_lengths": []}
        counters = dict(waits=0, conflicts=0, cycles=0, messages=0, replans=0, meet=0, swap=0, bin=0)
        step_times = []
        max_age = 0
        trace = []
        cols = self.net.map.cols
        for r in self.robots:
            self._events(r, 0, cfg.warmup == 0, tally)
        if cfg.record_trace:
            trace.extend(self._snapshot(0, cols))

        for now in range(1, cfg.horizon + 1):
            before = {r.id: r.position for r in self.robots}
            was_at = {cell: rid for rid, cell in before.items()}
            t0 = time.perf_counter()
            out = self.planner.step(self.robots)
            step_times.append(time.perf_counter() - t0)
            counting = now > cfg.warmup
            for r in self.robots:
                self._events(r, now, counting, tally)

            # safety, asserted every step
            cells = [r.position for r in self.robots]
            counters["meet"] += len(cells) - len(set(cells))
            counters["bin"] += sum(c in bins for c in cells)
            for rid, cell in out.moves.items():
                other = was_at.get(cell)
                if other is not None and other in out.moves and out.moves[other] == before[rid]:
                    counters["swap"] += 1
            counters["waits"] += len(out.waits)
            counters["conflicts"] += out.conflicts_resolved
            counters["cycles"] += out.cycles_detected
            counters["messages"] += out.messages
            counters["replans"] += out.replans

            for r in self.robots:
                age = now - self.goal_time[r.id]
                if age > max_age:
                    max_age = age
                if age > age_limit:
                    raise DeadlockError(
                        f"robot {r.id} has not reached its goal for {age} steps (limit {age_limit})",
                        {
                            "step": now,
                            "robot": r.id,
                            "position": self.net.map.coord(r.position),
                            "goal": self.net.map.coord(r.goal),
                            "carried": r.carried,
                            "age": age,
                            "limit": age_limit,
                        },
                    )
            if cfg.record_trace:
                trace.extend(self._snapshot(now, cols))

        measured = cfg.horizon - cfg.warmup
        deliveries = tally["deliveries"]
        cycles = tally["cycle_lengths"]
        times_ms = np.array(step_times) * 1000.0
        return Metrics(
            deliveries=deliveries,
            measured_steps=measured,
            throughput=deliveries / measured if measured else 0.0,
            per_type=tally["per_type"],
            mean_task_distance=float(np.mean(cycles)) if cycles else float("nan"),
            mean_step_ms=float(times_ms.mean()) if len(times_ms) else 0.0,
            max_step_ms=float(times_ms.max()) if len(times_ms) else 0.0,
            waits=counters["waits"],
            conflicts=counters["conflicts"],
            cycles=counters["cycles"],
            messages=counters["messages"],
            replans=counters["replans"],
            max_task_age=max_age,
            age_limit=age_limit,
            meet_violations=counters["meet"],
            swap_violations=counters["swap"],
            bin_violations=counters["bin"],
            trace=trace,
        )

    def _snapshot(self, now: int, cols: int):
        return [(now, r.id, r.position // cols, r.position % cols, r.carried) for r in self.robots]


def run(config: SimConfig) -> Metrics:
    return Simulation(config).run()
