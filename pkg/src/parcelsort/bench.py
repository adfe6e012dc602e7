"""Desk-scale experiment harness.

Two experiment kinds exist.  ``assignment`` experiments score every solver
on the same random distributions over a sweep of type counts.
``throughput`` experiments run the simulator for every (solver, planner,
robot count) cell.  Each seed index gets its own distribution; every cell
derives its RNG seeds from the experiment's base seed with
:func:`parcelsort.seeding.derive_seed`, so any single cell can be rerun on
its own.

Output per experiment ``NAME``:

``NAME_runs.csv``
    one row per (cell, seed), deterministic columns only
``NAME_summary.csv``
    mean and standard deviation over seeds, deterministic
``NAME_timing.csv``
    wall-clock columns, kept apart so the other two files rerun byte-identically
``NAME.json``
    index with the spec, its hash, the seeds, package version and git commit
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .assignment import SOLVERS, CostModel, GAParams, solve
from .errors import DeadlockError, InvalidConfigurationError
from .gridworld import TypeDistribution, generate_map
from .planner import PLANNERS
from .roadnet import orient
from .seeding import derive_seed
from .simulator import SimConfig, run as run_sim

KINDS = ("assignment", "throughput")


@dataclass
class ExperimentSpec:
    name: str
    kind: str
    block_rows: int
    block_cols: int
    stations: int
    n_types: list[int]
    solvers: list[str]
    planners: list[str] = field(default_factory=list)
    robots: list[int] = field(default_factory=list)
    seeds: int = 5
    steps: int = 500
    base_seed: int = 0
    ga_iterations: int = 800
    ga_population: int = 100
    ga_mutation: float = 0.08
    exact_node_limit: int = 20_000  # node budget, not seconds, so reruns match
    focal_w: float = 1.5
    workers: int = 1

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidConfigurationError(f"experiment kind must be one of {KINDS}, got {self.kind!r}")
        if self.seeds < 1:
            raise InvalidConfigurationError("seeds per point must be >= 1")
        if self.block_rows < 1 or self.block_cols < 1:
            raise InvalidConfigurationError("block counts must be >= 1")
        n_bins = self.block_rows * self.block_cols
        for s in self.solvers:
            if s not in SOLVERS:
                raise InvalidConfigurationError(f"unknown solver {s!r}; choose from {', '.join(SOLVERS)}")
        if not self.solvers or not self.n_types:
            raise InvalidConfigurationError("need at least one solver and one type count")
        for c in self.n_types:
            if not 1 <= c <= n_bins:
                raise InvalidConfigurationError(f"type count {c} outside [1, {n_bins}]")
        if self.kind == "throughput":
            if len(self.n_types) != 1:
                raise InvalidConfigurationError("throughput experiments take exactly one type count")
            for p in self.planners:
                if p not in PLANNERS:
                    raise InvalidConfigurationError(f"unknown planner {p!r}; choose from {', '.join(PLANNERS)}")
            if not self.planners or not self.robots:
                raise InvalidConfigurationError("throughput experiments need planners and robot counts")
            if min(self.robots) < 1 or self.steps < 1:
                raise InvalidConfigurationError("robot counts and steps must be positive")

    @property
    def ga_params(self) -> GAParams:
        return GAParams(self.ga_iterations, self.ga_population, self.ga_mutation)

    def config_hash(self) -> str:
        body = {k: v for k, v in asdict(self).items() if k != "workers"}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfigurationError(f"experiment file is not JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidConfigurationError("experiment file must hold a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidConfigurationError(f"unknown experiment fields: {', '.join(sorted(unknown))}")
        if isinstance(data.get("n_types"), int):
            data["n_types"] = [data["n_types"]]
        try:
            spec = cls(**data)
        except TypeError as exc:
            raise InvalidConfigurationError(str(exc)) from exc
        spec.validate()
        return spec


# desk-scale versions of the four figures
EXPERIMENTS = {
    "fig5": ExperimentSpec(
        "fig5", "assignment", 4, 9, 12, [10, 20, 30, 36],
        ["random", "greedy", "ga", "exact", "hungarian"],
    ),
    "fig6": ExperimentSpec(
        "fig6", "throughput", 4, 9, 12, [20], ["random", "greedy", "ga"],
        ["pry", "epry-random", "epry-focal"], [10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
    ),
    "fig7": ExperimentSpec(
        "fig7", "throughput", 10, 20, 20, [100], ["ga"],
        ["pry", "epry-random", "epry-focal"], [50, 100, 150, 200, 250, 300, 350, 400],
    ),
    "fig8": ExperimentSpec(
        "fig8", "throughput", 15, 30, 30, [200], ["ga"],
        ["pry", "epry-random", "epry-focal"], [100, 200, 300, 400, 500],
    ),
}


def load_experiment(name_or_path: str, seeds: int | None = None) -> ExperimentSpec:
    if name_or_path in EXPERIMENTS:
        spec = ExperimentSpec(**asdict(EXPERIMENTS[name_or_path]))
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise InvalidConfigurationError(
                f"experiment {name_or_path!r} is neither one of {', '.join(EXPERIMENTS)} nor a readable file"
            )
        spec = ExperimentSpec.from_json(path.read_text())
    if seeds is not None:
        spec.seeds = seeds
    spec.validate()
    return spec


# -- per-seed instances ---------------------------------------------------

@functools.lru_cache(maxsize=4)
def _world(block_rows: int, block_cols: int, stations: int):
    wmap = generate_map(block_rows, block_cols, stations)
    return wmap, orient(wmap)


def _distribution(spec: ExperimentSpec, n_types: int, seed_index: int) -> TypeDistribution:
    wmap, _ = _world(spec.block_rows, spec.block_cols, spec.stations)
    rng = np.random.default_rng(derive_seed(spec.base_seed, "dist", n_types, seed_index))
    return TypeDistribution.dirichlet(wmap.n_stations, n_types, rng)


def _assign(spec: ExperimentSpec, solver: str, n_types: int, seed_index: int):
    wmap, _ = _world(spec.block_rows, spec.block_cols, spec.stations)
    dist = _distribution(spec, n_types, seed_index)
    cost = CostModel.from_map(wmap, dist)
    seed = derive_seed(spec.base_seed, "assign", solver, n_types, seed_index)
    assignment, info = solve(solver, cost, seed, spec.ga_params, node_limit=spec.exact_node_limit)
    return dist, assignment, info


def _applicable(solver: str, n_types: int, n_bins: int) -> bool:
    return solver != "hungarian" or n_types == n_bins


def assignment_cell(spec: ExperimentSpec, solver: str, n_types: int, seed_index: int) -> tuple[dict, dict]:
    """One (solver, n_c, seed) result: deterministic row and timing row."""
    _, _, info = _assign(spec, solver, n_types, seed_index)
    row = {
        "solver": solver,
        "n_types": n_types,
        "seed_index": seed_index,
        "seed": info["seed"],
        "cost": repr(info["cost"]),
        "optimal": "" if "optimal" not in info else int(info["optimal"]),
    }
    timing = {"solver": solver, "n_types": n_types, "seed_index": seed_index, "wall_time": info["wall_time"]}
    return row, timing


def throughput_cell(
    spec: ExperimentSpec, solver: str, planner: str, robots: int, seed_index: int, assigned=None
) -> tuple[dict, dict]:
    """One (solver, planner, robots, seed) simulation."""
    wmap, net = _world(spec.block_rows, spec.block_cols, spec.stations)
    n_types = spec.n_types[0]
    dist, assignment, info = assigned or _assign(spec, solver, n_types, seed_index)
    seeds = {
        tag: derive_seed(spec.base_seed, tag, robots, seed_index) for tag in ("parcel", "planner", "start")
    }
    config = SimConfig(
        wmap, dist, assignment, robots, spec.steps, planner=planner, focal_w=spec.focal_w,
        parcel_seed=seeds["parcel"], planner_seed=seeds["planner"], start_seed=seeds["start"], net=net,
    )
    row = {
        "solver": solver,
        "planner": planner,
        "robots": robots,
        "seed_index": seed_index,
        "assign_seed": info["seed"],
        "parcel_seed": seeds["parcel"],
        "planner_seed": seeds["planner"],
        "start_seed": seeds["start"],
        "assign_cost": repr(info["cost"]),
    }
    start = time.perf_counter()
    try:
        m = run_sim(config)
    except DeadlockError as exc:
        row.update(failed=1, deliveries="", throughput="", mean_task_distance="", waits="", conflicts="",
                   max_task_age=exc.report.get("age", ""))
        timing = {"solver": solver, "planner": planner, "robots": robots, "seed_index": seed_index,
                  "mean_step_ms": "", "run_seconds": time.perf_counter() - start}
        return row, timing
    row.update(
        failed=0,
        deliveries=m.deliveries,
        throughput=repr(m.throughput),
        mean_task_distance=repr(m.mean_task_distance),
        waits=m.waits,
        conflicts=m.conflicts,
        max_task_age=m.max_task_age,
    )
    timing = {"solver": solver, "planner": planner, "robots": robots, "seed_index": seed_index,
              "mean_step_ms": m.mean_step_ms, "run_seconds": time.perf_counter() - start}
    return row, timing


def _seed_job(spec: ExperimentSpec, seed_index: int) -> list[tuple[dict, dict]]:
    """Every cell of one seed index; assignments are shared across robot counts and planners."""
    wmap, _ = _world(spec.block_rows, spec.block_cols, spec.stations)
    out = []
    if spec.kind == "assignment":
        for n_types in spec.n_types:
            for solver in spec.solvers:
                if _applicable(solver, n_types, wmap.n_bins):
                    out.append(assignment_cell(spec, solver, n_types, seed_index))
        return out
    n_types = spec.n_types[0]
    for solver in spec.solvers:
        if not _applicable(solver, n_types, wmap.n_bins):
            continue
        assigned = _assign(spec, solver, n_types, seed_index)
        for planner in spec.planners:
            for robots in spec.robots:
                out.append(throughput_cell(spec, solver, planner, robots, seed_index, assigned))
    return out


def _mean_std(values: list[float]) -> tuple[str, str]:
    if not values:
        return "", ""
    arr = np.array(values, dtype=float)
    return repr(float(arr.mean())), repr(float(arr.std(ddof=1)) if len(arr) > 1 else 0.0)


def summarize(spec: ExperimentSpec, rows: list[dict]) -> list[dict]:
    if spec.kind == "assignment":
        keys = sorted({(r["n_types"], r["solver"]) for r in rows}, key=lambda k: (k[0], spec.solvers.index(k[1])))
        base = {}
        for r in rows:
            if r["solver"] == "random":
                base[(r["n_types"], r["seed_index"])] = float(r["cost"])
        out = []
        for n_types, solver in keys:
            sel = [r for r in rows if r["n_types"] == n_types and r["solver"] == solver]
            mean, std = _mean_std([float(r["cost"]) for r in sel])
            reds = [
                1 - float(r["cost"]) / base[(n_types, r["seed_index"])]
                for r in sel
                if (n_types, r["seed_index"]) in base
            ]
            red, _ = _mean_std(reds)
            opt = [r["optimal"] for r in sel if r["optimal"] != ""]
            out.append({
                "solver": solver, "n_types": n_types, "runs": len(sel), "cost_mean": mean, "cost_std": std,
                "reduction_vs_random": red, "optimal_runs": sum(opt) if opt else "",
            })
        return out
    out = []
    keys = []
    for r in rows:
        k = (r["solver"], r["planner"], r["robots"])
        if k not in keys:
            keys.append(k)
    for solver, planner, robots in keys:
        sel = [r for r in rows if (r["solver"], r["planner"], r["robots"]) == (solver, planner, robots)]
        ok = [r for r in sel if r["failed"] == 0]
        mean, std = _mean_std([float(r["throughput"]) for r in ok])
        out.append({
            "solver": solver, "planner": planner, "robots": robots, "runs": len(sel),
            "failed": len(sel) - len(ok), "throughput_mean": mean, "throughput_std": std,
        })
    return out


def _git_commit() -> str:
    try:
        res = subprocess.run(
            ["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() if res.returncode == 0 and res.stdout.strip() else "unknown"


def _write_csv(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def run_experiment(spec: ExperimentSpec, out_dir: Path | str, progress=None) -> dict:
    """Run every cell and write the CSV files and the JSON index; returns the index."""
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results: list[list[tuple[dict, dict]]] = []
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_seed_job, [spec] * spec.seeds, range(spec.seeds)))
    else:
        for i in range(spec.seeds):
            results.append(_seed_job(spec, i))
            if progress:
                progress(f"seed {i + 1}/{spec.seeds} done")
    rows = [r for job in results for r, _ in job]
    timing = [t for job in results for _, t in job]
    files = {
        "runs": f"{spec.name}_runs.csv",
        "summary": f"{spec.name}_summary.csv",
        "timing": f"{spec.name}_timing.csv",
    }
    _write_csv(out_dir / files["runs"], rows)
    _write_csv(out_dir / files["summary"], summarize(spec, rows))
    _write_csv(out_dir / files["timing"], timing)
    index = {
        "experiment": spec.name,
        "spec": asdict(spec),
        "config_hash": spec.config_hash(),
        "seed_indices": list(range(spec.seeds)),
        "base_seed": spec.base_seed,
        "seed_scheme": "derive_seed(base_seed, tag, ...) = sha256 prefix, see parcelsort.seeding",
        "version": __version__,
        "commit": _git_commit(),
        "files": files,
    }
    (out_dir / f"{spec.name}.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return index
