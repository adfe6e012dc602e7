"""Command-line entry point: gen-map, assign, simulate, benchmark.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 runtime failure
(deadlock or planning error).

Every file the tool writes is placed inside the output directory
(``--out-dir``, else ``$PARCELSORT_OUT_DIR``, else the working directory);
output paths that would escape it are rejected.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assignment import SOLVERS, BinAssignment, CostModel, GAParams, solve
from .bench import EXPERIMENTS, load_experiment, run_experiment
from .errors import InvalidConfigurationError, ParcelSortError
from .gridworld import TypeDistribution, generate_map, load_map, save_map
from .planner import PLANNERS
from .seeding import derive_seed
from .simulator import SimConfig, run as run_sim

OUT_DIR_ENV = "PARCELSORT_OUT_DIR"
EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 1, 2, 3

log = logging.getLogger("parcelsort")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="parcelsort", description="Bin assignment and robot routing for parcel sorting.")
    p.add_argument("--version", action="version", version=_version_text())
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    p.add_argument("--out-dir", default=None, help=f"directory for all outputs (default ${OUT_DIR_ENV} or .)")
    p.add_argument("--global-seed", type=int, default=None, dest="global_seed",
                   help="seed from which every sub-seed is derived when --seed is not given")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    g = sub.add_parser("gen-map", help="write a block warehouse map")
    g.add_argument("--blocks", type=int, nargs=2, metavar=("A", "B"), required=True,
                   help="bin blocks per column and row; the map is (3A+2) x (3B+2)")
    g.add_argument("--stations", type=int, default=12, help="evenly spaced border stations")
    g.add_argument("--station-offsets", type=int, nargs="+", default=None,
                   help="explicit clockwise perimeter offsets from (0,0) instead of --stations")
    g.add_argument("--out", default="map.txt")
    g.add_argument("--types", type=int, default=None, help="also write a random distribution with this many types")
    g.add_argument("--dist-out", default="dist.txt")
    g.add_argument("--seed", type=int, default=None)

    a = sub.add_parser("assign", help="assign parcel types to bins")
    a.add_argument("--map", required=True)
    a.add_argument("--dist", required=True)
    a.add_argument("--solver", choices=SOLVERS, default="ga")
    a.add_argument("--seed", type=int, default=None)
    a.add_argument("--ga-iters", type=int, default=800)
    a.add_argument("--ga-pop", type=int, default=100)
    a.add_argument("--ga-mutation", type=float, default=0.08)
    a.add_argument("--time-limit", type=float, default=None, help="exact solver budget in seconds")
    a.add_argument("--out", default="assignment.json")

    s = sub.add_parser("simulate", help="run the lifelong sorting simulation")
    s.add_argument("--map", required=True)
    s.add_argument("--dist", required=True)
    s.add_argument("--assignment", required=True, help="assign report (JSON) or whitespace list of 1-based types")
    s.add_argument("--robots", type=int, required=True)
    s.add_argument("--steps", type=int, default=500)
    s.add_argument("--warmup", type=int, default=0)
    s.add_argument("--planner", choices=list(PLANNERS), default="epry-random")
    s.add_argument("--focal-w", type=float, default=1.5)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default="metrics.json")
    s.add_argument("--trace", default=None, help="optional per-step robot positions CSV")

    b = sub.add_parser("benchmark", help="run a desk-scale experiment")
    b.add_argument("--experiment", required=True, help=f"one of {', '.join(EXPERIMENTS)} or a JSON spec file")
    b.add_argument("--seeds", type=int, default=None, help="seeds per point (default 5)")
    b.add_argument("--workers", type=int, default=None, help="parallel processes")
    b.add_argument("--sub-dir", default=".", help="subdirectory of the output directory")
    return p


def _version_text() -> str:
    return f"parcelsort {__version__} (python {platform.python_version()}, numpy {np.__version__})"


def _out_path(out_dir: Path, name: str) -> Path:
    root = out_dir.resolve()
    path = (root / name).resolve()
    if path != root and root not in path.parents:
        raise InvalidConfigurationError(f"output path {name} lies outside the output directory {root}")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InvalidConfigurationError(f"cannot read {what} file {path}: {exc.strerror or exc}") from exc


def _seed(args, tag: str) -> int:
    if args.seed is not None:
        return args.seed
    return derive_seed(args.global_seed if args.global_seed is not None else 0, tag)


def _cmd_gen_map(args, out_dir: Path) -> None:
    stations = args.station_offsets if args.station_offsets is not None else args.stations
    wmap = generate_map(args.blocks[0], args.blocks[1], stations)
    path = _out_path(out_dir, args.out)
    path.write_text(save_map(wmap))
    print(f"map {wmap.rows}x{wmap.cols}: {wmap.n_bins} bins, {wmap.n_stations} stations -> {path}")
    if args.types is not None:
        seed = _seed(args, "gen-map")
        print(f"seed: distribution={seed}")
        dist = TypeDistribution.dirichlet(wmap.n_stations, args.types, np.random.default_rng(seed))
        dist.check_against(wmap)
        dpath = _out_path(out_dir, args.dist_out)
        dpath.write_text(dist.to_text())
        print(f"distribution {wmap.n_stations}x{args.types} -> {dpath}")


def _load_inputs(args):
    wmap = load_map(_read(args.map, "map"))
    dist = TypeDistribution.from_text(_read(args.dist, "distribution"))
    dist.check_against(wmap)
    return wmap, dist


def _cmd_assign(args, out_dir: Path) -> None:
    wmap, dist = _load_inputs(args)
    seed = _seed(args, "assign")
    print(f"seed: solver={seed}")
    params = GAParams(args.ga_iters, args.ga_pop, args.ga_mutation)
    assignment, info = solve(args.solver, CostModel.from_map(wmap, dist), seed, params, args.time_limit)
    report = {
        "solver": args.solver,
        "seed": seed,
        "n_bins": wmap.n_bins,
        "n_types": dist.n_types,
        "assignment": assignment.one_based(),
        "cost": info["cost"],
        "wall_time": info["wall_time"],
    }
    for key in ("generations", "optimal", "nodes"):
        if key in info:
            report[key] = info[key]
    path = _out_path(out_dir, args.out)
    path.write_text(json.dumps(report, indent=2) + "\n")
    print(f"{args.solver}: cost {info['cost']:.6f} in {info['wall_time']:.3f} s -> {path}")


def _read_assignment(path: str, n_types: int) -> BinAssignment:
    text = _read(path, "assignment")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict):
        labels = data.get("assignment")
    elif isinstance(data, list):
        labels = data
    else:
        try:
            labels = [int(x) for x in text.replace(",", " ").split()]
        except ValueError as exc:
            raise InvalidConfigurationError(f"assignment file {path}: {exc}") from exc
    if not isinstance(labels, list) or not all(isinstance(x, int) for x in labels):
        raise InvalidConfigurationError(f"assignment file {path} holds no integer list")
    if labels and max(labels) > n_types:
        raise InvalidConfigurationError(f"assignment uses type {max(labels)} but the distribution has {n_types}")
    return BinAssignment.from_one_based(labels, n_types)


def _cmd_simulate(args, out_dir: Path) -> None:
    wmap, dist = _load_inputs(args)
    assignment = _read_assignment(args.assignment, dist.n_types)
    base = _seed(args, "simulate")
    seeds = {tag: derive_seed(base, tag) for tag in ("parcel", "planner", "start")}
    print("seeds: " + ", ".join(f"{k}={v}" for k, v in seeds.items()))
    config = SimConfig(
        wmap, dist, assignment, args.robots, args.steps, planner=args.planner, focal_w=args.focal_w,
        parcel_seed=seeds["parcel"], planner_seed=seeds["planner"], start_seed=seeds["start"],
        warmup=args.warmup, record_trace=args.trace is not None,
    )
    metrics = run_sim(config)
    out = metrics.to_dict()
    out.update(planner=args.planner, robots=args.robots, steps=args.steps, seed=base, seeds=seeds)
    path = _out_path(out_dir, args.out)
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(f"throughput {metrics.throughput:.4f} ({metrics.deliveries} deliveries) -> {path}")
    if args.trace is not None:
        tpath = _out_path(out_dir, args.trace)
        with tpath.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "robot", "row", "col", "carried"])
            for step, rid, r, c, carried in metrics.trace:
                w.writerow([step, rid, r, c, "" if carried is None else carried + 1])
        print(f"trace -> {tpath}")


def _cmd_benchmark(args, out_dir: Path) -> None:
    spec = load_experiment(args.experiment, args.seeds)
    if args.workers is not None:
        spec.workers = args.workers
    if args.global_seed is not None:
        spec.base_seed = args.global_seed
    print(f"seed: base={spec.base_seed} ({spec.seeds} seed indices)")
    target = _out_path(out_dir, args.sub_dir)
    index = run_experiment(spec, target, progress=log.info)
    print(f"{spec.name}: " + ", ".join(str(target / f) for f in index["files"].values()))


COMMANDS = {
    "gen-map": _cmd_gen_map,
    "assign": _cmd_assign,
    "simulate": _cmd_simulate,
    "benchmark": _cmd_benchmark,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    out_dir = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or ".")
    try:
        COMMANDS[args.command](args, out_dir)
    except InvalidConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ParcelSortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        report = getattr(exc, "report", None)
        if report:
            print(json.dumps(report, default=str), file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
