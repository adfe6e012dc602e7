from __future__ import annotations

import csv
import json
from dataclasses import asdict, replace

import pytest

from parcelsort.bench import (
    EXPERIMENTS,
    ExperimentSpec,
    assignment_cell,
    load_experiment,
    run_experiment,
    throughput_cell,
)
from parcelsort.errors import InvalidConfigurationError

ASSIGN = ExperimentSpec(
    "tiny_assign", "assignment", 2, 2, 4, [2, 4], ["random", "greedy", "ga", "exact", "hungarian"],
    seeds=2, ga_iterations=20, ga_population=10,
)
THROUGHPUT = ExperimentSpec(
    "tiny_tp", "throughput", 2, 3, 4, [3], ["random", "greedy"], ["pry", "epry-random"], [3, 6],
    seeds=2, steps=40, ga_iterations=10, ga_population=6,
)


def _rows(path):
    with path.open() as fh:
        return list(csv.DictReader(fh))


def test_builtin_experiments_are_valid():
    assert set(EXPERIMENTS) == {"fig5", "fig6", "fig7", "fig8"}
    for spec in EXPERIMENTS.values():
        spec.validate()
    assert (EXPERIMENTS["fig8"].block_rows, EXPERIMENTS["fig8"].block_cols) == (15, 30)


@pytest.mark.parametrize(
    "change",
    [
        dict(kind="plots"),
        dict(seeds=0),
        dict(solvers=["simplex"]),
        dict(n_types=[5]),
        dict(n_types=[]),
        dict(block_rows=0),
    ],
)
def test_spec_validation(change):
    with pytest.raises(InvalidConfigurationError):
        replace(ASSIGN, **change).validate()


@pytest.mark.parametrize(
    "change",
    [dict(n_types=[2, 3]), dict(planners=["astar"]), dict(robots=[]), dict(robots=[0]), dict(steps=0)],
)
def test_throughput_spec_validation(change):
    with pytest.raises(InvalidConfigurationError):
        replace(THROUGHPUT, **change).validate()


def test_from_json_round_trip_and_errors(tmp_path):
    text = json.dumps(asdict(THROUGHPUT))
    assert ExperimentSpec.from_json(text) == THROUGHPUT
    with pytest.raises(InvalidConfigurationError, match="colour"):
        ExperimentSpec.from_json(json.dumps({**asdict(THROUGHPUT), "colour": "red"}))
    with pytest.raises(InvalidConfigurationError):
        ExperimentSpec.from_json("[1, 2]")
    with pytest.raises(InvalidConfigurationError):
        ExperimentSpec.from_json("{not json")
    with pytest.raises(InvalidConfigurationError):
        ExperimentSpec.from_json(json.dumps({"name": "x"}))
    path = tmp_path / "exp.json"
    path.write_text(text)
    assert load_experiment(str(path), seeds=1).seeds == 1
    with pytest.raises(InvalidConfigurationError, match="neither"):
        load_experiment(str(tmp_path / "missing.json"))


def test_load_builtin_is_a_copy():
    spec = load_experiment("fig6", seeds=2)
    assert spec.seeds == 2 and EXPERIMENTS["fig6"].seeds == 5


def test_config_hash_ignores_workers():
    assert ASSIGN.config_hash() == replace(ASSIGN, workers=4).config_hash()
    assert ASSIGN.config_hash() != replace(ASSIGN, base_seed=1).config_hash()


def test_assignment_experiment(tmp_path):
    index = run_experiment(ASSIGN, tmp_path)
    runs = _rows(tmp_path / index["files"]["runs"])
    # hungarian only where types == bins (n_c = 4), the other four solvers everywhere
    assert len(runs) == 2 * (4 + 5)
    assert {r["solver"] for r in runs if r["n_types"] == "2"} == {"random", "greedy", "ga", "exact"}
    summary = _rows(tmp_path / index["files"]["summary"])
    exact = {r["n_types"]: float(r["cost_mean"]) for r in summary if r["solver"] == "exact"}
    for r in summary:
        assert float(r["cost_mean"]) >= exact[r["n_types"]] - 1e-9
    assert all(r["optimal_runs"] == "2" for r in summary if r["solver"] == "exact")
    meta = json.loads((tmp_path / "tiny_assign.json").read_text())
    assert meta["config_hash"] == ASSIGN.config_hash()
    assert meta["seed_indices"] == [0, 1]
    assert {"version", "commit", "spec"} <= set(meta)


def test_throughput_experiment_reruns_byte_identically(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    index = run_experiment(THROUGHPUT, a)
    run_experiment(replace(THROUGHPUT, workers=2), b)
    for key in ("runs", "summary"):
        name = index["files"][key]
        assert (a / name).read_bytes() == (b / name).read_bytes()
    runs = _rows(a / index["files"]["runs"])
    assert len(runs) == 2 * 2 * 2 * 2
    assert all(r["failed"] == "0" for r in runs)
    timing = _rows(a / index["files"]["timing"])
    assert len(timing) == len(runs) and "run_seconds" in timing[0]


def test_single_cells_reproduce_the_table(tmp_path):
    index = run_experiment(THROUGHPUT, tmp_path)
    runs = _rows(tmp_path / index["files"]["runs"])
    target = runs[-1]
    row, _ = throughput_cell(
        THROUGHPUT, target["solver"], target["planner"], int(target["robots"]), int(target["seed_index"])
    )
    assert {k: str(v) for k, v in row.items()} == target

    index = run_experiment(ASSIGN, tmp_path)
    runs = _rows(tmp_path / index["files"]["runs"])
    target = runs[3]
    row, _ = assignment_cell(ASSIGN, target["solver"], int(target["n_types"]), int(target["seed_index"]))
    assert {k: str(v) for k, v in row.items()} == target


def test_deadlocked_cells_are_recorded_not_raised(tmp_path, monkeypatch):
    import parcelsort.bench as bench
    from parcelsort.errors import DeadlockError

    def boom(config):
        raise DeadlockError("stuck", {"age": 99})

    monkeypatch.setattr(bench, "run_sim", boom)
    row, timing = throughput_cell(THROUGHPUT, "random", "pry", 3, 0)
    assert row["failed"] == 1 and row["max_task_age"] == 99
    summary = bench.summarize(THROUGHPUT, [row])
    assert summary[0]["failed"] == 1 and summary[0]["throughput_mean"] == ""
