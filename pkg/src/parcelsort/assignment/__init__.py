"""Bin-to-type assignment solvers."""

from __future__ import annotations

import time

from ..errors import InvalidConfigurationError
from .cost import BinAssignment, CostModel, assign_random, average_cost
from .exact import ExactResult, assign_exact, solve_exact
from .genetic import GAParams, GAResult, assign_genetic, run_genetic
from .greedy import assign_greedy
from .hungarian import assign_hungarian, min_cost_matching

SOLVERS = ("random", "hungarian", "greedy", "ga", "exact")

__all__ = [
    "SOLVERS",
    "BinAssignment",
    "CostModel",
    "ExactResult",
    "GAParams",
    "GAResult",
    "assign_exact",
    "assign_genetic",
    "assign_greedy",
    "assign_hungarian",
    "assign_random",
    "average_cost",
    "min_cost_matching",
    "run_genetic",
    "solve",
    "solve_exact",
]


def solve(
    name: str,
    cost: CostModel,
    seed: int = 0,
    ga_params: GAParams | None = None,
    time_limit: float | None = None,
    node_limit: int | None = None,
) -> tuple[BinAssignment, dict]:
    """Run solver ``name``; returns the assignment and a small info dict."""
    start = time.perf_counter()
    info: dict = {"solver": name, "seed": seed}
    if name == "random":
        result = assign_random(cost.n_bins, cost.n_types, seed)
    elif name == "hungarian":
        result = assign_hungarian(cost)
    elif name == "greedy":
        result = assign_greedy(cost, seed)
    elif name == "ga":
        ga = run_genetic(cost, ga_params, seed)
        result = ga.assignment
        info["generations"] = ga.generations
    elif name == "exact":
        ex = solve_exact(cost, time_limit, node_limit=node_limit)
        result = ex.assignment
        info["optimal"] = ex.optimal
        info["nodes"] = ex.nodes
    else:
        raise InvalidConfigurationError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")
    info["wall_time"] = time.perf_counter() - start
    info["cost"] = average_cost(result, cost)
    return result, info
