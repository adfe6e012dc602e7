"""Exact assignment by depth-first branch and bound."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .cost import BinAssignment, CostModel, average_cost
from .greedy import assign_greedy


@dataclass
class ExactResult:
    assignment: BinAssignment
    cost: float
    optimal: bool  # False when the time limit cut the search short
    nodes: int


def _column_gaps(w: np.ndarray) -> np.ndarray:
    """Per bin, the largest margin by which it beats every other bin in some column of ``w``."""
    if w.shape[0] < 2:
        return np.zeros(w.shape[0])
    srt = np.sort(w, axis=0)
    best, second = srt[0], srt[1]
    runner_up = np.where(w == best, second, best)  # best competitor of each bin per column
    return np.maximum(runner_up - w, 0.0).max(axis=1)


_BIG = 1e12  # stands in for "no bin yet"; keeps 0 * distance finite
_TIE = 1e-12
_MAX_PERM_TYPES = 7  # per-station bound enumerates n_c! type orders


def solve_exact(
    cost: CostModel,
    time_limit: float | None = None,
    incumbent: BinAssignment | None = None,
    node_limit: int | None = None,
) -> ExactResult:
    """Branch over one bin at a time, pruning on a relaxation bound.

    The basic bound lets every unassigned bin serve every type at once.  For
    up to seven types it is tightened by solving each station on its own:
    a station still sees every remaining bin carry exactly one type, so its
    best case pairs types with its nearest remaining bins one to one.  The
    per-station optima add up to a bound on the whole.

    Bins are branched in descending order of their largest column gap in
    ``w``; types are tried in ascending order of their bound.

    ``time_limit`` (seconds) and ``node_limit`` both stop the search early
    and return the incumbent with ``optimal=False``; only the node budget
    gives run-to-run identical results.
    """
    n_p, n_b, n_c = cost.n_stations, cost.n_bins, cost.n_types
    dist, m = cost.dist, cost.m
    gap = _column_gaps(cost.w)
    nearest_w = cost.w.min(axis=1)
    order = sorted(range(n_b), key=lambda i: (-gap[i], nearest_w[i], i))
    # per depth: each station's distances to the still unassigned bins, ascending,
    # padded to n_c columns
    rest_sorted = []
    for d in range(n_b + 1):
        rest = np.sort(dist[:, order[d:]], axis=1)[:, :n_c]
        pad = np.full((n_p, n_c - rest.shape[1]), _BIG)
        rest_sorted.append(np.hstack([rest, pad]))
    n_rest = [n_b - d for d in range(n_b + 1)]
    perms = np.array(list(itertools.permutations(range(n_c)))) if n_c <= _MAX_PERM_TYPES else None
    m_perm = m[:, perms] if perms is not None else None  # n_p x P x n_c

    if incumbent is None:
        incumbent = assign_greedy(cost, 0)
    best_types = incumbent.types.copy()
    best_cost = average_cost(incumbent, cost)

    deadline = None if time_limit is None else time.perf_counter() + time_limit
    types = np.full(n_b, -1, dtype=np.int64)
    counts = np.zeros(n_c, dtype=np.int64)
    nearest = np.full((n_p, n_c), _BIG)
    eye = np.eye(n_c, dtype=bool)
    nodes = 0
    timed_out = False

    def child_bounds(depth: int, b: int) -> np.ndarray:
        """Bound after giving bin ``order[depth]`` each type in turn."""
        # cur[t] is the nearest table after bin b takes type t
        cur = np.where(eye[:, None, :], np.minimum(nearest, dist[:, [b]])[None], nearest[None])
        rest = rest_sorted[depth + 1]
        if perms is None:
            near = np.minimum(cur, rest[None, :, :1])
            out = (m[None] * near).sum(axis=(1, 2))
        else:
            paired = np.minimum(cur[:, :, perms], rest[None, :, None, :])  # C x n_p x P x n_c
            out = (paired * m_perm[None]).sum(axis=3).min(axis=2).sum(axis=1)
        # every type needs a bin: infeasible when too few bins remain
        still_missing = (counts == 0).sum() - (counts == 0)
        out = np.where(still_missing > n_rest[depth + 1], np.inf, out)
        return out / n_p

    def search(depth: int) -> None:
        nonlocal best_cost, best_types, nodes, timed_out
        nodes += 1
        if deadline is not None and nodes % 64 == 0 and time.perf_counter() > deadline:
            timed_out = True
        if node_limit is not None and nodes > node_limit:
            timed_out = True
        if timed_out:
            return
        if depth == n_b:
            value = float((m * nearest).sum() / n_p)
            if value < best_cost - _TIE * max(1.0, abs(best_cost)):
                best_cost, best_types = value, types.copy()
            return
        b = order[depth]
        bounds = child_bounds(depth, b)
        for t in np.argsort(bounds, kind="stable"):
            # the relative slack stops rounding noise from reopening tied subtrees
            if bounds[t] >= best_cost - _TIE * max(1.0, abs(best_cost)):
                break
            saved = nearest[:, t].copy()
            types[b] = t
            counts[t] += 1
            nearest[:, t] = np.minimum(saved, dist[:, b])
            search(depth + 1)
            nearest[:, t] = saved
            counts[t] -= 1
            types[b] = -1
            if timed_out:
                return

    search(0)
    assignment = BinAssignment(best_types, n_c)
    return ExactResult(assignment, average_cost(assignment, cost), not timed_out, nodes)


def assign_exact(cost: CostModel, time_limit: float | None = None, node_limit: int | None = None) -> BinAssignment:
    return solve_exact(cost, time_limit, node_limit=node_limit).assignment
