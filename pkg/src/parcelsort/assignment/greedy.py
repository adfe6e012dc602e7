"""Greedy bin allocation seeded by a min-cost matching."""

from __future__ import annotations

import numpy as np

from .cost import BinAssignment, CostModel
from .hungarian import min_cost_matching


def assign_greedy(cost: CostModel, rng_seed: int | np.random.Generator | None = 0) -> BinAssignment:
    """Matching for one bin per type, then grow the costliest type one bin at a time.

    Each round takes the type with the largest current cost and tries every
    unallocated bin as an extra bin for it.  The best candidate is kept when
    it lowers the total cost; otherwise the remaining bins get random types
    and the loop ends.
    """
    rng = np.random.default_rng(rng_seed)
    n_b, n_c = cost.n_bins, cost.n_types
    dist, m = cost.dist, cost.m
    bin_of_type, _ = min_cost_matching(cost.w.T)

    types = np.full(n_b, -1, dtype=np.int64)
    types[bin_of_type] = np.arange(n_c)
    nearest = dist[:, bin_of_type].copy()  # n_p x n_c, per-type nearest bin distance
    type_cost = (m * nearest).sum(axis=0)
    c_min = type_cost.sum() / cost.n_stations
    unallocated = np.flatnonzero(types < 0)

    while len(unallocated):
        worst = int(np.argmax(type_cost))
        trial = np.minimum(nearest[:, [worst]], dist[:, unallocated])
        trial_cost = m[:, worst] @ trial
        pick = int(np.argmin(trial_cost))
        new_cost = c_min - (type_cost[worst] - trial_cost[pick]) / cost.n_stations
        if new_cost < c_min:
            c_min = new_cost
            b = unallocated[pick]
            types[b] = worst
            nearest[:, worst] = trial[:, pick]
            type_cost[worst] = trial_cost[pick]
            unallocated = np.delete(unallocated, pick)
        else:
            types[unallocated] = rng.integers(0, n_c, size=len(unallocated))
            break
    return BinAssignment(types, n_c)
