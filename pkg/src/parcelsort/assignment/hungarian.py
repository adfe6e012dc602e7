"""Hungarian case: one bin per type, solved as a linear assignment."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import WrongSolverError
from .cost import BinAssignment, CostModel


def min_cost_matching(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Match every row of an ``n x m`` matrix (n <= m) to a distinct column.

    Returns ``(col_of_row, total)``.  Thin wrapper over scipy's
    shortest-augmenting-path solver.
    """
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if n > m:
        raise ValueError("matching needs at least as many columns as rows")
    rows, cols = linear_sum_assignment(cost)
    col_of_row = np.empty(n, dtype=np.int64)
    col_of_row[rows] = cols
    return col_of_row, float(cost[rows, cols].sum())


def assign_hungarian(cost: CostModel) -> BinAssignment:
    """Optimal bijection when every bin gets its own type (n_b == n_c)."""
    if cost.n_bins != cost.n_types:
        raise WrongSolverError(
            f"Hungarian assignment needs n_b == n_c (got {cost.n_bins} bins, {cost.n_types} types); "
            "use the greedy, genetic or exact solver"
        )
    type_of_bin, _ = min_cost_matching(cost.w)
    return BinAssignment(type_of_bin, cost.n_types)
