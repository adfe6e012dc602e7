"""Bin assignments and the expected-travel-cost model they are scored with."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidAssignmentError, InvalidConfigurationError
from ..gridworld import TypeDistribution, WarehouseMap


@dataclass(frozen=True, eq=False)
class BinAssignment:
    """Type of every bin.

    ``types[i]`` is the 0-based type of bin ``i``; :meth:`one_based` gives
    the 1..n_c labelling used in reports and files.
    """

    types: np.ndarray
    n_types: int

    def __post_init__(self) -> None:
        types = np.asarray(self.types, dtype=np.int64).copy()
        if types.ndim != 1:
            raise InvalidAssignmentError("assignment must be a 1-D array")
        if self.n_types < 1:
            raise InvalidAssignmentError("need at least one parcel type")
        if len(types) and (types.min() < 0 or types.max() >= self.n_types):
            raise InvalidAssignmentError(f"bin types must lie in [0, {self.n_types})")
        present = np.bincount(types, minlength=self.n_types)
        missing = np.flatnonzero(present == 0)
        if len(missing):
            raise InvalidAssignmentError(
                f"assignment is not surjective: type {missing[0] + 1} has no bin"
            )
        types.setflags(write=False)
        object.__setattr__(self, "types", types)

    def __len__(self) -> int:
        return len(self.types)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinAssignment):
            return NotImplemented
        return self.n_types == other.n_types and np.array_equal(self.types, other.types)

    def __hash__(self) -> int:
        return hash((self.n_types, self.types.tobytes()))

    def bins_of(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.types == t)

    def one_based(self) -> list[int]:
        return [int(t) + 1 for t in self.types]

    @classmethod
    def from_one_based(cls, labels, n_types: int | None = None) -> "BinAssignment":
        arr = np.asarray(labels, dtype=np.int64)
        if len(arr) and arr.min() < 1:
            raise InvalidAssignmentError("one-based labels must be >= 1")
        return cls(arr - 1, int(n_types if n_types is not None else arr.max()))


@dataclass(frozen=True, eq=False)
class CostModel:
    """Station-to-bin distances plus arrival probabilities.

    ``dist`` is ``n_p x n_b`` and ``m`` is ``n_p x n_c``; ``w[i, j]`` is the
    expected single-bin cost of giving bin ``i`` type ``j``.
    """

    dist: np.ndarray
    m: np.ndarray

    def __post_init__(self) -> None:
        dist = np.asarray(self.dist, dtype=float).copy()
        m = np.asarray(self.m, dtype=float).copy()
        if dist.ndim != 2 or m.ndim != 2 or dist.shape[0] != m.shape[0]:
            raise InvalidConfigurationError("dist must be n_p x n_b and m n_p x n_c with matching n_p")
        if not np.isfinite(dist).all() or (dist < 0).any():
            raise InvalidConfigurationError("distances must be finite and nonnegative")
        if m.shape[1] > dist.shape[1]:
            raise InvalidConfigurationError(f"{m.shape[1]} types exceed {dist.shape[1]} bins")
        dist.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "m", m)
        w = dist.T @ m
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n_stations(self) -> int:
        return self.dist.shape[0]

    @property
    def n_bins(self) -> int:
        return self.dist.shape[1]

    @property
    def n_types(self) -> int:
        return self.m.shape[1]

    @classmethod
    def from_map(cls, wmap: WarehouseMap, distribution: TypeDistribution) -> "CostModel":
        distribution.check_against(wmap)
        return cls(wmap.station_bin_distances(), distribution.m)

    def type_distances(self, types: np.ndarray) -> np.ndarray:
        """``d[k, j]``: distance from station k to its nearest bin of type j (inf if none)."""
        types = np.asarray(types)
        d = np.full((self.n_stations, self.n_types), np.inf)
        for j in range(self.n_types):
            sel = types == j
            if sel.any():
                d[:, j] = self.dist[:, sel].min(axis=1)
        return d

    def batch_costs(self, population: np.ndarray) -> np.ndarray:
        """Average cost of every row of a ``pop x n_b`` type matrix.

        Rows missing a type get ``inf``.
        """
        pop = np.asarray(population)
        n_pop = pop.shape[0]
        n_p, n_c = self.n_stations, self.n_types
        d = np.full(n_pop * n_p * n_c, np.inf)
        # flat slot of (individual, station, type) for every (individual, station, bin)
        slot = (np.arange(n_pop)[:, None, None] * n_p + np.arange(n_p)[None, :, None]) * n_c + pop[:, None, :]
        vals = np.broadcast_to(self.dist[None, :, :], slot.shape)
        np.minimum.at(d, slot.ravel(), vals.ravel())
        d = d.reshape(n_pop, n_p, n_c)
        with np.errstate(invalid="ignore"):
            terms = np.where(self.m[None] > 0, self.m[None] * d, 0.0)
        out = terms.sum(axis=(1, 2)) / n_p
        out[np.isinf(d).any(axis=(1, 2))] = np.inf
        return out


def _check_dims(assignment: BinAssignment, cost: CostModel) -> None:
    if len(assignment) != cost.n_bins or assignment.n_types != cost.n_types:
        raise InvalidAssignmentError(
            f"assignment covers {len(assignment)} bins / {assignment.n_types} types, "
            f"cost model has {cost.n_bins} / {cost.n_types}"
        )


def average_cost(assignment: BinAssignment | np.ndarray, cost: CostModel) -> float:
    """Mean over stations of the expected distance to the nearest matching bin."""
    if not isinstance(assignment, BinAssignment):
        assignment = BinAssignment(np.asarray(assignment), cost.n_types)
    _check_dims(assignment, cost)
    d = cost.type_distances(assignment.types)
    return float((cost.m * d).sum() / cost.n_stations)


def assign_random(n_bins: int, n_types: int, rng_seed: int | np.random.Generator | None = None) -> BinAssignment:
    """Uniform baseline: a random permutation's first n_c bins get distinct types."""
    if n_types < 1 or n_types > n_bins:
        raise InvalidConfigurationError(f"need 1 <= n_c <= n_b, got n_c={n_types}, n_b={n_bins}")
    rng = np.random.default_rng(rng_seed)
    perm = rng.permutation(n_bins)
    types = np.empty(n_bins, dtype=np.int64)
    types[perm[:n_types]] = rng.permutation(n_types)
    types[perm[n_types:]] = rng.integers(0, n_types, size=n_bins - n_types)
    return BinAssignment(types, n_types)
