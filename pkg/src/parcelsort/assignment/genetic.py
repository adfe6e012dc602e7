"""Genetic algorithm over bin-type chromosomes.

A chromosome is the integer type array of all bins.  Fitness is the
reciprocal of the summed expected distance, so ranking by fitness is ranking
by :func:`average_cost`.  Offspring come from binary tournaments, a partially
mapped crossover generalised to repeated genes, and single-gene mutation; a
repair step restores any type the operators dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidConfigurationError
from .cost import BinAssignment, CostModel, assign_random
from .greedy import assign_greedy


@dataclass(frozen=True)
class GAParams:
    max_iterations: int = 800
    population: int = 100
    mutation_rate: float = 0.08
    crossover_rate: float = 0.9
    greedy_share: float = 0.2
    # stop after this many generations without improvement; None runs to max_iterations
    patience: int | None = None

    def __post_init__(self) -> None:
        if self.max_iterations < 1 or self.population < 2:
            raise InvalidConfigurationError("GA needs >= 1 iteration and a population >= 2")
        if not 0 <= self.mutation_rate <= 1 or not 0 <= self.crossover_rate <= 1:
            raise InvalidConfigurationError("GA rates must lie in [0, 1]")
        if not 0 <= self.greedy_share <= 1:
            raise InvalidConfigurationError("greedy share must lie in [0, 1]")
        if self.patience is not None and self.patience < 1:
            raise InvalidConfigurationError("patience must be positive")


@dataclass
class GAResult:
    assignment: BinAssignment
    cost: float
    generations: int
    history: list[float] = field(default_factory=list)  # best-so-far cost per generation


def pmx(p1: np.ndarray, p2: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Partially mapped crossover for chromosomes with repeated genes.

    The child starts as ``p1``; for each position in ``[lo, hi)`` the gene of
    ``p2`` is brought in by swapping it with a copy of that gene at a position
    not yet fixed (outside the segment first), or written over when no spare
    copy is left.  On permutations the child is again a permutation.
    """
    child = p1.copy()
    spots: dict[int, list[int]] = {}
    for pos in [*range(hi, len(child)), *range(lo), *range(lo, hi)]:
        spots.setdefault(int(child[pos]), []).append(pos)
    for i in range(lo, hi):
        want = int(p2[i])
        have = int(child[i])
        spots[have].remove(i)
        if have == want:
            continue
        free = spots.get(want)
        if free:
            j = free.pop(0)
            child[j] = have
            spots[have].append(j)
        child[i] = want
    return child


def repair(types: np.ndarray, cost: CostModel) -> np.ndarray:
    """Give every missing type a bin, taking the bin whose move costs least.

    Only bins whose current type has another bin are moved, so a repair never
    creates a new gap.
    """
    n_c = cost.n_types
    counts = np.bincount(types, minlength=n_c)
    if counts.min() > 0:
        return types
    types = types.copy()
    dist, m = cost.dist, cost.m
    for missing in np.flatnonzero(counts == 0):
        donors = np.flatnonzero(counts[types] >= 2)
        # loss of removing each donor from its type: stations whose unique nearest it is
        loss = np.zeros(len(donors))
        for t in np.unique(types[donors]):
            members = np.flatnonzero(types == t)
            sub = dist[:, members]
            srt = np.sort(sub, axis=1)
            best, second = srt[:, 0], srt[:, 1]
            sel = types[donors] == t
            d_sel = dist[:, donors[sel]]
            loss[sel] = m[:, t] @ np.where(d_sel == best[:, None], second[:, None] - best[:, None], 0.0)
        gain = cost.w[donors, missing] + loss
        b = donors[int(np.argmin(gain))]
        counts[types[b]] -= 1
        types[b] = missing
        counts[missing] += 1
    return types


def mutate(types: np.ndarray, n_types: int, rng: np.random.Generator) -> np.ndarray:
    out = types.copy()
    out[rng.integers(len(out))] = rng.integers(n_types)
    return out


def _initial_population(cost: CostModel, params: GAParams, rng_seed, rng: np.random.Generator) -> np.ndarray:
    n_b, n_c = cost.n_bins, cost.n_types
    n_greedy = min(params.population, math.ceil(params.greedy_share * params.population))
    n_random = params.population - n_greedy
    pop = []
    if n_greedy:
        greedy = assign_greedy(cost, rng).types
        pop.append(greedy)
        for _ in range(n_greedy - 1):
            pop.append(repair(mutate(greedy, n_c, rng), cost))
    if n_random:
        # the seeded baseline itself is always a member
        pop.append(assign_random(n_b, n_c, rng_seed).types)
        for _ in range(n_random - 1):
            pop.append(assign_random(n_b, n_c, rng).types)
    return np.array(pop, dtype=np.int64)


def run_genetic(
    cost: CostModel,
    params: GAParams | None = None,
    rng_seed: int | None = 0,
    initial_population: np.ndarray | None = None,
) -> GAResult:
    params = params or GAParams()
    rng = np.random.default_rng(rng_seed)
    n_b, n_c = cost.n_bins, cost.n_types
    if initial_population is None:
        pop = _initial_population(cost, params, rng_seed, rng)
    else:
        pop = np.array(initial_population, dtype=np.int64)
        if pop.ndim != 2 or pop.shape[1] != n_b:
            raise InvalidConfigurationError("initial population must be pop x n_b")
    size = len(pop)
    costs = cost.batch_costs(pop)
    best_i = int(np.argmin(costs))
    best, best_cost = pop[best_i].copy(), float(costs[best_i])
    history = [best_cost]
    stale = 0
    generation = 0
    for generation in range(1, params.max_iterations + 1):
        # binary tournaments for all parents at once
        a = rng.integers(size, size=(size, 2))
        parents = np.where(costs[a[:, 0]] <= costs[a[:, 1]], a[:, 0], a[:, 1])
        children = [pop[int(np.argmin(costs))].copy()]  # elitism
        k = 0
        while len(children) < size:
            p1, p2 = pop[parents[k % size]], pop[parents[(k + 1) % size]]
            k += 2
            if n_b > 1 and rng.random() < params.crossover_rate:
                lo, hi = sorted(rng.choice(n_b + 1, size=2, replace=False))
                kids = [pmx(p1, p2, lo, hi), pmx(p2, p1, lo, hi)]
            else:
                kids = [p1.copy(), p2.copy()]
            for kid in kids:
                if rng.random() < params.mutation_rate:
                    kid = mutate(kid, n_c, rng)
                children.append(repair(kid, cost))
        pop = np.array(children[:size])
        costs = cost.batch_costs(pop)
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best, best_cost = pop[i].copy(), float(costs[i])
            stale = 0
        else:
            stale += 1
        history.append(best_cost)
        if params.patience is not None and stale >= params.patience:
            break
    return GAResult(BinAssignment(best, n_c), best_cost, generation, history)


def assign_genetic(cost: CostModel, params: GAParams | None = None, rng_seed: int | None = 0) -> BinAssignment:
    return run_genetic(cost, params, rng_seed).assignment
