"""Differential evolution baseline: DE/rand/1/bin with synchronous
selection, binomial crossover with a guaranteed-inherited coordinate,
and clipping bound repair.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import IterateRecord, ObjectiveSpec, RunTrace, evaluate_batch


@dataclass
class DEConfig:
    """Population size NP >= 4 (base + two difference members + target),
    differential weight f_weight, crossover rate cr, hypercube bounds
    [lo, hi]^d, generation budget and seed."""

    pop_size: int
    f_weight: float = 0.5
    cr: float = 0.9
    lo: float = -1.0
    hi: float = 1.0
    max_generations: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 4:
            raise ValueError("population must have at least 4 members")
        if not 0.0 <= self.cr <= 1.0:
            raise ValueError("cr must lie in [0, 1]")
        if not self.lo < self.hi:
            raise ValueError("bounds require lo < hi")
        if self.max_generations < 0:
            raise ValueError("max_generations must be nonnegative")


def default_pop_size(dim: int) -> int:
    """10 * d, capped at 200."""
    return min(10 * dim, 200)


@dataclass
class Population:
    members: np.ndarray  # (NP, d), always inside the bounds
    fitness: np.ndarray  # (NP,), fitness[i] == f(members[i]) at all times
    generation: int
    eval_count: int

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.fitness))


def rand1_mutant(members: np.ndarray, r1: int, r2: int, r3: int, f_weight: float) -> np.ndarray:
    """x_{r1} + F (x_{r2} - x_{r3})."""
    return members[r1] + f_weight * (members[r2] - members[r3])


def binomial_crossover(
    target: np.ndarray, mutant: np.ndarray, cross_mask: np.ndarray, j_rand: int
) -> np.ndarray:
    """Mix mutant coordinates into the target where the mask fires;
    coordinate j_rand always comes from the mutant."""
    mask = cross_mask.copy()
    mask[j_rand] = True
    return np.where(mask, mutant, target)


def _distinct_indices(rng: np.random.Generator, pop_size: int, target: int) -> tuple[int, int, int]:
    r1 = r2 = r3 = target
    while r1 == target:
        r1 = int(rng.integers(pop_size))
    while r2 == target or r2 == r1:
        r2 = int(rng.integers(pop_size))
    while r3 == target or r3 == r2 or r3 == r1:
        r3 = int(rng.integers(pop_size))
    return r1, r2, r3


def de_step(
    pop: Population, objective: ObjectiveSpec, config: DEConfig, rng: np.random.Generator
) -> Population:
    """One synchronous generation.

    Every trial is built from the incoming population; greedy selection
    (ties to the trial) is applied at generation end. Trials are clipped
    to the bounds, so members never leave the hypercube. Adds NP
    evaluations.
    """
    members, fitness = pop.members, pop.fitness
    np_size, d = members.shape
    if np_size < 4:
        raise ValueError("population must have at least 4 members")
    trials = np.empty_like(members)
    for i in range(np_size):
        r1, r2, r3 = _distinct_indices(rng, np_size, i)
        mutant = rand1_mutant(members, r1, r2, r3, config.f_weight)
        mask = rng.random(d) < config.cr
        j_rand = int(rng.integers(d))
        trial = binomial_crossover(members[i], mutant, mask, j_rand)
        trials[i] = np.clip(trial, config.lo, config.hi)
    trial_fitness = evaluate_batch(objective, trials)
    keep_trial = trial_fitness <= fitness
    new_members = np.where(keep_trial[:, None], trials, members)
    new_fitness = np.where(keep_trial, trial_fitness, fitness)
    return Population(
        members=new_members,
        fitness=new_fitness,
        generation=pop.generation + 1,
        eval_count=pop.eval_count + np_size,
    )


def _de_record(pop: Population, x_star, wall_ms: float) -> IterateRecord:
    b = pop.best_index
    err_sq = None
    if x_star is not None:
        diff = pop.members[b] - x_star
        err_sq = float(diff @ diff)
    return IterateRecord(
        k=pop.generation + 1,
        eval_count=pop.eval_count,
        err_sq=err_sq,
        f_best=float(pop.fitness[b]),
        m_hat=None,
        sigma2=None,
        wall_ms=wall_ms,
    )


def de_run(objective: ObjectiveSpec, config: DEConfig) -> RunTrace:
    """Initialize uniformly in the hypercube and run max_generations
    steps, recording the best member each generation. Deterministic given
    the seed; eval_count ends at NP * (generations + 1)."""
    rng = np.random.default_rng(config.seed)
    d = objective.dim
    members = config.lo + (config.hi - config.lo) * rng.random((config.pop_size, d))
    fitness = evaluate_batch(objective, members)
    pop = Population(members=members, fitness=fitness, generation=0, eval_count=config.pop_size)
    x_star = objective.known_minimizer
    records = [_de_record(pop, x_star, wall_ms=0.0)]
    for _ in range(config.max_generations):
        t0 = time.perf_counter()
        pop = de_step(pop, objective, config, rng)
        records.append(_de_record(pop, x_star, (time.perf_counter() - t0) * 1e3))
    b = pop.best_index
    header = {
        "solver": "de_rand_1_bin",
        "objective": objective.name or "custom",
        "dim": d,
        "np": config.pop_size,
        "f": config.f_weight,
        "cr": config.cr,
        "lo": config.lo,
        "hi": config.hi,
        "seed": config.seed,
        "max_generations": config.max_generations,
    }
    return RunTrace(
        header=header,
        records=records,
        x_final=pop.members[b].copy(),
        x_best=pop.members[b].copy(),
        f_best=float(pop.fitness[b]),
    )
