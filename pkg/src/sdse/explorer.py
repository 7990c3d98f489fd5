"""Genetic-algorithm design explorer.

Evolves a population of mappings with elitism, tournament selection,
one-point crossover and per-gene uniform mutation. Fitness of a whole
population is evaluated as one work-pool batch — one job per individual over
the current scenario subset — so evaluation parallelism never changes the
results. The explorer adopts a new scenario subset only at generation
boundaries and re-stamps fitness with the subset version, so fitness from an
outdated subset is never compared against fresh fitness.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from typing import Sequence

from .evaluator import Fitness, evaluate_mapping, full_subset
from .model import Mapping, SystemSpec, random_mapping
from .workpool import JobError

# distinct per-generation mappings offered to the subset selector as
# training candidates (best first)
TRAINING_CANDIDATES_PER_GENERATION = 4


@dataclass
class Individual:
    """A mapping plus its fitness under some scenario-subset version.

    fitness is None until evaluated; fitness_version records the subset
    version the fitness belongs to (-1 = full scenario set).
    """

    mapping: Mapping
    fitness: Fitness | None = None
    fitness_version: int = -1

    def sort_key(self) -> tuple[float, tuple[int, ...]]:
        """Lower is better; ties break on lexicographic genes."""
        return (self.fitness.value, self.mapping.genes)


@dataclass(frozen=True)
class GaParams:
    generations: int
    seed: int
    population_size: int = 32
    tournament_size: int = 2
    crossover_rate: float = 0.9
    mutation_rate: float = 0.05
    elitism: int = 1

    def __post_init__(self):
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must be in [0, 1]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if not 0 <= self.elitism < self.population_size:
            raise ValueError("elitism must satisfy 0 <= elitism < population_size")


def init_population(
    spec: SystemSpec, params: GaParams, rng: random.Random | None = None
) -> list[Individual]:
    """Random initial population; deterministic for a given seed."""
    if rng is None:
        rng = random.Random(params.seed)
    return [Individual(mapping=random_mapping(spec, rng)) for _ in range(params.population_size)]


def evaluate_population(
    population: list[Individual],
    subset: Sequence[int],
    pool,
    subset_version: int = 0,
) -> list[Individual]:
    """Evaluate the whole population as one batch: job i is individual i.

    A failed job becomes an error fitness (worst possible value) on that
    individual instead of aborting the batch. Results are written by job
    index, so they do not depend on the pool's worker count.
    """
    if len(subset) == 0:
        raise ValueError("empty scenario subset")
    subset = tuple(subset)
    jobs = [(ind.mapping.genes, subset) for ind in population]
    results = pool.submit_batch(jobs)
    for ind, res in zip(population, results):
        ind.fitness = Fitness.error() if isinstance(res, JobError) else res
        ind.fitness_version = subset_version
    return population


def _tournament(
    population: list[Individual], params: GaParams, rng: random.Random
) -> Individual:
    contenders = [population[rng.randrange(len(population))] for _ in range(params.tournament_size)]
    return min(contenders, key=Individual.sort_key)


def next_generation(
    spec: SystemSpec,
    population: list[Individual],
    params: GaParams,
    rng: random.Random,
) -> list[Individual]:
    """Breed the next population: elites copied unchanged, the rest from
    tournament selection, one-point crossover and per-gene uniform mutation."""
    for ind in population:
        if ind.fitness is None:
            raise ValueError("unevaluated individual in population")
    ranked = sorted(population, key=Individual.sort_key)
    out: list[Individual] = [
        Individual(mapping=e.mapping, fitness=e.fitness, fitness_version=e.fitness_version)
        for e in ranked[: params.elitism]
    ]
    n_proc = spec.n_processors
    n_genes = len(spec.processes)
    while len(out) < params.population_size:
        p1 = _tournament(population, params, rng)
        p2 = _tournament(population, params, rng)
        g1, g2 = list(p1.mapping.genes), list(p2.mapping.genes)
        if n_genes >= 2 and rng.random() < params.crossover_rate:
            point = rng.randrange(1, n_genes)
            g1, g2 = g1[:point] + g2[point:], g2[:point] + g1[point:]
        for child in (g1, g2):
            if len(out) >= params.population_size:
                break
            if params.mutation_rate > 0.0:
                for i in range(n_genes):
                    if rng.random() < params.mutation_rate:
                        child[i] = rng.randrange(n_proc)
            out.append(Individual(mapping=Mapping(genes=tuple(child))))
    return out


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    subset_version: int
    wall_ns: int


@dataclass
class ExplorerResult:
    best: Individual  # best-ever candidate, fitness on the full scenario set
    history: list[GenerationStats] = field(default_factory=list)


def run_explorer(
    spec: SystemSpec,
    params: GaParams,
    subset_provider,
    pool,
) -> ExplorerResult:
    """Run the GA: evaluate, record, breed, for ``generations`` iterations.

    Before each evaluation the latest subset snapshot is pulled from the
    provider; the per-generation best mappings are offered back as training
    candidates, and in sync mode the provider runs one selection pass per
    generation. The returned best individual is validated on the full
    scenario set, whatever subset was used along the way.
    """
    rng = random.Random(params.seed)
    population = init_population(spec, params, rng)
    history: list[GenerationStats] = []
    candidates: dict[tuple[int, ...], Mapping] = {}

    for gen in range(params.generations):
        t0 = time.perf_counter_ns()
        snap = subset_provider.latest()
        evaluate_population(population, snap.indices, pool, snap.version)
        ranked = sorted(population, key=Individual.sort_key)
        best = ranked[0]
        candidates[best.mapping.genes] = best.mapping
        offer: list[Mapping] = []
        seen: set[tuple[int, ...]] = set()
        for ind in ranked:
            if ind.mapping.genes not in seen:
                seen.add(ind.mapping.genes)
                offer.append(ind.mapping)
            if len(offer) >= TRAINING_CANDIDATES_PER_GENERATION:
                break
        subset_provider.submit_training(offer)
        mean = sum(ind.fitness.value for ind in population) / len(population)
        history.append(
            GenerationStats(
                generation=gen,
                best_fitness=best.fitness.value,
                mean_fitness=mean,
                subset_version=snap.version,
                wall_ns=time.perf_counter_ns() - t0,
            )
        )
        subset_provider.generation_tick()
        population = next_generation(spec, population, params, rng)

    # final validation pass: judge the collected candidates on the full set
    if not candidates:
        for ind in population:
            candidates.setdefault(ind.mapping.genes, ind.mapping)
    final = list(candidates.values())
    full = full_subset(spec)
    results = pool.submit_batch([(m.genes, full) for m in final])
    best_idx = min(
        range(len(final)),
        key=lambda i: (_result_value(results[i]), final[i].genes),
    )
    best_fit = results[best_idx]
    if isinstance(best_fit, JobError):
        best_fit = Fitness.error()
    best = Individual(mapping=final[best_idx], fitness=best_fit, fitness_version=-1)
    return ExplorerResult(best=best, history=history)


def _result_value(result) -> float:
    return float("inf") if isinstance(result, JobError) else result.value


@dataclass(frozen=True)
class BruteForceResult:
    mapping: Mapping
    fitness: Fitness
    evaluated: int


def brute_force_optimum(
    spec: SystemSpec,
    aggregate: str = "average",
    cap: int = 10**6,
) -> BruteForceResult:
    """Exact optimum over the full scenario set by full enumeration.

    Mappings are enumerated in lexicographic gene order, so ties naturally
    resolve to the lexicographically smallest gene vector. Refuses design
    spaces larger than ``cap``.
    """
    n_proc = spec.n_processors
    n_genes = len(spec.processes)
    space = n_proc**n_genes
    if space > cap:
        raise ValueError(
            f"design space has {space} mappings (> cap {cap}); use the explorer instead"
        )
    full = full_subset(spec)
    best_genes: tuple[int, ...] | None = None
    best_fit: Fitness | None = None
    count = 0
    for genes in itertools.product(range(n_proc), repeat=n_genes):
        fit = evaluate_mapping(spec, Mapping(genes=genes), full, aggregate)
        count += 1
        if best_fit is None or fit.value < best_fit.value:
            best_genes, best_fit = genes, fit
    return BruteForceResult(mapping=Mapping(genes=best_genes), fitness=best_fit, evaluated=count)


def write_history_csv(history: Sequence[GenerationStats], path: str, no_timing: bool = False) -> None:
    """Emit the per-generation history as CSV."""
    lines = ["generation,best_fitness,mean_fitness,subset_version,wall_ns"]
    for row in history:
        wall = 0 if no_timing else row.wall_ns
        lines.append(
            f"{row.generation},{row.best_fitness!r},{row.mean_fitness!r},{row.subset_version},{wall}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
