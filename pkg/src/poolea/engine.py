"""Per-node generational GA: parameters, state and one generation step.

Each generation breeds ``population_size - elite_count`` offspring by
3-tournament selection, uniform crossover (applied with probability
``crossover_rate``) and bit-flip mutation, evaluates them, and keeps the
``elite_count`` best members of the previous population.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgument
from .genome import (
    RngStream,
    individuals,
    bit_flip_mutation_batch,
    random_population,
    tournament_select_batch,
    uniform_crossover_batch,
)
from .problems import ProblemInstance

STOP_FOUND = "found"
STOP_SIGNALED = "signaled"
STOP_BUDGET = "budget"
STOP_REASONS = (STOP_FOUND, STOP_SIGNALED, STOP_BUDGET)


@dataclass(frozen=True)
class EAParams:
    population_size: int = 1000
    tournament_k: int = 3
    per_bit_mutation_rate: Optional[float] = None  # None means 1/L
    crossover_rate: float = 0.5
    elite_count: int = 1
    migration_gap: int = 100
    post_migration_delay_ms: float = 1000.0
    min_evaluations: int = 4_000_000
    max_generations: Optional[int] = None  # None means min_evaluations // population_size

    def __post_init__(self):
        if self.population_size < 2:
            raise InvalidArgument("population_size must be >= 2")
        if self.tournament_k < 1:
            raise InvalidArgument("tournament_k must be >= 1")
        if not 1 <= self.elite_count < self.population_size:
            raise InvalidArgument("elite_count must satisfy 1 <= elite_count < population_size")
        if self.migration_gap < 1:
            raise InvalidArgument("migration_gap must be >= 1")
        if self.per_bit_mutation_rate is not None and not 0.0 <= self.per_bit_mutation_rate <= 1.0:
            raise InvalidArgument("per_bit_mutation_rate must lie in [0, 1]")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise InvalidArgument("crossover_rate must lie in [0, 1]")
        if self.post_migration_delay_ms < 0:
            raise InvalidArgument("post_migration_delay_ms must be >= 0")
        if self.min_evaluations < 1:
            raise InvalidArgument("min_evaluations must be >= 1")
        if self.max_generations is not None and self.max_generations < 1:
            raise InvalidArgument("max_generations must be >= 1")

    def mutation_rate(self, genome_length: int) -> float:
        if self.per_bit_mutation_rate is None:
            return 1.0 / genome_length
        return self.per_bit_mutation_rate

    @property
    def generation_limit(self) -> int:
        if self.max_generations is not None:
            return self.max_generations
        return max(1, self.min_evaluations // self.population_size)

    @property
    def offspring_per_generation(self) -> int:
        return self.population_size - self.elite_count


@dataclass
class NodeState:
    """Population of one node, stored as a genome matrix plus fitness vector."""

    genomes: np.ndarray
    fitness: np.ndarray
    generation: int
    local_evaluations: int
    best_genome: np.ndarray
    best_fitness: float
    best_changed_since_last_migration: bool = True

    @property
    def population(self):
        return individuals(self.genomes, self.fitness)

    @property
    def size(self) -> int:
        return len(self.fitness)

    def copy(self) -> "NodeState":
        return dataclasses.replace(
            self,
            genomes=self.genomes.copy(),
            fitness=self.fitness.copy(),
            best_genome=self.best_genome.copy(),
        )

    def note_candidate_best(self, genome: np.ndarray, fitness: float) -> None:
        if fitness > self.best_fitness:
            self.best_genome = np.array(genome, dtype=np.uint8, copy=True)
            self.best_fitness = float(fitness)
            self.best_changed_since_last_migration = True


@dataclass
class RunResult:
    node_id: str
    solved: bool
    wall_time: float  # ms from node start
    local_evaluations: int
    generations: int
    best_fitness: float
    stop_reason: str
    start_timestamp: float = 0.0  # ms, clock of the run (epoch or virtual)
    error: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.stop_reason not in STOP_REASONS:
            raise InvalidArgument(f"unknown stop reason {self.stop_reason!r}")


def init_node(params: EAParams, problem: ProblemInstance, rng: RngStream) -> NodeState:
    genomes = random_population(params.population_size, problem.genome_length, rng)
    fitness = problem.evaluate_batch(genomes)
    best = int(np.argmax(fitness))
    return NodeState(
        genomes=genomes,
        fitness=fitness,
        generation=0,
        local_evaluations=params.population_size,
        best_genome=genomes[best].copy(),
        best_fitness=float(fitness[best]),
    )


def elite_indices(fitness: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` fittest members, ties to the lowest index."""
    return np.argsort(-fitness, kind="stable")[:count]


def step_generation(
    state: NodeState, params: EAParams, problem: ProblemInstance, rng: RngStream
) -> NodeState:
    """Breed one generation; returns a new state and leaves ``state`` untouched."""
    n_off = params.offspring_per_generation
    parents = tournament_select_batch(state.fitness, params.tournament_k, 2 * n_off, rng)
    mothers = state.genomes[parents[:n_off]]
    fathers = state.genomes[parents[n_off:]]
    children = uniform_crossover_batch(mothers, fathers, rng, rate=params.crossover_rate)
    children = bit_flip_mutation_batch(children, params.mutation_rate(problem.genome_length), rng)
    child_fitness = problem.evaluate_batch(children)

    elite = elite_indices(state.fitness, params.elite_count)
    new = NodeState(
        genomes=np.concatenate([state.genomes[elite], children]),
        fitness=np.concatenate([state.fitness[elite], child_fitness]),
        generation=state.generation + 1,
        local_evaluations=state.local_evaluations + n_off,
        best_genome=state.best_genome.copy(),
        best_fitness=state.best_fitness,
        best_changed_since_last_migration=state.best_changed_since_last_migration,
    )
    top = int(np.argmax(child_fitness))
    new.note_candidate_best(children[top], float(child_fitness[top]))
    return new
