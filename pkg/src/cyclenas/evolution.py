"""One evolutionary phase: optimize a single module, complement fixed.

A phase owns a population of :class:`Candidate` objects that vary only the
searched module's genes; every candidate's full genome embeds the phase's
fixed complementary assignment, and every candidate is constraint-checked
before it may enter the population. Selection composes each new generation
as ``parents + mutants + crossover children`` with counts
``round(parent_ratio*N)``, ``round(mutation_ratio*N)`` and the remainder,
which reproduces a 25/50/25 split under the default ratios at N=100.

Parents survive verbatim, so the best fitness within a phase never
decreases. Inherited elites and the incumbent are re-evaluated at phase
start: their stored fitness was measured against an older complement and
must not leak into the new conditional objective.

All variation randomness flows through streams keyed by (seed, cycle,
phase index, generation, slot, purpose), so worker scheduling, caching and
resume points cannot perturb a trajectory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

from .cost import BudgetVerdict, CostReport, ResourceBudget, check_budget, estimate
from .evaluate import Evaluator, Fitness
from .passthrough import PassthroughBuffer
from .rng import Stream, stream_for
from .space import (
    Genome,
    ModuleGenome,
    SearchSpace,
    crossover,
    genome_key,
    mutate,
    sample_random,
)

logger = logging.getLogger(__name__)

# Purpose tags for stream derivation (part of the determinism contract).
P_INIT_SAMPLE = 0x10
P_MUTATE = 0x11
P_CROSSOVER = 0x12


class InfeasibleSampleError(RuntimeError):
    """Random sampling could not find a budget-satisfying candidate."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 100
    parent_ratio: float = 0.25
    mutation_prob: float = 0.2
    mutation_ratio: float = 0.5
    max_variation_attempts: int = 100
    generations_per_phase: int = 5

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError(f"population_size must be >= 4, got {self.population_size}")
        if not 0.0 < self.parent_ratio < 1.0:
            raise ValueError(f"parent_ratio must be in (0, 1), got {self.parent_ratio}")
        if not 0.0 <= self.mutation_ratio <= 1.0:
            raise ValueError(f"mutation_ratio must be in [0, 1], got {self.mutation_ratio}")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError(f"mutation_prob must be in [0, 1], got {self.mutation_prob}")
        if self.max_variation_attempts < 1:
            raise ValueError("max_variation_attempts must be >= 1")
        if self.generations_per_phase < 1:
            raise ValueError("generations_per_phase must be >= 1")
        parents, mutants, crossovers = generation_counts(self)
        if parents < 1:
            raise ValueError(f"parent_ratio {self.parent_ratio} yields zero parents at N={self.population_size}")
        if crossovers < 0:
            raise ValueError(
                f"parent_ratio + mutation_ratio leave no room for crossover children "
                f"({parents} + {mutants} > {self.population_size})"
            )

    def to_dict(self) -> dict:
        return {
            "population_size": self.population_size,
            "parent_ratio": self.parent_ratio,
            "mutation_prob": self.mutation_prob,
            "mutation_ratio": self.mutation_ratio,
            "max_variation_attempts": self.max_variation_attempts,
            "generations_per_phase": self.generations_per_phase,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "EvolutionConfig":
        return cls(**{k: obj[k] for k in cls().to_dict() if k in obj})


def generation_counts(config: EvolutionConfig) -> tuple[int, int, int]:
    """(parents, mutants, crossover children) for one generation."""
    n = config.population_size
    parents = round(config.parent_ratio * n)
    mutants = round(config.mutation_ratio * n)
    return parents, mutants, n - parents - mutants


@dataclass(frozen=True)
class Candidate:
    module_genome: ModuleGenome
    full_genome: Genome
    fitness: Fitness
    cost: CostReport


@dataclass(frozen=True)
class GenerationStats:
    best_fitness: float
    mean_fitness: float
    evaluations: int
    feasible_rejections: int


@dataclass(frozen=True)
class PhaseResult:
    module: str
    ranked_population: tuple[Candidate, ...]
    best: Candidate
    history: tuple[GenerationStats, ...]


@dataclass(frozen=True)
class PhaseSetup:
    """Everything a phase needs besides its population."""

    space: SearchSpace
    module: str
    complement: Mapping[str, ModuleGenome]  # fixed genes of every other module
    evaluator: Evaluator
    budget: ResourceBudget
    config: EvolutionConfig
    seed: int
    cycle: int = 0
    phase_index: int = 0
    bytes_per_weight: int = 1

    def full_genome(self, module_genes: ModuleGenome) -> Genome:
        assignments = dict(self.complement)
        assignments[self.module] = module_genes
        return Genome(assignments)

    def feasibility(self, module_genes: ModuleGenome) -> tuple[Genome, CostReport, BudgetVerdict]:
        full = self.full_genome(module_genes)
        report = estimate(self.space, full, self.bytes_per_weight)
        return full, report, check_budget(report, self.budget)


def rank_key(space: SearchSpace, candidate: Candidate):
    """Total order: fitness descending, then lexicographic genes ascending."""
    return (-candidate.fitness, genome_key(space, candidate.full_genome))


def rank_population(space: SearchSpace, population: Sequence[Candidate]) -> list[Candidate]:
    return sorted(population, key=lambda c: rank_key(space, c))


def _assemble(
    setup: PhaseSetup, entries: Sequence[tuple[ModuleGenome, Genome, CostReport]]
) -> list[Candidate]:
    """Evaluate pending genomes in one batch and build candidates."""
    fitnesses = setup.evaluator.evaluate_batch([full for _, full, _ in entries])
    population = []
    for (module_genes, full, report), fitness in zip(entries, fitnesses):
        population.append(
            Candidate(module_genome=module_genes, full_genome=full, fitness=fitness, cost=report)
        )
    return population


def _stats(population: Sequence[Candidate], evaluations: int, rejections: int) -> GenerationStats:
    best = max(c.fitness for c in population)
    mean = sum(c.fitness for c in population) / len(population)
    return GenerationStats(
        best_fitness=best, mean_fitness=mean, evaluations=evaluations, feasible_rejections=rejections
    )


def _sample_feasible(
    setup: PhaseSetup, rng: Stream
) -> tuple[tuple[ModuleGenome, Genome, CostReport], int]:
    """Draw random module genomes until one passes the budget."""
    module_space = setup.space.modules[setup.module]
    rejections = 0
    last_verdict = None
    for _ in range(setup.config.max_variation_attempts):
        genes = sample_random(module_space, rng)
        full, report, verdict = setup.feasibility(genes)
        if verdict.ok:
            return (genes, full, report), rejections
        rejections += 1
        last_verdict = verdict
    detail = "; ".join(str(v) for v in (last_verdict.violations if last_verdict else ()))
    raise InfeasibleSampleError(
        f"no feasible random sample for module {setup.module!r} after "
        f"{setup.config.max_variation_attempts} attempts (last violations: {detail})",
        violations=last_verdict.violations if last_verdict else (),
    )


def init_population(
    setup: PhaseSetup,
    buffer: Optional[PassthroughBuffer] = None,
    incumbent: Optional[ModuleGenome] = None,
) -> tuple[list[Candidate], GenerationStats]:
    """Compose and evaluate the phase's first population.

    Up to ``round(passthrough_ratio * N)`` top-ranked buffer genomes are
    inherited (skipping any that the current complement renders infeasible),
    the incumbent assignment is injected when given (it counts against the
    fresh-sample quota and guarantees the phase cannot end worse than it
    started), and the rest are fresh feasible random samples. Every member,
    inherited ones included, is evaluated against the current complement.
    """
    n = setup.config.population_size
    rejections = 0
    entries: list[tuple[ModuleGenome, Genome, CostReport]] = []

    if buffer is not None and buffer.entries:
        target = min(round(buffer.passthrough_ratio * n), len(buffer.entries))
        if incumbent is not None:
            target = min(target, n - 1)
        for entry in buffer.entries:
            if len(entries) >= target:
                break
            # The incumbent enters separately below; inheriting its duplicate
            # would waste an elite slot.
            if incumbent is not None and entry.module_genome.genes == incumbent.genes:
                continue
            full, report, verdict = setup.feasibility(entry.module_genome)
            if verdict.ok:
                entries.append((entry.module_genome, full, report))
            else:
                rejections += 1

    if incumbent is not None:
        full, report, verdict = setup.feasibility(incumbent)
        if not verdict.ok:
            raise InfeasibleSampleError(
                f"incumbent assignment for module {setup.module!r} violates the budget: "
                + "; ".join(str(v) for v in verdict.violations),
                violations=verdict.violations,
            )
        entries.append((incumbent, full, report))

    fresh_needed = n - len(entries)
    for slot in range(fresh_needed):
        rng = stream_for(setup.seed, P_INIT_SAMPLE, setup.cycle, setup.phase_index, slot)
        entry, rej = _sample_feasible(setup, rng)
        rejections += rej
        entries.append(entry)

    population = _assemble(setup, entries)
    return population, _stats(population, evaluations=len(population), rejections=rejections)


def _pick_two_distinct(rng: Stream, n: int) -> tuple[int, int]:
    if n < 2:
        return 0, 0
    i = rng.randrange(n)
    j = rng.randrange(n - 1)
    if j >= i:
        j += 1
    return i, j


def next_generation(
    setup: PhaseSetup, population: Sequence[Candidate], generation: int
) -> tuple[list[Candidate], GenerationStats]:
    """Advance one generation: select parents, vary, filter, evaluate.

    Offspring failing the budget are redrawn up to ``max_variation_attempts``
    times, then the slot falls back to copying its chosen parent so progress
    is guaranteed. Parents keep their fitness (same complement), so only the
    offspring are evaluated.
    """
    module_space = setup.space.modules[setup.module]
    n_parents, n_mutants, n_cross = generation_counts(setup.config)
    ranked = rank_population(setup.space, population)
    parents = ranked[:n_parents]
    rejections = 0

    offspring: list[tuple[ModuleGenome, Genome, CostReport]] = []

    for slot in range(n_mutants):
        rng = stream_for(setup.seed, P_MUTATE, setup.cycle, setup.phase_index, generation, slot)
        chosen = parents[0]
        produced = None
        for _ in range(setup.config.max_variation_attempts):
            chosen = parents[rng.randrange(n_parents)]
            child = mutate(module_space, chosen.module_genome, setup.config.mutation_prob, rng)
            full, report, verdict = setup.feasibility(child)
            if verdict.ok:
                produced = (child, full, report)
                break
            rejections += 1
        if produced is None:
            logger.debug("mutation slot %d exhausted retries; copying parent", slot)
            produced = (chosen.module_genome, chosen.full_genome, chosen.cost)
        offspring.append(produced)

    for slot in range(n_cross):
        rng = stream_for(setup.seed, P_CROSSOVER, setup.cycle, setup.phase_index, generation, slot)
        first = parents[0]
        produced = None
        for _ in range(setup.config.max_variation_attempts):
            i, j = _pick_two_distinct(rng, n_parents)
            first = parents[i]
            child = crossover(module_space, first.module_genome, parents[j].module_genome, rng)
            full, report, verdict = setup.feasibility(child)
            if verdict.ok:
                produced = (child, full, report)
                break
            rejections += 1
        if produced is None:
            logger.debug("crossover slot %d exhausted retries; copying parent", slot)
            produced = (first.module_genome, first.full_genome, first.cost)
        offspring.append(produced)

    new_members = _assemble(setup, offspring)
    next_pop = list(parents) + new_members
    return next_pop, _stats(next_pop, evaluations=len(new_members), rejections=rejections)


def run_phase(
    setup: PhaseSetup,
    buffer: Optional[PassthroughBuffer] = None,
    incumbent: Optional[ModuleGenome] = None,
    generations: Optional[int] = None,
    on_generation: Optional[Callable[[int, list[Candidate], GenerationStats], None]] = None,
    resume: Optional[tuple[int, list[Candidate]]] = None,
) -> PhaseResult:
    """Run a full phase over one module with the complement fixed.

    ``on_generation(index, population, stats)`` fires after every generation
    (index 0 is the evaluated initial population). ``resume`` continues a
    checkpointed phase from ``(next_generation_index, population)`` and
    reproduces exactly the trajectory an uninterrupted phase would have.
    """
    total = generations if generations is not None else setup.config.generations_per_phase
    if total < 1:
        raise ValueError("a phase needs at least one generation")

    history: list[GenerationStats] = []
    if resume is None:
        population, stats = init_population(setup, buffer=buffer, incumbent=incumbent)
        history.append(stats)
        if on_generation:
            on_generation(0, population, stats)
        start = 1
    else:
        start, population = resume
    for generation in range(start, total):
        population, stats = next_generation(setup, population, generation)
        history.append(stats)
        if on_generation:
            on_generation(generation, population, stats)

    ranked = rank_population(setup.space, population)
    return PhaseResult(
        module=setup.module,
        ranked_population=tuple(ranked),
        best=ranked[0],
        history=tuple(history),
    )
