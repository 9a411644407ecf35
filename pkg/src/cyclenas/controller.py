"""Outer search loop: cyclic module alternation with checkpointed state.

The controller repeatedly runs single-module evolution phases in a fixed
module order, feeding each phase the current complementary assignment, the
module's passthrough buffer and the incumbent assignment (injected into the
initial population so a phase can never end worse than it started). After a
phase, the module's assignment moves to the phase best and the buffer is
replaced with the phase's final ranking.

State is checkpointed after every generation, the atomic unit of work, so a
run killed at any point resumes into exactly the trajectory the
uninterrupted run would have taken: streams are derived from (seed, cycle,
phase, generation, slot) coordinates, never from mutable RNG state.

Run directory layout: ``config.json`` (frozen inputs), ``history.csv``,
``checkpoint.json`` (latest, atomic rename), ``best_genome.json``,
``convergence.json``. Every document carries a version and the space hash.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .cost import ResourceBudget, check_budget, estimate
from .evaluate import CachingEvaluator, Evaluator, make_evaluator
from .evolution import (
    Candidate,
    EvolutionConfig,
    GenerationStats,
    InfeasibleSampleError,
    PhaseSetup,
    run_phase,
)
from .passthrough import PassthroughBuffer
from .rng import fnv1a64, stream_for
from .space import (
    Genome,
    ModuleGenome,
    SearchSpace,
    genome_key,
    genome_to_dict,
    load_space,
    sample_random_genome,
    serialize_space,
)

logger = logging.getLogger(__name__)

RUN_FORMAT_VERSION = 1
CHECKPOINT_VERSION = 1

P_INITIAL_ASSIGNMENT = 0x20

CONFIG_FILE = "config.json"
SPACE_FILE = "space.json"
HISTORY_FILE = "history.csv"
CHECKPOINT_FILE = "checkpoint.json"
BEST_FILE = "best_genome.json"
CONVERGENCE_FILE = "convergence.json"

HISTORY_HEADER = "cycle,phase_module,generation,best_fitness,mean_fitness,evaluations,feasible_rejections"


class CheckpointError(RuntimeError):
    """Checkpoint/config mismatch or version problem on resume."""


@dataclass(frozen=True)
class ScheduleConfig:
    """Run-level schedule: alternation order, budget and master seed.

    ``generations_per_phase`` here is authoritative during a full search;
    the matching field on :class:`EvolutionConfig` only serves standalone
    phase runs.
    """

    total_generation_budget: int
    seed: int
    module_order: Optional[tuple[str, ...]] = None
    generations_per_phase: int = 5
    passthrough_ratio: float = 0.6

    def __post_init__(self):
        if self.generations_per_phase < 1:
            raise ValueError("generations_per_phase must be >= 1")
        if self.total_generation_budget < self.generations_per_phase:
            raise ValueError(
                f"total_generation_budget {self.total_generation_budget} is below "
                f"generations_per_phase {self.generations_per_phase}"
            )
        if not 0.0 <= self.passthrough_ratio <= 1.0:
            raise ValueError(f"passthrough_ratio must be in [0, 1], got {self.passthrough_ratio}")

    def resolve_order(self, space: SearchSpace) -> tuple[str, ...]:
        if self.module_order is None:
            return space.module_order
        if sorted(self.module_order) != sorted(space.modules):
            raise ValueError(
                f"module_order {list(self.module_order)} must cover the space modules "
                f"{list(space.module_order)} exactly once"
            )
        return self.module_order

    def to_dict(self) -> dict:
        return {
            "total_generation_budget": self.total_generation_budget,
            "seed": self.seed,
            "module_order": list(self.module_order) if self.module_order else None,
            "generations_per_phase": self.generations_per_phase,
            "passthrough_ratio": self.passthrough_ratio,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "ScheduleConfig":
        order = obj.get("module_order")
        return cls(
            total_generation_budget=obj["total_generation_budget"],
            seed=obj["seed"],
            module_order=tuple(order) if order else None,
            generations_per_phase=obj.get("generations_per_phase", 5),
            passthrough_ratio=obj.get("passthrough_ratio", 0.6),
        )


@dataclass(frozen=True)
class ConvergenceReport:
    converged_generation: int
    final_best: float
    mode: str = "relative"

    def to_dict(self) -> dict:
        return {
            "converged_generation": self.converged_generation,
            "final_best": self.final_best,
            "mode": self.mode,
        }


def detect_convergence(best_history: Sequence[float], mode: str = "relative") -> ConvergenceReport:
    """First generation whose best fitness is within 1% of the final value.

    ``relative`` (default) uses a multiplicative threshold of 0.99 * final;
    ``absolute`` uses final - 0.01.
    """
    if not best_history:
        raise ValueError("cannot detect convergence on an empty history")
    final = best_history[-1]
    if mode == "relative":
        threshold = 0.99 * final
    elif mode == "absolute":
        threshold = final - 0.01
    else:
        raise ValueError(f"unknown convergence mode {mode!r}")
    for g, value in enumerate(best_history):
        if value >= threshold:
            return ConvergenceReport(converged_generation=g, final_best=final, mode=mode)
    return ConvergenceReport(converged_generation=len(best_history) - 1, final_best=final, mode=mode)


@dataclass(frozen=True)
class HistoryRow:
    cycle: int
    phase_module: str
    generation: int
    best_fitness: float
    mean_fitness: float
    evaluations: int
    feasible_rejections: int

    def to_csv(self) -> str:
        return (
            f"{self.cycle},{self.phase_module},{self.generation},"
            f"{self.best_fitness!r},{self.mean_fitness!r},"
            f"{self.evaluations},{self.feasible_rejections}"
        )

    def to_dict(self) -> dict:
        return {
            "cycle": self.cycle,
            "phase_module": self.phase_module,
            "generation": self.generation,
            "best_fitness": self.best_fitness,
            "mean_fitness": self.mean_fitness,
            "evaluations": self.evaluations,
            "feasible_rejections": self.feasible_rejections,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "HistoryRow":
        return cls(**{k: obj[k] for k in (
            "cycle", "phase_module", "generation", "best_fitness",
            "mean_fitness", "evaluations", "feasible_rejections",
        )})


@dataclass
class InPhaseState:
    """Continuation data for a phase interrupted between generations."""

    module: str
    next_generation: int
    phase_generations: int
    population: list[tuple[tuple[int, ...], float]]  # (module genes, fitness)

    def to_dict(self) -> dict:
        return {
            "module": self.module,
            "next_generation": self.next_generation,
            "phase_generations": self.phase_generations,
            "population": [{"genes": list(g), "fitness": f} for g, f in self.population],
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "InPhaseState":
        return cls(
            module=obj["module"],
            next_generation=obj["next_generation"],
            phase_generations=obj["phase_generations"],
            population=[(tuple(e["genes"]), e["fitness"]) for e in obj["population"]],
        )


@dataclass
class SearchState:
    """Complete, serializable engine state at a generation boundary."""

    space_hash: str
    config_digest: str
    seed: int
    cycle: int = 0
    phase_index: int = 0
    generations_done: int = 0
    assignments: dict[str, ModuleGenome] = field(default_factory=dict)
    buffers: dict[str, PassthroughBuffer] = field(default_factory=dict)
    best_genome: Optional[Genome] = None
    best_fitness: Optional[float] = None
    history: list[HistoryRow] = field(default_factory=list)
    in_phase: Optional[InPhaseState] = None
    completed: bool = False

    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "space_hash": self.space_hash,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "cycle": self.cycle,
            "phase_index": self.phase_index,
            "generations_done": self.generations_done,
            "assignments": {m: list(g.genes) for m, g in sorted(self.assignments.items())},
            "buffers": {m: b.to_dict() for m, b in sorted(self.buffers.items())},
            "best": (
                {"genome": genome_to_dict(self.best_genome), "fitness": self.best_fitness}
                if self.best_genome is not None
                else None
            ),
            "history": [row.to_dict() for row in self.history],
            "in_phase": self.in_phase.to_dict() if self.in_phase else None,
            "completed": self.completed,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "SearchState":
        if obj.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"checkpoint version {obj.get('version')!r} not supported (expected {CHECKPOINT_VERSION})"
            )
        best = obj.get("best")
        state = cls(
            space_hash=obj["space_hash"],
            config_digest=obj["config_digest"],
            seed=obj["seed"],
            cycle=obj["cycle"],
            phase_index=obj["phase_index"],
            generations_done=obj["generations_done"],
            assignments={
                m: ModuleGenome(module=m, genes=tuple(genes))
                for m, genes in obj["assignments"].items()
            },
            buffers={m: PassthroughBuffer.from_dict(b) for m, b in obj["buffers"].items()},
            history=[HistoryRow.from_dict(r) for r in obj["history"]],
            in_phase=InPhaseState.from_dict(obj["in_phase"]) if obj.get("in_phase") else None,
            completed=obj.get("completed", False),
        )
        if best is not None:
            state.best_genome = Genome(
                {m: ModuleGenome(module=m, genes=tuple(genes)) for m, genes in best["genome"].items()}
            )
            state.best_fitness = best["fitness"]
        return state

    def best_curve(self) -> list[float]:
        """Running maximum of per-generation population bests."""
        curve: list[float] = []
        current = float("-inf")
        for row in self.history:
            current = max(current, row.best_fitness)
            curve.append(current)
        return curve


def checkpoint_save(state: SearchState, path) -> None:
    """Atomically write a checkpoint (tmp file + rename)."""
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(state.to_dict(), sort_keys=True, indent=1), encoding="utf-8")
    os.replace(tmp, path)


def checkpoint_load(
    path,
    expected_space_hash: Optional[str] = None,
    expected_config_digest: Optional[str] = None,
) -> SearchState:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    state = SearchState.from_dict(json.loads(path.read_text(encoding="utf-8")))
    if expected_space_hash is not None and state.space_hash != expected_space_hash:
        raise CheckpointError(
            f"space hash mismatch: checkpoint {state.space_hash}, current space {expected_space_hash}"
        )
    if expected_config_digest is not None and state.config_digest != expected_config_digest:
        raise CheckpointError(
            f"config digest mismatch: checkpoint {state.config_digest}, current config {expected_config_digest}"
        )
    return state


# ---------------------------------------------------------------------------
# Frozen run configuration
# ---------------------------------------------------------------------------


def config_document(
    space: SearchSpace,
    schedule: ScheduleConfig,
    evolution: EvolutionConfig,
    budget: ResourceBudget,
    evaluator_spec: str,
    bytes_per_weight: int,
    space_path: Optional[str] = None,
) -> dict:
    return {
        "version": RUN_FORMAT_VERSION,
        "space_hash": space.space_hash,
        "space_path": space_path,
        "schedule": schedule.to_dict(),
        "evolution": evolution.to_dict(),
        "budget": budget.to_dict(),
        "evaluator": evaluator_spec,
        "bytes_per_weight": bytes_per_weight,
    }


def config_digest(document: Mapping) -> str:
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return f"{fnv1a64(canonical.encode('utf-8')):016x}"


# ---------------------------------------------------------------------------
# The controller
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    best_genome: Genome
    best_fitness: float
    state: SearchState
    convergence: ConvergenceReport


class SearchController:
    """Drives a full search run, optionally persisting to a run directory."""

    def __init__(
        self,
        space: SearchSpace,
        schedule: ScheduleConfig,
        evolution: EvolutionConfig,
        budget: ResourceBudget,
        evaluator: Evaluator,
        run_dir: Optional[Path] = None,
        bytes_per_weight: int = 1,
        space_path: Optional[str] = None,
        state: Optional[SearchState] = None,
        on_progress=None,
    ):
        self.space = space
        self.on_progress = on_progress
        self.schedule = schedule
        self.evolution = evolution
        self.budget = budget
        self.evaluator = evaluator if isinstance(evaluator, CachingEvaluator) else CachingEvaluator(evaluator)
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.bytes_per_weight = bytes_per_weight
        self.module_order = schedule.resolve_order(space)
        self.config_doc = config_document(
            space, schedule, evolution, budget, self.evaluator.evaluator_id,
            bytes_per_weight, space_path,
        )
        self.digest = config_digest(self.config_doc)
        if state is not None:
            if state.space_hash != space.space_hash:
                raise CheckpointError(
                    f"state space hash {state.space_hash} does not match space {space.space_hash}"
                )
            if state.config_digest != self.digest:
                raise CheckpointError(
                    f"state config digest {state.config_digest} does not match config {self.digest}"
                )
            self.state = state
        else:
            self.state = SearchState(
                space_hash=space.space_hash, config_digest=self.digest, seed=schedule.seed
            )
        self._current_phase_module: Optional[str] = None
        self._current_phase_generations: int = 0

    # -- persistence -------------------------------------------------------

    def _checkpoint_path(self) -> Optional[Path]:
        return self.run_dir / CHECKPOINT_FILE if self.run_dir else None

    def _save_checkpoint(self):
        path = self._checkpoint_path()
        if path is not None:
            checkpoint_save(self.state, path)

    def _write_config(self):
        if self.run_dir is None:
            return
        doc = dict(self.config_doc)
        doc["config_digest"] = self.digest
        (self.run_dir / CONFIG_FILE).write_text(
            json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8"
        )
        # Canonical copy of the space so the run directory is self-contained
        # (resume falls back to it when no external space path was recorded).
        (self.run_dir / SPACE_FILE).write_text(serialize_space(self.space), encoding="utf-8")

    def _rewrite_history_file(self):
        if self.run_dir is None:
            return
        lines = [HISTORY_HEADER] + [row.to_csv() for row in self.state.history]
        (self.run_dir / HISTORY_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def _append_history_row(self, row: HistoryRow):
        if self.run_dir is None:
            return
        with open(self.run_dir / HISTORY_FILE, "a", encoding="utf-8") as fh:
            fh.write(row.to_csv() + "\n")

    def _write_outputs(self, result: SearchResult):
        if self.run_dir is None:
            return
        report = estimate(self.space, result.best_genome, self.bytes_per_weight)
        best_doc = {
            "version": RUN_FORMAT_VERSION,
            "space_hash": self.space.space_hash,
            "genome": genome_to_dict(result.best_genome),
            "fitness": result.best_fitness,
            "cost": report.to_dict(),
            "evaluator": self.evaluator.evaluator_id,
        }
        (self.run_dir / BEST_FILE).write_text(
            json.dumps(best_doc, sort_keys=True, indent=1), encoding="utf-8"
        )
        conv_doc = {"version": RUN_FORMAT_VERSION, "space_hash": self.space.space_hash}
        conv_doc.update(result.convergence.to_dict())
        (self.run_dir / CONVERGENCE_FILE).write_text(
            json.dumps(conv_doc, sort_keys=True, indent=1), encoding="utf-8"
        )

    # -- search ------------------------------------------------------------

    def _initial_assignments(self):
        rng = stream_for(self.schedule.seed, P_INITIAL_ASSIGNMENT)
        last_verdict = None
        for _ in range(self.evolution.max_variation_attempts):
            genome = sample_random_genome(self.space, rng)
            report = estimate(self.space, genome, self.bytes_per_weight)
            verdict = check_budget(report, self.budget)
            if verdict.ok:
                self.state.assignments = dict(genome.assignments)
                return
            last_verdict = verdict
        detail = "; ".join(str(v) for v in (last_verdict.violations if last_verdict else ()))
        raise InfeasibleSampleError(
            f"no feasible initial assignment after {self.evolution.max_variation_attempts} "
            f"attempts (last violations: {detail})"
        )

    def _update_best(self, population: Sequence[Candidate]):
        for candidate in population:
            if self.state.best_genome is None:
                better = True
            else:
                best_key = (-self.state.best_fitness, genome_key(self.space, self.state.best_genome))
                cand_key = (-candidate.fitness, genome_key(self.space, candidate.full_genome))
                better = cand_key < best_key
            if better:
                self.state.best_genome = candidate.full_genome
                self.state.best_fitness = candidate.fitness

    def _on_generation(self, gen_index: int, population: list[Candidate], stats: GenerationStats):
        self.state.generations_done += 1
        row = HistoryRow(
            cycle=self.state.cycle,
            phase_module=self._current_phase_module,
            generation=self.state.generations_done - 1,
            best_fitness=stats.best_fitness,
            mean_fitness=stats.mean_fitness,
            evaluations=stats.evaluations,
            feasible_rejections=stats.feasible_rejections,
        )
        self.state.history.append(row)
        self._append_history_row(row)
        self._update_best(population)
        self.state.in_phase = InPhaseState(
            module=self._current_phase_module,
            next_generation=gen_index + 1,
            phase_generations=self._current_phase_generations,
            population=[(c.module_genome.genes, c.fitness) for c in population],
        )
        self._save_checkpoint()
        if self.on_progress is not None:
            self.on_progress(self.state)

    def _rebuild_population(self, setup: PhaseSetup, in_phase: InPhaseState) -> list[Candidate]:
        population = []
        for genes, fitness in in_phase.population:
            module_genes = ModuleGenome(module=in_phase.module, genes=genes)
            full, report, verdict = setup.feasibility(module_genes)
            if not verdict.ok:
                raise CheckpointError(
                    f"checkpointed candidate violates the budget; checkpoint does not "
                    f"match this configuration ({'; '.join(str(v) for v in verdict.violations)})"
                )
            population.append(
                Candidate(module_genome=module_genes, full_genome=full, fitness=fitness, cost=report)
            )
        return population

    def _phase_setup(self, module: str) -> PhaseSetup:
        complement = {m: g for m, g in self.state.assignments.items() if m != module}
        return PhaseSetup(
            space=self.space,
            module=module,
            complement=complement,
            evaluator=self.evaluator,
            budget=self.budget,
            config=self.evolution,
            seed=self.schedule.seed,
            cycle=self.state.cycle,
            phase_index=self.state.phase_index,
            bytes_per_weight=self.bytes_per_weight,
        )

    def run(self) -> SearchResult:
        fresh = not self.state.assignments
        if fresh:
            if self.run_dir is not None:
                self.run_dir.mkdir(parents=True, exist_ok=True)
            self._write_config()
            self._initial_assignments()
            for module in self.module_order:
                self.state.buffers.setdefault(
                    module,
                    PassthroughBuffer(
                        module=module,
                        capacity=self.evolution.population_size,
                        passthrough_ratio=self.schedule.passthrough_ratio,
                    ),
                )
            self._rewrite_history_file()
            self._save_checkpoint()
        else:
            # Resuming: make the on-disk history authoritative again (rows
            # written after the checkpoint, if any, are regenerated).
            self._rewrite_history_file()

        budget_generations = self.schedule.total_generation_budget
        while self.state.generations_done < budget_generations and not self.state.completed:
            module = self.module_order[self.state.phase_index]
            self._current_phase_module = module
            setup = self._phase_setup(module)
            entering = Genome(dict(self.state.assignments))
            entering_fitness = self.evaluator.evaluate(entering)

            resume = None
            if self.state.in_phase is not None:
                if self.state.in_phase.module != module:
                    raise CheckpointError(
                        f"checkpoint phase module {self.state.in_phase.module!r} does not match "
                        f"schedule position {module!r}"
                    )
                self._current_phase_generations = self.state.in_phase.phase_generations
                resume = (
                    self.state.in_phase.next_generation,
                    self._rebuild_population(setup, self.state.in_phase),
                )
            else:
                self._current_phase_generations = min(
                    self.schedule.generations_per_phase,
                    budget_generations - self.state.generations_done,
                )

            result = run_phase(
                setup,
                buffer=self.state.buffers[module],
                incumbent=self.state.assignments[module],
                generations=self._current_phase_generations,
                on_generation=self._on_generation,
                resume=resume,
            )

            if result.best.fitness < entering_fitness:
                # Unreachable by construction: the incumbent is a protected
                # member of the initial population and parents survive.
                raise RuntimeError(
                    f"phase over {module!r} regressed: {result.best.fitness} < {entering_fitness}"
                )

            self.state.assignments[module] = result.best.module_genome
            self.state.buffers[module].store(result, cycle=self.state.cycle)
            self.state.in_phase = None
            self.state.phase_index += 1
            if self.state.phase_index >= len(self.module_order):
                self.state.phase_index = 0
                self.state.cycle += 1
            self._save_checkpoint()

        self.state.completed = True
        convergence = detect_convergence(self.state.best_curve())
        result = SearchResult(
            best_genome=self.state.best_genome,
            best_fitness=self.state.best_fitness,
            state=self.state,
            convergence=convergence,
        )
        self._save_checkpoint()
        self._write_outputs(result)
        return result


def run_search(
    space: SearchSpace,
    schedule: ScheduleConfig,
    evolution: EvolutionConfig,
    budget: ResourceBudget,
    evaluator: Evaluator,
    run_dir=None,
    bytes_per_weight: int = 1,
    space_path: Optional[str] = None,
    on_progress=None,
) -> SearchResult:
    """Run a complete search from scratch."""
    controller = SearchController(
        space, schedule, evolution, budget, evaluator,
        run_dir=run_dir, bytes_per_weight=bytes_per_weight, space_path=space_path,
        on_progress=on_progress,
    )
    return controller.run()


# ---------------------------------------------------------------------------
# Run-directory level operations (shared by CLI and service)
# ---------------------------------------------------------------------------


def read_run_config(run_dir) -> dict:
    path = Path(run_dir) / CONFIG_FILE
    if not path.exists():
        raise CheckpointError(f"no {CONFIG_FILE} in {run_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_run_space(run_dir, config: Optional[Mapping] = None) -> SearchSpace:
    """The space a run was started with: the recorded external path when it
    is still readable, else the canonical copy inside the run directory."""
    run_dir = Path(run_dir)
    if config is None:
        config = read_run_config(run_dir)
    space_path = config.get("space_path")
    if space_path and Path(space_path).exists():
        return load_space(space_path)
    if (run_dir / SPACE_FILE).exists():
        return load_space(run_dir / SPACE_FILE)
    raise CheckpointError("run config has no readable space document; pass the space explicitly")


def resume_run(run_dir, workers: int = 1, space: Optional[SearchSpace] = None) -> SearchResult:
    """Resume an interrupted run from its directory.

    The stored config digest and space hash must match what is on disk; a
    tampered config or space document refuses to resume.
    """
    run_dir = Path(run_dir)
    doc = read_run_config(run_dir)
    if doc.get("version") != RUN_FORMAT_VERSION:
        raise CheckpointError(f"run format version {doc.get('version')!r} not supported")
    stored_digest = doc.pop("config_digest", None)
    recomputed = config_digest(doc)
    if stored_digest != recomputed:
        raise CheckpointError(
            f"config.json digest mismatch (stored {stored_digest}, recomputed {recomputed}); "
            "refusing to resume a modified run"
        )

    if space is None:
        space = load_run_space(run_dir, doc)
    if space.space_hash != doc["space_hash"]:
        raise CheckpointError(
            f"space hash mismatch: run was started with {doc['space_hash']}, "
            f"current space document hashes to {space.space_hash}"
        )

    schedule = ScheduleConfig.from_dict(doc["schedule"])
    evolution = EvolutionConfig.from_dict(doc["evolution"])
    budget = ResourceBudget.from_dict(doc["budget"])
    evaluator = make_evaluator(space, doc["evaluator"], workers=workers)
    state = checkpoint_load(
        run_dir / CHECKPOINT_FILE,
        expected_space_hash=space.space_hash,
        expected_config_digest=recomputed,
    )
    controller = SearchController(
        space, schedule, evolution, budget, evaluator,
        run_dir=run_dir, bytes_per_weight=doc.get("bytes_per_weight", 1),
        space_path=doc.get("space_path"), state=state,
    )
    try:
        return controller.run()
    finally:
        evaluator.close()


def extract_best(run_dir, space: Optional[SearchSpace] = None) -> dict:
    """Best genome recorded in the latest checkpoint, with a fresh budget
    verdict when the space is available."""
    run_dir = Path(run_dir)
    state = checkpoint_load(run_dir / CHECKPOINT_FILE)
    if state.best_genome is None:
        raise CheckpointError("checkpoint holds no evaluated candidates yet")
    doc = {
        "version": RUN_FORMAT_VERSION,
        "space_hash": state.space_hash,
        "genome": genome_to_dict(state.best_genome),
        "fitness": state.best_fitness,
        "generations_done": state.generations_done,
        "completed": state.completed,
    }
    if space is not None:
        config = read_run_config(run_dir)
        report = estimate(space, state.best_genome, config.get("bytes_per_weight", 1))
        doc["cost"] = report.to_dict()
    return doc
