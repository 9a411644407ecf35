"""Background execution of search runs for the HTTP service.

Each run lives in its own directory under the manager's root and executes
on a worker thread; the engine checkpoints every generation, so a crashed
or killed service can resume any run from disk. Status snapshots are
updated via the controller's progress hook and guarded by a lock.
"""

from __future__ import annotations

import logging
import threading
import traceback
from pathlib import Path
from typing import Optional

from ..controller import (
    BEST_FILE,
    HISTORY_FILE,
    ScheduleConfig,
    read_run_config,
    resume_run,
    run_search,
)
from ..evaluate import make_evaluator
from ..evolution import EvolutionConfig
from ..space import load_space, parse_space_document
from . import schemas
from .operations import resolve_budget

logger = logging.getLogger(__name__)


class JobError(RuntimeError):
    pass


def build_run_inputs(request: schemas.RunRequest):
    """Translate a run request into engine inputs."""
    if request.space is not None:
        space = parse_space_document(request.space)
        space_path = request.space_path
    elif request.space_path:
        space = load_space(request.space_path)
        space_path = request.space_path
    else:
        raise ValueError("run request needs either an inline space or a space_path")
    schedule = ScheduleConfig(
        total_generation_budget=request.total_generation_budget,
        seed=request.seed,
        module_order=tuple(request.module_order) if request.module_order else None,
        generations_per_phase=request.generations_per_phase,
        passthrough_ratio=request.passthrough_ratio,
    )
    evolution = EvolutionConfig(
        population_size=request.population_size,
        parent_ratio=request.parent_ratio,
        mutation_prob=request.mutation_prob,
        mutation_ratio=request.mutation_ratio,
        max_variation_attempts=request.max_variation_attempts,
    )
    budget, bytes_per_weight = resolve_budget(
        space, request.device, request.budget, request.bytes_per_weight
    )
    return space, schedule, evolution, budget, bytes_per_weight, space_path


def execute_run(request: schemas.RunRequest, run_dir: Path, on_progress=None):
    """Run a search synchronously into ``run_dir`` (shared by CLI and jobs)."""
    space, schedule, evolution, budget, bpw, space_path = build_run_inputs(request)
    evaluator = make_evaluator(space, request.evaluator, workers=request.workers)
    try:
        return run_search(
            space, schedule, evolution, budget, evaluator,
            run_dir=run_dir, bytes_per_weight=bpw, space_path=space_path,
            on_progress=on_progress,
        )
    finally:
        evaluator.close()


class RunJob:
    def __init__(self, run_id: str, run_dir: Path, total_budget: Optional[int]):
        self.run_id = run_id
        self.run_dir = run_dir
        self.lock = threading.Lock()
        self.state = "pending"
        self.generations_done = 0
        self.total_budget = total_budget
        self.best_fitness: Optional[float] = None
        self.best_genome: Optional[dict] = None
        self.space_hash: Optional[str] = None
        self.convergence: Optional[dict] = None
        self.error: Optional[str] = None
        self.thread: Optional[threading.Thread] = None

    def snapshot(self) -> schemas.RunStatusResponse:
        with self.lock:
            return schemas.RunStatusResponse(
                run_id=self.run_id,
                state=self.state,
                run_dir=str(self.run_dir),
                space_hash=self.space_hash,
                generations_done=self.generations_done,
                total_generation_budget=self.total_budget,
                best_fitness=self.best_fitness,
                best_genome=self.best_genome,
                convergence=(
                    schemas.ConvergenceModel(**self.convergence) if self.convergence else None
                ),
                error=self.error,
            )

    def _on_progress(self, state):
        from ..space import genome_to_dict

        with self.lock:
            self.generations_done = state.generations_done
            self.space_hash = state.space_hash
            if state.best_genome is not None:
                self.best_fitness = state.best_fitness
                self.best_genome = genome_to_dict(state.best_genome)

    def run(self, target, *args):
        def body():
            with self.lock:
                self.state = "running"
            try:
                result = target(*args, self._on_progress)
            except Exception as exc:  # surfaced through the status endpoint
                logger.error("run %s failed: %s", self.run_id, exc)
                logger.debug("%s", traceback.format_exc())
                with self.lock:
                    self.state = "failed"
                    self.error = f"{type(exc).__name__}: {exc}"
                return
            from ..space import genome_to_dict

            with self.lock:
                self.state = "completed"
                self.best_fitness = result.best_fitness
                self.best_genome = genome_to_dict(result.best_genome)
                self.generations_done = result.state.generations_done
                self.convergence = result.convergence.to_dict()

        self.thread = threading.Thread(target=body, name=f"run-{self.run_id}", daemon=True)
        self.thread.start()


class RunManager:
    def __init__(self, runs_root: Path):
        self.runs_root = Path(runs_root)
        self.runs_root.mkdir(parents=True, exist_ok=True)
        self._jobs: dict[str, RunJob] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def _new_run_id(self) -> str:
        with self._lock:
            while True:
                self._counter += 1
                run_id = f"run-{self._counter:04d}"
                if run_id not in self._jobs and not (self.runs_root / run_id).exists():
                    return run_id

    def start(self, request: schemas.RunRequest) -> RunJob:
        if request.out_dir:
            run_dir = Path(request.out_dir)
            run_id = run_dir.name
            if run_id in self._jobs:
                raise JobError(f"run {run_id!r} already managed")
        else:
            run_id = self._new_run_id()
            run_dir = self.runs_root / run_id
        if run_dir.exists() and any(run_dir.iterdir()):
            raise JobError(f"output directory {run_dir} is not empty")
        job = RunJob(run_id, run_dir, request.total_generation_budget)
        with self._lock:
            self._jobs[run_id] = job

        def target(on_progress):
            return execute_run(request, run_dir, on_progress)

        job.run(target)
        return job

    def resume(self, run_id: str, workers: int = 1) -> RunJob:
        existing = self._jobs.get(run_id)
        if existing is not None and existing.state in ("pending", "running"):
            raise JobError(f"run {run_id!r} is still active")
        run_dir = existing.run_dir if existing is not None else self.runs_root / run_id
        config = read_run_config(run_dir)  # raises if absent
        job = RunJob(run_id, run_dir, config["schedule"]["total_generation_budget"])
        with self._lock:
            self._jobs[run_id] = job

        def target(on_progress):
            return resume_run(run_dir, workers=workers)

        job.run(target)
        return job

    def get(self, run_id: str) -> RunJob:
        job = self._jobs.get(run_id)
        if job is None:
            raise KeyError(f"unknown run {run_id!r}")
        return job

    def list(self) -> list[RunJob]:
        with self._lock:
            return sorted(self._jobs.values(), key=lambda j: j.run_id)

    def history_path(self, run_id: str) -> Path:
        return self.get(run_id).run_dir / HISTORY_FILE

    def best_path(self, run_id: str) -> Path:
        return self.get(run_id).run_dir / BEST_FILE

    def wait(self, run_id: str, timeout: Optional[float] = None):
        job = self.get(run_id)
        if job.thread is not None:
            job.thread.join(timeout)
