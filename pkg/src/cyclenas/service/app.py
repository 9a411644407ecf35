"""FastAPI application exposing the search engine."""

from __future__ import annotations

import json
import os
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from .. import __version__
from ..controller import CheckpointError, extract_best
from ..evaluate import PROTOCOL_VERSION, EvaluatorError
from ..evolution import InfeasibleSampleError
from ..space import SpaceError, builtin_space_names, builtin_space_path
from . import operations, schemas
from .jobs import JobError, RunManager

DEFAULT_RUNS_ROOT = "runs"


def create_app(runs_root: str | Path | None = None) -> FastAPI:
    app = FastAPI(
        title="cyclenas",
        version=__version__,
        description=(
            "Constraint-aware cyclic evolutionary architecture search: "
            "cost estimation, exhaustive oracles, sampling statistics and "
            "checkpointed search runs."
        ),
    )
    manager = RunManager(Path(runs_root or os.environ.get("CYCLENAS_RUNS_ROOT", DEFAULT_RUNS_ROOT)))
    app.state.run_manager = manager

    @app.exception_handler(SpaceError)
    async def _space_error(_, exc):
        raise HTTPException(status_code=400, detail=str(exc))

    @app.exception_handler(ValueError)
    async def _value_error(_, exc):
        raise HTTPException(status_code=400, detail=str(exc))

    @app.exception_handler(KeyError)
    async def _key_error(_, exc):
        raise HTTPException(status_code=404, detail=str(exc))

    @app.exception_handler(InfeasibleSampleError)
    async def _infeasible(_, exc):
        raise HTTPException(status_code=422, detail=str(exc))

    @app.exception_handler(CheckpointError)
    async def _checkpoint(_, exc):
        raise HTTPException(status_code=409, detail=str(exc))

    @app.exception_handler(EvaluatorError)
    async def _evaluator(_, exc):
        raise HTTPException(status_code=502, detail=str(exc))

    @app.exception_handler(JobError)
    async def _job(_, exc):
        raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__, "protocol_version": PROTOCOL_VERSION}

    @app.get("/spaces/builtin")
    def list_builtin_spaces():
        return {"spaces": builtin_space_names()}

    @app.get("/spaces/builtin/{name}")
    def get_builtin_space(name: str):
        return json.loads(builtin_space_path(name).read_text(encoding="utf-8"))

    @app.post("/spaces/validate", response_model=schemas.SpaceValidateResponse)
    def validate_space(request: schemas.SpaceValidateRequest):
        return operations.validate_space_op(request)

    @app.post("/estimate", response_model=schemas.EstimateResponse)
    def estimate(request: schemas.EstimateRequest):
        return operations.estimate_op(request)

    @app.post("/oracle", response_model=schemas.OracleResponse)
    def oracle(request: schemas.OracleRequest):
        return operations.oracle_op(request)

    @app.post("/stats", response_model=schemas.StatsResponse)
    def stats(request: schemas.StatsRequest):
        return operations.stats_op(request)

    @app.post("/runs", response_model=schemas.RunStatusResponse, status_code=202)
    def start_run(request: schemas.RunRequest):
        return manager.start(request).snapshot()

    @app.get("/runs", response_model=schemas.RunListResponse)
    def list_runs():
        return schemas.RunListResponse(runs=[job.snapshot() for job in manager.list()])

    @app.get("/runs/{run_id}", response_model=schemas.RunStatusResponse)
    def run_status(run_id: str):
        return manager.get(run_id).snapshot()

    @app.get("/runs/{run_id}/history", response_class=PlainTextResponse)
    def run_history(run_id: str):
        path = manager.history_path(run_id)
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"run {run_id!r} has no history yet")
        return path.read_text(encoding="utf-8")

    @app.get("/runs/{run_id}/best")
    def run_best(run_id: str):
        job = manager.get(run_id)
        best_file = manager.best_path(run_id)
        if best_file.exists():
            return json.loads(best_file.read_text(encoding="utf-8"))
        # Mid-run: extract from the latest checkpoint.
        return extract_best(job.run_dir)

    @app.post("/runs/{run_id}/resume", response_model=schemas.RunStatusResponse, status_code=202)
    def resume(run_id: str, workers: int = 1):
        return manager.resume(run_id, workers=workers).snapshot()

    return app
