"""The service's operation layer: one function per endpoint.

Both the HTTP routes and the CLI call these; they translate between wire
models and the engine's types and raise the engine's own exceptions, which
the callers map to HTTP statuses or exit codes.
"""

from __future__ import annotations

from typing import Optional

from .. import analysis
from ..cost import (
    ResourceBudget,
    check_budget,
    device_budget,
    estimate,
    get_profile,
    unbounded_budget,
    with_module_split,
)
from ..evaluate import make_evaluator, oracle_best
from ..space import SearchSpace, genome_from_dict, genome_to_dict, parse_space_document
from . import schemas

DEFAULT_BYTES_PER_WEIGHT = 4  # profiles with 8-bit accelerators override to 1


def load_request_space(document: dict) -> SearchSpace:
    return parse_space_document(document)


def resolve_budget(
    space: SearchSpace,
    device: Optional[str],
    budget_model: Optional[schemas.BudgetModel],
    bytes_per_weight: Optional[int],
    split_fractions: Optional[dict[str, float]] = None,
) -> tuple[ResourceBudget, int]:
    """Turn request-level budget settings into an engine budget.

    Precedence: explicit budget document > device profile > unbounded. The
    per-module split defaults to equal shares when a device profile is used
    and none is given.
    """
    if budget_model is not None:
        budget = ResourceBudget.from_dict(budget_model.model_dump())
        bpw = bytes_per_weight if bytes_per_weight is not None else DEFAULT_BYTES_PER_WEIGHT
        return budget, bpw
    if device is not None:
        profile = get_profile(device)
        budget = with_module_split(
            device_budget(profile), list(space.module_order), split_fractions
        )
        bpw = bytes_per_weight if bytes_per_weight is not None else profile.bytes_per_weight
        return budget, bpw
    bpw = bytes_per_weight if bytes_per_weight is not None else DEFAULT_BYTES_PER_WEIGHT
    return unbounded_budget(), bpw


def validate_space_op(request: schemas.SpaceValidateRequest) -> schemas.SpaceValidateResponse:
    space = load_request_space(request.space)
    return schemas.SpaceValidateResponse(
        space_hash=space.space_hash,
        cardinality=space.cardinality,
        modules={
            name: schemas.ModuleSummary(axes=len(ms.axes), cardinality=ms.cardinality)
            for name, ms in space.modules.items()
        },
    )


def estimate_op(request: schemas.EstimateRequest) -> schemas.EstimateResponse:
    space = load_request_space(request.space)
    genome = genome_from_dict(space, request.genome)
    budget, bpw = resolve_budget(space, request.device, request.budget, request.bytes_per_weight)
    report = estimate(space, genome, bytes_per_weight=bpw)
    verdict = check_budget(report, budget)
    return schemas.EstimateResponse(
        report=report.to_dict(),
        verdict=schemas.VerdictModel(**verdict.to_dict()),
        bytes_per_weight=bpw,
    )


def oracle_op(request: schemas.OracleRequest) -> schemas.OracleResponse:
    space = load_request_space(request.space)
    evaluator = make_evaluator(space, request.evaluator)
    try:
        genome, fitness = oracle_best(space, evaluator, cap=request.cap)
    finally:
        evaluator.close()
    return schemas.OracleResponse(
        genome=genome_to_dict(genome), fitness=fitness, evaluations=space.cardinality
    )


def stats_op(request: schemas.StatsRequest) -> schemas.StatsResponse:
    space = load_request_space(request.space)
    budget, bpw = resolve_budget(space, request.device, request.budget, None)
    if request.device is None and request.budget is None:
        budget = None  # no filtering requested
    evaluator = make_evaluator(space, request.evaluator)
    reports = []
    try:
        for condition in request.conditions:
            if condition.kind == "joint":
                reports.append(
                    analysis.sample_stats(
                        space, n=request.n, evaluator=evaluator, seed=request.seed,
                        budget=budget, bytes_per_weight=bpw, condition=condition.label,
                    )
                )
            elif condition.kind == "fixed":
                if not condition.module or condition.genome is None:
                    raise ValueError("fixed condition needs both module and genome")
                fixed = genome_from_dict(space, condition.genome)
                reports.append(
                    analysis.sample_stats(
                        space, n=request.n, evaluator=evaluator, seed=request.seed,
                        module=condition.module, fixed_complement=fixed,
                        budget=budget, bytes_per_weight=bpw, condition=condition.label,
                    )
                )
            else:
                raise ValueError(f"unknown condition kind {condition.kind!r}")
    finally:
        evaluator.close()

    comparison = None
    comparison_text = None
    if len(reports) >= 2:
        table = analysis.compare_conditions(reports)
        comparison = [schemas.ComparisonRowModel(**row.__dict__) for row in table.rows]
        comparison_text = analysis.comparison_csv(table)
    return schemas.StatsResponse(
        reports=[schemas.StatsReportModel(**r.to_dict()) for r in reports],
        comparison=comparison,
        stats_csv=analysis.stats_csv(reports),
        samples_csv=analysis.samples_csv(reports),
        comparison_csv=comparison_text,
    )
