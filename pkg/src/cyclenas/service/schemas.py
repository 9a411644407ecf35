"""Pydantic request/response models for the service surface."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

GenomeDict = dict[str, list[int]]


class SpaceValidateRequest(BaseModel):
    space: dict


class ModuleSummary(BaseModel):
    axes: int
    cardinality: int


class SpaceValidateResponse(BaseModel):
    space_hash: str
    cardinality: int
    modules: dict[str, ModuleSummary]


class BudgetModel(BaseModel):
    tau_total: int
    tau_per_module: dict[str, int] = Field(default_factory=dict)
    max_macs: Optional[int] = None
    max_layers: Optional[int] = None
    max_channels: Optional[int] = None
    max_activation_bytes: Optional[int] = None
    allowed_kernels: Optional[list[int]] = None


class EstimateRequest(BaseModel):
    space: dict
    genome: GenomeDict
    device: Optional[str] = None
    budget: Optional[BudgetModel] = None
    bytes_per_weight: Optional[int] = None


class ViolationModel(BaseModel):
    constraint: str
    measured: object
    allowed: object


class VerdictModel(BaseModel):
    ok: bool
    violations: list[ViolationModel] = Field(default_factory=list)


class EstimateResponse(BaseModel):
    report: dict
    verdict: VerdictModel
    bytes_per_weight: int


class OracleRequest(BaseModel):
    space: dict
    evaluator: str = "synthetic:0"
    cap: int = 1_000_000


class OracleResponse(BaseModel):
    genome: GenomeDict
    fitness: float
    evaluations: int


class StatsCondition(BaseModel):
    kind: str = "joint"  # joint | fixed
    module: Optional[str] = None
    genome: Optional[GenomeDict] = None
    label: Optional[str] = None


class StatsRequest(BaseModel):
    space: dict
    n: int = 100
    seed: int = 0
    evaluator: str = "synthetic:0"
    conditions: list[StatsCondition] = Field(default_factory=lambda: [StatsCondition()])
    device: Optional[str] = None
    budget: Optional[BudgetModel] = None


class StatsReportModel(BaseModel):
    condition: str
    n: int
    mean: float
    std: float
    variance: float
    variance_divisor: str
    space_hash: str


class ComparisonRowModel(BaseModel):
    condition: str
    n: int
    mean: float
    mean_delta: float
    variance: float
    variance_ratio: float


class StatsResponse(BaseModel):
    reports: list[StatsReportModel]
    comparison: Optional[list[ComparisonRowModel]] = None
    stats_csv: str
    samples_csv: str
    comparison_csv: Optional[str] = None


class RunRequest(BaseModel):
    space: Optional[dict] = None
    space_path: Optional[str] = None
    seed: int = 0
    evaluator: str = "synthetic:0"
    total_generation_budget: int = 30
    generations_per_phase: int = 5
    passthrough_ratio: float = 0.6
    module_order: Optional[list[str]] = None
    population_size: int = 100
    parent_ratio: float = 0.25
    mutation_prob: float = 0.2
    mutation_ratio: float = 0.5
    max_variation_attempts: int = 100
    device: Optional[str] = None
    budget: Optional[BudgetModel] = None
    bytes_per_weight: Optional[int] = None
    workers: int = 1
    out_dir: Optional[str] = None


class ConvergenceModel(BaseModel):
    converged_generation: int
    final_best: float
    mode: str


class RunStatusResponse(BaseModel):
    run_id: str
    state: str  # pending | running | completed | failed
    run_dir: str
    space_hash: Optional[str] = None
    generations_done: int = 0
    total_generation_budget: Optional[int] = None
    best_fitness: Optional[float] = None
    best_genome: Optional[GenomeDict] = None
    convergence: Optional[ConvergenceModel] = None
    error: Optional[str] = None


class RunListResponse(BaseModel):
    runs: list[RunStatusResponse]


class ErrorResponse(BaseModel):
    detail: str
