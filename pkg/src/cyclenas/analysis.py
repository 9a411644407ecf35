"""Search-space quality statistics via constrained random sampling.

Random architectures are drawn either jointly (every module random) or
conditioned on a fixed complementary assignment (one module random, the
rest pinned), evaluated, and summarized as mean / standard deviation /
variance. Comparing the joint distribution against the distribution
conditioned on a post-search incumbent quantifies how much an alternating
search has refined the effective space a module is drawn from.

Variance is the population variance (divisor n), stated in every report;
at the default n=100 the estimator choice matters less than consistency.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from .cost import ResourceBudget, check_budget, estimate
from .evaluate import Evaluator
from .evolution import InfeasibleSampleError
from .rng import stream_for
from .space import Genome, SearchSpace, genome_to_dict, sample_random, sample_random_genome

logger = logging.getLogger(__name__)

P_ANALYSIS_SAMPLE = 0x30

CONDITION_JOINT = "joint"

STATS_HEADER = ["condition", "n", "mean", "std", "variance"]
SAMPLES_HEADER = ["condition", "sample_idx", "fitness", "genome_json"]
COMPARISON_HEADER = ["condition", "n", "mean", "mean_delta", "variance", "variance_ratio"]


@dataclass(frozen=True)
class SampleRecord:
    genome: Genome
    fitness: float


@dataclass(frozen=True)
class SamplingReport:
    condition: str
    n: int
    mean: float
    std: float
    variance: float
    samples: tuple[SampleRecord, ...]
    space_hash: str
    variance_divisor: str = "n"  # population variance

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "n": self.n,
            "mean": self.mean,
            "std": self.std,
            "variance": self.variance,
            "variance_divisor": self.variance_divisor,
            "space_hash": self.space_hash,
        }


def summarize(condition: str, space_hash: str, records: Sequence[SampleRecord]) -> SamplingReport:
    """Two-pass mean/variance so the statistics are recomputable exactly
    from the per-sample records."""
    n = len(records)
    mean = sum(r.fitness for r in records) / n
    variance = sum((r.fitness - mean) ** 2 for r in records) / n
    return SamplingReport(
        condition=condition,
        n=n,
        mean=mean,
        std=variance ** 0.5,
        variance=variance,
        samples=tuple(records),
        space_hash=space_hash,
    )


def sample_stats(
    space: SearchSpace,
    n: int,
    evaluator: Evaluator,
    seed: int,
    module: Optional[str] = None,
    fixed_complement: Optional[Genome] = None,
    budget: Optional[ResourceBudget] = None,
    bytes_per_weight: int = 1,
    condition: Optional[str] = None,
    max_attempts_per_sample: int = 100,
) -> SamplingReport:
    """Draw and evaluate ``n`` feasible genomes and summarize their fitness.

    Joint condition (``module=None``): every module sampled at random.
    Conditioned (``module`` plus ``fixed_complement``): only the named
    module is resampled; every other module is pinned to the complement's
    genes. Samples are constraint-filtered exactly like search candidates
    when a budget is given.
    """
    if n < 2:
        raise ValueError(f"need at least 2 samples for statistics, got {n}")
    if (module is None) != (fixed_complement is None):
        raise ValueError("conditioned sampling needs both module and fixed_complement")

    if condition is None:
        condition = CONDITION_JOINT if module is None else f"fixed-complement[{module}]"

    records: list[SampleRecord] = []
    genomes: list[Genome] = []
    for idx in range(n):
        rng = stream_for(seed, P_ANALYSIS_SAMPLE, idx)
        found = None
        last_verdict = None
        for _ in range(max_attempts_per_sample):
            if module is None:
                genome = sample_random_genome(space, rng)
            else:
                module_genes = sample_random(space.modules[module], rng)
                genome = fixed_complement.replace(module_genes)
            if budget is None:
                found = genome
                break
            verdict = check_budget(estimate(space, genome, bytes_per_weight), budget)
            if verdict.ok:
                found = genome
                break
            last_verdict = verdict
        if found is None:
            detail = "; ".join(str(v) for v in (last_verdict.violations if last_verdict else ()))
            raise InfeasibleSampleError(
                f"no feasible sample for condition {condition!r} after "
                f"{max_attempts_per_sample} attempts (last violations: {detail})"
            )
        genomes.append(found)

    fitnesses = evaluator.evaluate_batch(genomes)
    records = [SampleRecord(genome=g, fitness=f) for g, f in zip(genomes, fitnesses)]
    return summarize(condition, space.space_hash, records)


@dataclass(frozen=True)
class ComparisonRow:
    condition: str
    n: int
    mean: float
    mean_delta: float
    variance: float
    variance_ratio: float


@dataclass(frozen=True)
class ComparisonTable:
    baseline: str
    rows: tuple[ComparisonRow, ...]


def compare_conditions(reports: Sequence[SamplingReport]) -> ComparisonTable:
    """Mean deltas and variance ratios of each report vs the first.

    All reports must come from the same space (hash-checked). A zero
    baseline variance compares as ratio 1 against itself and +inf
    otherwise.
    """
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    hashes = {r.space_hash for r in reports}
    if len(hashes) > 1:
        raise ValueError(f"reports come from different spaces: {sorted(hashes)}")
    base = reports[0]
    rows = []
    for report in reports:
        if base.variance == 0.0:
            ratio = 1.0 if report.variance == 0.0 else float("inf")
        else:
            ratio = report.variance / base.variance
        rows.append(
            ComparisonRow(
                condition=report.condition,
                n=report.n,
                mean=report.mean,
                mean_delta=report.mean - base.mean,
                variance=report.variance,
                variance_ratio=ratio,
            )
        )
    return ComparisonTable(baseline=base.condition, rows=tuple(rows))


# ---------------------------------------------------------------------------
# CSV export / import
# ---------------------------------------------------------------------------


def stats_csv(reports: Sequence[SamplingReport]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(STATS_HEADER)
    for r in reports:
        writer.writerow([r.condition, r.n, repr(r.mean), repr(r.std), repr(r.variance)])
    return out.getvalue()


def samples_csv(reports: Sequence[SamplingReport]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SAMPLES_HEADER)
    for r in reports:
        for idx, record in enumerate(r.samples):
            writer.writerow([
                r.condition, idx, repr(record.fitness),
                json.dumps(genome_to_dict(record.genome), sort_keys=True),
            ])
    return out.getvalue()


def comparison_csv(table: ComparisonTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COMPARISON_HEADER)
    for row in table.rows:
        writer.writerow([
            row.condition, row.n, repr(row.mean), repr(row.mean_delta),
            repr(row.variance), repr(row.variance_ratio),
        ])
    return out.getvalue()


def parse_comparison_csv(text: str) -> ComparisonTable:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != COMPARISON_HEADER:
        raise ValueError(f"unexpected comparison header: {header}")
    rows = [
        ComparisonRow(
            condition=cells[0], n=int(cells[1]), mean=float(cells[2]),
            mean_delta=float(cells[3]), variance=float(cells[4]),
            variance_ratio=float(cells[5]),
        )
        for cells in reader
    ]
    if not rows:
        raise ValueError("comparison table has no rows")
    return ComparisonTable(baseline=rows[0].condition, rows=tuple(rows))
