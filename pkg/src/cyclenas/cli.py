"""Command-line surface. All engine work goes through the same operations
layer the HTTP service uses; the CLI only parses arguments, resolves paths
and formats output.

Exit codes are a stable scripting contract: 0 success, 1 usage or
configuration error, 2 feasibility verdict failure, 3 evaluator/protocol
failure. Every command is fully seeded; nothing reads entropy from the
environment.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .controller import CheckpointError, extract_best, load_run_space, read_run_config, resume_run
from .evaluate import PROTOCOL_VERSION, EvaluatorError
from .evolution import InfeasibleSampleError
from .space import SpaceError, builtin_space_names, builtin_space_path
from .service import schemas
from .service.jobs import execute_run
from .service.operations import estimate_op, oracle_op, stats_op, validate_space_op

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_EVALUATOR = 3


def resolve_space_path(spec: str) -> str:
    """A space argument is a filesystem path or ``builtin:<name>``."""
    if spec.startswith("builtin:"):
        return str(builtin_space_path(spec.split(":", 1)[1]))
    return spec


def load_genome_document(path: str) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return doc["genome"] if "genome" in doc else doc


def echo_json(obj):
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


@click.group(name="cyclenas")
@click.version_option(version=__version__, message=(
    f"cyclenas %(version)s (evaluator wire protocol v{PROTOCOL_VERSION}: "
    "line-delimited JSON hello/eval/result/shutdown over stdio)"
))
def cli():
    """Constraint-aware cyclic evolutionary architecture search.

    External evaluators speak wire protocol v1: line-delimited JSON
    hello/eval/result/shutdown messages over the child process's
    standard streams.
    """


@cli.command()
def spaces():
    """List the space documents shipped with the package."""
    for name in builtin_space_names():
        click.echo(f"builtin:{name}")


@cli.command()
@click.option("--space", "space_spec", required=True, help="Space document path or builtin:<name>.")
def validate(space_spec):
    """Validate a space document and print its hash and cardinality."""
    path = resolve_space_path(space_spec)
    response = validate_space_op(
        schemas.SpaceValidateRequest(space=json.loads(Path(path).read_text(encoding="utf-8")))
    )
    echo_json(response.model_dump())


def _space_doc(space_spec: str) -> dict:
    return json.loads(Path(resolve_space_path(space_spec)).read_text(encoding="utf-8"))


@cli.command()
@click.option("--space", "space_spec", required=True)
@click.option("--genome", "genome_file", required=True, type=click.Path(exists=True))
@click.option("--device", default=None, help="Device profile name (e.g. max78000).")
@click.option("--profiles", "profiles_file", default=None, type=click.Path(exists=True),
              help="JSON registry of additional device profiles.")
@click.option("--budget-file", default=None, type=click.Path(exists=True))
@click.option("--bytes-per-weight", default=None, type=int)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable cost report on stdout.")
def estimate(space_spec, genome_file, device, profiles_file, budget_file, bytes_per_weight, as_json):
    """Cost-estimate a genome and check it against a budget."""
    if profiles_file:
        from .cost import DEVICE_PROFILES, load_profiles

        DEVICE_PROFILES.update(load_profiles(profiles_file))
    budget = None
    if budget_file:
        budget = schemas.BudgetModel(**json.loads(Path(budget_file).read_text(encoding="utf-8")))
    response = estimate_op(
        schemas.EstimateRequest(
            space=_space_doc(space_spec),
            genome=load_genome_document(genome_file),
            device=device,
            budget=budget,
            bytes_per_weight=bytes_per_weight,
        )
    )
    if as_json:
        doc = dict(response.report)
        doc["verdict"] = response.verdict.model_dump()
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        report = response.report
        click.echo(f"params:            {report['params']}")
        click.echo(f"weight bytes:      {report['weight_bytes']} ({response.bytes_per_weight} B/weight)")
        click.echo(f"MACs:              {report['macs']}")
        click.echo(f"layers:            {report['layer_count']}")
        click.echo(f"max channels:      {report['max_channels']}")
        click.echo(f"peak activations:  {report['peak_activation_bytes']} B")
        for module, cost in sorted(report["per_module"].items()):
            click.echo(f"  {module}: {cost['params']} params, {cost['macs']} MACs")
        if response.verdict.ok:
            click.echo("verdict: PASS")
        else:
            click.echo("verdict: FAIL")
            for violation in response.verdict.violations:
                click.echo(f"  {violation.constraint}: measured {violation.measured}, "
                           f"allowed {violation.allowed}")
    if not response.verdict.ok:
        sys.exit(EXIT_INFEASIBLE)


@cli.command()
@click.option("--space", "space_spec", required=True)
@click.option("--evaluator", default="synthetic:0", help="synthetic:<seed> or external:<command>.")
@click.option("--cap", default=1_000_000, type=int, help="Enumeration cap.")
def oracle(space_spec, evaluator, cap):
    """Exhaustively find the best genome (ground truth for small spaces)."""
    response = oracle_op(
        schemas.OracleRequest(space=_space_doc(space_spec), evaluator=evaluator, cap=cap)
    )
    echo_json(response.model_dump())


def _merge_config(config_file, overrides: dict) -> dict:
    merged = {}
    if config_file:
        merged.update(json.loads(Path(config_file).read_text(encoding="utf-8")))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


@cli.command()
@click.option("--space", "space_spec", required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--evaluator", default=None)
@click.option("--seed", default=None, type=int)
@click.option("--config", "config_file", default=None, type=click.Path(exists=True),
              help="JSON file with run settings; explicit flags take precedence.")
@click.option("--budget", "total_generation_budget", default=None, type=int,
              help="Total generation budget across all phases.")
@click.option("--generations-per-phase", default=None, type=int)
@click.option("--passthrough-ratio", default=None, type=float)
@click.option("--population", "population_size", default=None, type=int)
@click.option("--parent-ratio", default=None, type=float)
@click.option("--mutation-prob", default=None, type=float)
@click.option("--mutation-ratio", default=None, type=float)
@click.option("--budget-device", "device", default=None)
@click.option("--budget-file", default=None, type=click.Path(exists=True))
@click.option("--bytes-per-weight", default=None, type=int)
@click.option("--module-order", default=None, help="Comma-separated alternation order.")
@click.option("--workers", default=1, type=int, help="Evaluation fan-out; never changes results.")
def search(space_spec, out_dir, config_file, budget_file, module_order, workers, **flags):
    """Run a full search into a fresh run directory."""
    out_path = Path(out_dir)
    if out_path.exists() and any(out_path.iterdir()):
        raise click.UsageError(f"output directory {out_path} exists and is not empty")
    overrides = dict(flags)
    if module_order:
        overrides["module_order"] = module_order.split(",")
    if budget_file:
        overrides["budget"] = json.loads(Path(budget_file).read_text(encoding="utf-8"))
    merged = _merge_config(config_file, overrides)
    merged.setdefault("seed", 0)
    merged.setdefault("evaluator", "synthetic:0")
    merged["workers"] = workers
    space_path = resolve_space_path(space_spec)
    request = schemas.RunRequest(space_path=space_path, **merged)
    result = execute_run(request, out_path)
    click.echo(f"completed: best fitness {result.best_fitness!r} "
               f"after {result.state.generations_done} generations")
    click.echo(f"converged at generation {result.convergence.converged_generation}")
    click.echo(f"outputs in {out_path}")


@cli.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--workers", default=1, type=int)
def resume(run_dir, workers):
    """Resume an interrupted run from its directory."""
    config = read_run_config(run_dir)
    checkpoint = Path(run_dir) / "checkpoint.json"
    if not checkpoint.exists():
        raise CheckpointError(f"no checkpoint in {run_dir}")
    state = json.loads(checkpoint.read_text(encoding="utf-8"))
    if state.get("completed"):
        click.echo("run already completed; nothing to do")
        return
    result = resume_run(run_dir, workers=workers)
    click.echo(f"completed: best fitness {result.best_fitness!r} "
               f"after {result.state.generations_done} generations")


@cli.command("extract-best")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
def extract_best_cmd(run_dir):
    """Best genome recorded in a run's latest checkpoint."""
    echo_json(extract_best(run_dir, space=load_run_space(run_dir)))


@cli.command()
@click.option("--space", "space_spec", required=True)
@click.option("--n", default=100, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--evaluator", default="synthetic:0")
@click.option("--condition", "conditions", multiple=True, default=("joint",),
              help="'joint', or repeated for multiple conditions.")
@click.option("--fix-from", "fix_from", default=None, type=click.Path(exists=True),
              help="Genome file pinning the complement for a conditioned row.")
@click.option("--module", "module_name", default=None,
              help="Module to resample under the fixed complement.")
@click.option("--device", default=None)
@click.option("--out", "out_dir", default=None, type=click.Path())
def stats(space_spec, n, seed, evaluator, conditions, fix_from, module_name, device, out_dir):
    """Random-sampling fitness statistics, optionally conditioned."""
    condition_models = [
        schemas.StatsCondition(kind=c) for c in conditions if c == "joint"
    ]
    for c in conditions:
        if c != "joint":
            raise click.UsageError(f"unknown condition {c!r} (use 'joint' and/or --fix-from)")
    if (fix_from is None) != (module_name is None):
        raise click.UsageError("--fix-from and --module must be used together")
    if fix_from:
        condition_models.append(
            schemas.StatsCondition(
                kind="fixed", module=module_name, genome=load_genome_document(fix_from),
                label=f"fixed-complement[{module_name}]",
            )
        )
    if not condition_models:
        raise click.UsageError("no sampling condition given")
    response = stats_op(
        schemas.StatsRequest(
            space=_space_doc(space_spec), n=n, seed=seed, evaluator=evaluator,
            conditions=condition_models, device=device,
        )
    )
    click.echo(response.stats_csv, nl=False)
    if response.comparison_csv:
        click.echo(response.comparison_csv, nl=False)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.csv").write_text(response.stats_csv, encoding="utf-8")
        (out / "samples.csv").write_text(response.samples_csv, encoding="utf-8")
        if response.comparison_csv:
            (out / "comparison.csv").write_text(response.comparison_csv, encoding="utf-8")
        click.echo(f"stats written to {out}")


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--runs-root", default="runs", type=click.Path())
def serve(host, port, runs_root):
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(runs_root=runs_root), host=host, port=port)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        sys.exit(EXIT_USAGE)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    except SystemExit:
        raise
    except (SpaceError, CheckpointError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(EXIT_USAGE)
    except InfeasibleSampleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        sys.exit(EXIT_INFEASIBLE)
    except EvaluatorError as exc:
        print(f"evaluator failure: {exc}", file=sys.stderr)
        sys.exit(EXIT_EVALUATOR)


if __name__ == "__main__":
    main()
