import json
import subprocess
import sys

import pytest

from goldens import SSD_TINY_HASH, TINY16_DOCUMENT

CLI = [sys.executable, "-m", "cyclenas.cli"]


def run_cli(*args, cwd=None):
    return subprocess.run(
        CLI + list(args), capture_output=True, text=True, cwd=cwd, timeout=120
    )


@pytest.fixture()
def tiny16_file(tmp_path):
    path = tmp_path / "tiny16.json"
    path.write_text(json.dumps(TINY16_DOCUMENT))
    return path


@pytest.fixture()
def genome_file(tmp_path):
    path = tmp_path / "genome.json"
    path.write_text(json.dumps({"backbone": [0, 0], "head": [0, 0]}))
    return path


def test_spaces_lists_builtins():
    result = run_cli("spaces")
    assert result.returncode == 0
    assert "builtin:ssd_tiny" in result.stdout
    assert "builtin:ssd_small" in result.stdout


def test_validate_builtin_space():
    result = run_cli("validate", "--space", "builtin:ssd_tiny")
    assert result.returncode == 0
    body = json.loads(result.stdout)
    assert body["space_hash"] == SSD_TINY_HASH
    assert body["cardinality"] == 1152


def test_validate_bad_document(tmp_path):
    bad = tmp_path / "bad.json"
    doc = json.loads(json.dumps(TINY16_DOCUMENT))
    doc["modules"]["backbone"]["axes"][0]["choices"] = []
    bad.write_text(json.dumps(doc))
    result = run_cli("validate", "--space", str(bad))
    assert result.returncode == 1
    assert "empty axis" in result.stderr


def test_estimate_feasible(tiny16_file, genome_file):
    result = run_cli(
        "estimate", "--space", str(tiny16_file), "--genome", str(genome_file),
        "--device", "max78000",
    )
    assert result.returncode == 0
    assert "verdict: PASS" in result.stdout


def test_estimate_json_matches_cost_report_schema(tiny16_file, genome_file):
    result = run_cli(
        "estimate", "--space", str(tiny16_file), "--genome", str(genome_file), "--json",
    )
    assert result.returncode == 0
    doc = json.loads(result.stdout)
    for field in ("params", "weight_bytes", "macs", "peak_activation_bytes",
                  "layer_count", "max_channels", "kernels_used", "per_module"):
        assert field in doc
    assert doc["verdict"]["ok"] is True


def test_estimate_infeasible_exit_code_2(tmp_path, genome_file):
    doc = json.loads(json.dumps(TINY16_DOCUMENT))
    doc["modules"]["backbone"]["axes"][0]["choices"] = [2048, 4096]
    doc["modules"]["head"]["axes"][0]["choices"] = [2048, 4096]
    space_file = tmp_path / "big.json"
    space_file.write_text(json.dumps(doc))
    result = run_cli(
        "estimate", "--space", str(space_file), "--genome", str(genome_file),
        "--device", "max78000",
    )
    assert result.returncode == 2
    assert "verdict: FAIL" in result.stdout


def test_oracle_golden(tiny16_file):
    result = run_cli("oracle", "--space", str(tiny16_file), "--evaluator", "synthetic:42")
    assert result.returncode == 0
    body = json.loads(result.stdout)
    assert body["genome"] == {"backbone": [1, 0], "head": [1, 0]}


def test_oracle_cap_refusal(tiny16_file):
    result = run_cli("oracle", "--space", str(tiny16_file), "--cap", "4")
    assert result.returncode == 1
    assert "16" in result.stderr  # computed cardinality in the message


def _search(tmp_path, out_name, *extra, seed="7"):
    return run_cli(
        "search", "--space", "builtin:ssd_tiny", "--out", str(tmp_path / out_name),
        "--evaluator", f"synthetic:{seed}", "--seed", seed,
        "--budget", "8", "--generations-per-phase", "2", "--population", "8",
        *extra,
    )


def test_search_populates_run_dir(tmp_path):
    result = _search(tmp_path, "run1", "--budget-device", "max78000")
    assert result.returncode == 0, result.stderr
    run_dir = tmp_path / "run1"
    for name in ("config.json", "space.json", "history.csv", "checkpoint.json",
                 "best_genome.json", "convergence.json"):
        assert (run_dir / name).exists(), name
    best = json.loads((run_dir / "best_genome.json").read_text())
    assert best["cost"]["weight_bytes"] <= 442_368


def test_search_refuses_nonempty_dir(tmp_path):
    (tmp_path / "run1").mkdir()
    (tmp_path / "run1" / "junk.txt").write_text("x")
    result = _search(tmp_path, "run1")
    assert result.returncode == 1
    assert "not empty" in result.stderr


def test_search_determinism_across_invocations(tmp_path):
    assert _search(tmp_path, "a").returncode == 0
    assert _search(tmp_path, "b").returncode == 0
    assert (tmp_path / "a/history.csv").read_bytes() == (tmp_path / "b/history.csv").read_bytes()


def test_search_workers_identical(tmp_path):
    assert _search(tmp_path, "w1", "--workers", "1").returncode == 0
    assert _search(tmp_path, "w4", "--workers", "4").returncode == 0
    assert (tmp_path / "w1/history.csv").read_bytes() == (tmp_path / "w4/history.csv").read_bytes()


def test_config_file_with_flag_precedence(tmp_path):
    config = tmp_path / "run_config.json"
    config.write_text(json.dumps({
        "seed": 3, "evaluator": "synthetic:3", "total_generation_budget": 8,
        "generations_per_phase": 2, "population_size": 8,
    }))
    result = run_cli(
        "search", "--space", "builtin:ssd_tiny", "--out", str(tmp_path / "cfg"),
        "--config", str(config), "--seed", "7", "--evaluator", "synthetic:7",
    )
    assert result.returncode == 0
    frozen = json.loads((tmp_path / "cfg/config.json").read_text())
    assert frozen["schedule"]["seed"] == 7  # flag wins over config file
    assert frozen["evaluator"] == "synthetic:7"
    assert frozen["schedule"]["total_generation_budget"] == 8  # from file


def test_resume_completed_run_is_noop(tmp_path):
    assert _search(tmp_path, "done").returncode == 0
    result = run_cli("resume", str(tmp_path / "done"))
    assert result.returncode == 0
    assert "already completed" in result.stdout


def test_resume_rejects_edited_config(tmp_path):
    assert _search(tmp_path, "run").returncode == 0
    config_path = tmp_path / "run/config.json"
    doc = json.loads(config_path.read_text())
    doc["schedule"]["seed"] = 12345
    config_path.write_text(json.dumps(doc, sort_keys=True, indent=1))
    # Pretend the run is unfinished so resume actually engages.
    checkpoint = tmp_path / "run/checkpoint.json"
    state = json.loads(checkpoint.read_text())
    state["completed"] = False
    checkpoint.write_text(json.dumps(state, sort_keys=True))
    result = run_cli("resume", str(tmp_path / "run"))
    assert result.returncode == 1
    assert "digest mismatch" in result.stderr


def test_resume_missing_checkpoint(tmp_path):
    (tmp_path / "empty").mkdir()
    result = run_cli("resume", str(tmp_path / "empty"))
    assert result.returncode == 1


def test_extract_best_outputs_feasible_genome(tmp_path):
    assert _search(tmp_path, "run", "--budget-device", "max78000").returncode == 0
    result = run_cli("extract-best", str(tmp_path / "run"))
    assert result.returncode == 0
    doc = json.loads(result.stdout)
    assert doc["completed"] is True
    assert 0.0 <= doc["fitness"] <= 1.0
    assert doc["cost"]["weight_bytes"] <= 442_368


def test_stats_joint_row(tiny16_file, tmp_path):
    result = run_cli(
        "stats", "--space", str(tiny16_file), "--n", "50", "--seed", "3",
        "--evaluator", "synthetic:3", "--out", str(tmp_path / "stats"),
    )
    assert result.returncode == 0, result.stderr
    lines = result.stdout.splitlines()
    assert lines[0] == "condition,n,mean,std,variance"
    assert lines[1].startswith("joint,50,")
    assert (tmp_path / "stats/stats.csv").exists()
    assert (tmp_path / "stats/samples.csv").exists()


def test_stats_conditioned_row(tiny16_file, tmp_path, genome_file):
    result = run_cli(
        "stats", "--space", str(tiny16_file), "--n", "30", "--seed", "3",
        "--evaluator", "synthetic:3",
        "--fix-from", str(genome_file), "--module", "head",
        "--out", str(tmp_path / "stats"),
    )
    assert result.returncode == 0, result.stderr
    assert "fixed-complement[head]" in result.stdout
    assert (tmp_path / "stats/comparison.csv").exists()


def test_stats_rejects_n_1(tiny16_file):
    result = run_cli("stats", "--space", str(tiny16_file), "--n", "1")
    assert result.returncode == 1
    assert "at least 2" in result.stderr


def test_usage_error_exit_code():
    result = run_cli("search", "--space", "builtin:ssd_tiny")  # missing --out
    assert result.returncode == 1


def test_evaluator_failure_exit_code(tiny16_file, tmp_path):
    result = run_cli(
        "search", "--space", str(tiny16_file), "--out", str(tmp_path / "run"),
        "--evaluator", "external:false", "--seed", "1",
        "--budget", "4", "--generations-per-phase", "2", "--population", "8",
    )
    assert result.returncode == 3
    assert "evaluator failure" in result.stderr
