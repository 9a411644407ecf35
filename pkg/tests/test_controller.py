import json
import shutil

import pytest

from cyclenas.controller import (
    CheckpointError,
    ScheduleConfig,
    SearchController,
    SearchState,
    checkpoint_load,
    checkpoint_save,
    detect_convergence,
    extract_best,
    resume_run,
    run_search,
)
from cyclenas.cost import check_budget, estimate, unbounded_budget, with_module_split, device_budget
from cyclenas.evaluate import SyntheticEvaluator, make_evaluator
from cyclenas.evolution import EvolutionConfig
from cyclenas.space import genome_key


def small_schedule(seed=3, budget=12, gpp=3, ratio=0.6):
    return ScheduleConfig(
        total_generation_budget=budget, seed=seed,
        generations_per_phase=gpp, passthrough_ratio=ratio,
    )


EVO = EvolutionConfig(population_size=8)


# -- convergence ---------------------------------------------------------------


def test_convergence_constant_history():
    assert detect_convergence([0.5, 0.5, 0.5]).converged_generation == 0


def test_convergence_hand_example():
    report = detect_convergence([0.10, 0.25, 0.306, 0.307, 0.3083])
    # threshold = 0.99 * 0.3083 = 0.305217; first value >= at index 2
    assert report.converged_generation == 2
    assert report.final_best == 0.3083


def test_convergence_strictly_increasing_edges():
    assert detect_convergence([0.1, 0.2, 0.4]).converged_generation == 2
    assert detect_convergence([0.1, 0.399, 0.4]).converged_generation == 1


def test_convergence_absolute_mode():
    assert detect_convergence([0.295, 0.30], mode="absolute").converged_generation == 0
    assert detect_convergence([0.2, 0.30], mode="absolute").converged_generation == 1


def test_convergence_empty_history_rejected():
    with pytest.raises(ValueError, match="empty history"):
        detect_convergence([])


# -- schedule validation -------------------------------------------------------


def test_schedule_validation(ssd_tiny):
    with pytest.raises(ValueError, match="below"):
        ScheduleConfig(total_generation_budget=3, seed=0, generations_per_phase=5)
    schedule = ScheduleConfig(total_generation_budget=10, seed=0,
                              module_order=("head", "backbone"))
    assert schedule.resolve_order(ssd_tiny) == ("head", "backbone")
    bad = ScheduleConfig(total_generation_budget=10, seed=0, module_order=("backbone",))
    with pytest.raises(ValueError, match="cover the space modules"):
        bad.resolve_order(ssd_tiny)


# -- basic runs ----------------------------------------------------------------


def test_single_phase_degenerate_run(tiny16):
    # Budget equal to one phase: the run is a single run_phase.
    schedule = ScheduleConfig(total_generation_budget=4, seed=1, generations_per_phase=4)
    result = run_search(tiny16, schedule, EVO, unbounded_budget(), SyntheticEvaluator(tiny16, 1))
    assert len(result.state.history) == 4
    assert {row.phase_module for row in result.state.history} == {"backbone"}
    assert result.convergence.converged_generation <= 3


def test_tiny16_search_attains_oracle_exactly(tiny16):
    # 16-genome space, N=16, ratio 0.6, 20-generation budget: the optimum
    # is attainable, so the engine must match the exhaustive oracle with
    # zero tolerance.
    from goldens import TINY16_BEST_FITNESS, TINY16_SEED

    schedule = ScheduleConfig(total_generation_budget=20, seed=TINY16_SEED,
                              passthrough_ratio=0.6)
    result = run_search(tiny16, schedule, EvolutionConfig(population_size=16),
                        unbounded_budget(), SyntheticEvaluator(tiny16, TINY16_SEED))
    assert result.best_fitness == TINY16_BEST_FITNESS


def test_single_module_space_search(tmp_path):
    # One module in the alternation order: every phase varies the whole
    # genome and the fitness landscape has no interaction terms.
    import json as _json

    from cyclenas.space import parse_space

    doc = {
        "version": 1,
        "modules": {
            "net": {
                "axes": [
                    {"name": "s0.width", "choices": [4, 8, 12]},
                    {"name": "s0.kernel", "choices": [1, 3]},
                    {"name": "s0.depth", "choices": [1, 2]},
                ],
                "skeleton": [
                    {"stage": 0, "hw": [4, 4], "kind": "conv", "in_link": "input:3"}
                ] * 3,
            }
        },
    }
    space = parse_space(_json.dumps(doc))
    schedule = ScheduleConfig(total_generation_budget=6, seed=4,
                              generations_per_phase=3, module_order=("net",))
    result = run_search(space, schedule, EVO, unbounded_budget(),
                        SyntheticEvaluator(space, 4), run_dir=tmp_path / "run")
    from cyclenas.evaluate import oracle_best

    _, oracle_fitness = oracle_best(space, SyntheticEvaluator(space, 4))
    assert result.best_fitness == oracle_fitness  # 12 genomes, trivially found
    assert {row.phase_module for row in result.state.history} == {"net"}


def test_run_writes_all_outputs(tiny16, tmp_path):
    run_dir = tmp_path / "run"
    result = run_search(
        tiny16, small_schedule(), EVO, unbounded_budget(),
        SyntheticEvaluator(tiny16, 3), run_dir=run_dir, space_path="unused.json",
    )
    for name in ("config.json", "history.csv", "checkpoint.json",
                 "best_genome.json", "convergence.json"):
        assert (run_dir / name).exists(), name
    best_doc = json.loads((run_dir / "best_genome.json").read_text())
    assert best_doc["space_hash"] == tiny16.space_hash
    assert best_doc["fitness"] == result.best_fitness
    history = (run_dir / "history.csv").read_text().splitlines()
    assert history[0] == "cycle,phase_module,generation,best_fitness,mean_fitness,evaluations,feasible_rejections"
    assert len(history) == 1 + 12
    conv = json.loads((run_dir / "convergence.json").read_text())
    assert conv["converged_generation"] == result.convergence.converged_generation


def test_history_generation_indices_global(tiny16, tmp_path):
    result = run_search(tiny16, small_schedule(), EVO, unbounded_budget(),
                        SyntheticEvaluator(tiny16, 3))
    assert [row.generation for row in result.state.history] == list(range(12))
    # 12 generations at 3 per phase: backbone, head, backbone, head.
    assert [row.phase_module for row in result.state.history] == (
        ["backbone"] * 3 + ["head"] * 3 + ["backbone"] * 3 + ["head"] * 3
    )
    assert [row.cycle for row in result.state.history] == [0] * 6 + [1] * 6


def test_best_fitness_is_running_max_of_history(tiny16):
    result = run_search(tiny16, small_schedule(seed=9), EVO, unbounded_budget(),
                        SyntheticEvaluator(tiny16, 9))
    assert result.best_fitness == max(r.best_fitness for r in result.state.history)
    assert result.state.best_curve()[-1] == result.best_fitness


def test_conditional_improvement_across_phases(ssd_small):
    # Fitness of the full assignment never regresses over a module's phase.
    evaluator = SyntheticEvaluator(ssd_small, 5)
    result = run_search(ssd_small, small_schedule(seed=5, budget=18), EVO,
                        unbounded_budget(), evaluator)
    history = result.state.history
    for prev, cur in zip(history, history[1:]):
        if cur.phase_module != prev.phase_module:
            # First generation best of the new phase includes the incumbent,
            # which carries the previous phase's best full genome.
            assert cur.best_fitness >= prev.best_fitness - 1e-15


def test_assignments_always_globally_feasible(ssd_tiny):
    budget = with_module_split(device_budget("max78000"), list(ssd_tiny.module_order))
    result = run_search(ssd_tiny, small_schedule(seed=7), EVO, budget,
                        SyntheticEvaluator(ssd_tiny, 7))
    from cyclenas.space import Genome

    final = Genome(dict(result.state.assignments))
    assert check_budget(estimate(ssd_tiny, final, 1), budget).ok
    assert check_budget(estimate(ssd_tiny, result.best_genome, 1), budget).ok


def test_determinism_byte_identical_history(tiny16, tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        run_search(tiny16, small_schedule(seed=11), EVO, unbounded_budget(),
                   SyntheticEvaluator(tiny16, 11), run_dir=d)
    assert (dirs[0] / "history.csv").read_bytes() == (dirs[1] / "history.csv").read_bytes()
    assert (dirs[0] / "best_genome.json").read_bytes() == (dirs[1] / "best_genome.json").read_bytes()


def test_workers_do_not_change_outputs(tiny16, tmp_path):
    for workers, d in ((1, tmp_path / "w1"), (4, tmp_path / "w4")):
        run_search(tiny16, small_schedule(seed=13), EVO, unbounded_budget(),
                   SyntheticEvaluator(tiny16, 13, workers=workers), run_dir=d)
    assert (tmp_path / "w1/history.csv").read_bytes() == (tmp_path / "w4/history.csv").read_bytes()


# -- checkpointing -------------------------------------------------------------


def test_checkpoint_round_trip(tiny16, tmp_path):
    result = run_search(tiny16, small_schedule(seed=2), EVO, unbounded_budget(),
                        SyntheticEvaluator(tiny16, 2), run_dir=tmp_path / "run")
    state = result.state
    path = tmp_path / "copy.json"
    checkpoint_save(state, path)
    loaded = checkpoint_load(path)
    assert loaded.to_dict() == state.to_dict()


def test_checkpoint_guards(tiny16, tmp_path):
    result = run_search(tiny16, small_schedule(seed=2), EVO, unbounded_budget(),
                        SyntheticEvaluator(tiny16, 2), run_dir=tmp_path / "run")
    path = tmp_path / "run/checkpoint.json"
    with pytest.raises(CheckpointError, match="space hash mismatch"):
        checkpoint_load(path, expected_space_hash="0" * 16)
    with pytest.raises(CheckpointError, match="config digest mismatch"):
        checkpoint_load(path, expected_config_digest="0" * 16)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError, match="version"):
        checkpoint_load(path)
    with pytest.raises(CheckpointError, match="no checkpoint"):
        checkpoint_load(tmp_path / "missing.json")


def run_to_completion_with_snapshots(space, schedule, evaluator_seed, run_dir):
    """Run a full search, archiving the checkpoint after every generation."""
    snapshots = []

    def snap(state):
        snapshots.append(json.dumps(state.to_dict(), sort_keys=True))

    result = run_search(space, schedule, EVO, unbounded_budget(),
                        SyntheticEvaluator(space, evaluator_seed),
                        run_dir=run_dir, on_progress=snap)
    return result, snapshots


def test_kill_and_resume_equals_uninterrupted_everywhere(tiny16, tmp_path):
    """Resume from the checkpoint of *every* generation boundary and compare
    final outputs against the uninterrupted reference run."""
    schedule = small_schedule(seed=17)
    reference_dir = tmp_path / "ref"
    reference, snapshots = run_to_completion_with_snapshots(tiny16, schedule, 17, reference_dir)
    reference_history = (reference_dir / "history.csv").read_bytes()

    for boundary, snapshot in enumerate(snapshots[:-1]):
        resumed_dir = tmp_path / f"resume_{boundary}"
        resumed_dir.mkdir()
        shutil.copy(reference_dir / "config.json", resumed_dir / "config.json")
        (resumed_dir / "checkpoint.json").write_text(snapshot)
        state = checkpoint_load(resumed_dir / "checkpoint.json")
        controller = SearchController(
            tiny16, schedule, EVO, unbounded_budget(),
            SyntheticEvaluator(tiny16, 17), run_dir=resumed_dir, state=state,
        )
        result = controller.run()
        assert result.best_fitness == reference.best_fitness
        assert genome_key(tiny16, result.best_genome) == genome_key(tiny16, reference.best_genome)
        assert (resumed_dir / "history.csv").read_bytes() == reference_history
        assert result.convergence == reference.convergence


def test_resume_run_from_directory(tiny16, tmp_path, ssd_tiny_path):
    # Interrupt by construction: archive a mid-run checkpoint, then resume
    # through the public directory-level entry point.
    schedule = small_schedule(seed=19)
    ref_dir = tmp_path / "ref"
    reference, snapshots = run_to_completion_with_snapshots(tiny16, schedule, 19, ref_dir)

    # A resume of a completed run is a no-op.
    done = resume_run(ref_dir, space=tiny16)
    assert done.best_fitness == reference.best_fitness

    mid = tmp_path / "mid"
    mid.mkdir()
    shutil.copy(ref_dir / "config.json", mid / "config.json")
    (mid / "checkpoint.json").write_text(snapshots[4])
    # Stale trailing rows beyond the checkpoint must be truncated on resume.
    (mid / "history.csv").write_text("garbage\nrows\n")
    result = resume_run(mid, space=tiny16)
    assert result.best_fitness == reference.best_fitness
    assert (mid / "history.csv").read_bytes() == (ref_dir / "history.csv").read_bytes()


def test_resume_refuses_tampered_config(tiny16, tmp_path):
    run_dir = tmp_path / "run"
    run_search(tiny16, small_schedule(seed=23), EVO, unbounded_budget(),
               SyntheticEvaluator(tiny16, 23), run_dir=run_dir)
    doc = json.loads((run_dir / "config.json").read_text())
    doc["schedule"]["seed"] = 99
    (run_dir / "config.json").write_text(json.dumps(doc))
    with pytest.raises(CheckpointError, match="digest mismatch"):
        resume_run(run_dir, space=tiny16)


def test_resume_refuses_tampered_space(tiny16, ssd_tiny, tmp_path):
    run_dir = tmp_path / "run"
    run_search(tiny16, small_schedule(seed=23), EVO, unbounded_budget(),
               SyntheticEvaluator(tiny16, 23), run_dir=run_dir)
    with pytest.raises(CheckpointError, match="space hash mismatch"):
        resume_run(run_dir, space=ssd_tiny)  # a different space document


def test_extract_best_from_checkpoint(tiny16, tmp_path):
    run_dir = tmp_path / "run"
    result = run_search(tiny16, small_schedule(seed=29), EVO, unbounded_budget(),
                        SyntheticEvaluator(tiny16, 29), run_dir=run_dir)
    doc = extract_best(run_dir, space=tiny16)
    assert doc["fitness"] == result.best_fitness
    assert doc["completed"] is True
    verdict = check_budget(estimate(tiny16, result.best_genome), unbounded_budget())
    assert verdict.ok


def test_evaluator_spec_round_trip_through_config(tiny16, tmp_path, monkeypatch):
    run_dir = tmp_path / "run"
    evaluator = make_evaluator(tiny16, "synthetic:31")
    run_search(tiny16, small_schedule(seed=31), EVO, unbounded_budget(),
               evaluator, run_dir=run_dir)
    doc = json.loads((run_dir / "config.json").read_text())
    assert doc["evaluator"] == "synthetic:31"
