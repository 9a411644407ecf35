import logging

import pytest

from cyclenas.cost import estimate, unbounded_budget
from cyclenas.evaluate import SyntheticEvaluator
from cyclenas.evolution import Candidate, EvolutionConfig, PhaseResult, PhaseSetup, run_phase
from cyclenas.passthrough import BufferEntry, PassthroughBuffer
from cyclenas.space import Genome, ModuleGenome, sample_random_genome
from cyclenas.rng import stream_for


def make_phase_result(tiny16, genes_fitness, module="backbone"):
    complement = sample_random_genome(tiny16, stream_for(0, 50)).assignments["head"]
    candidates = []
    for genes, fitness in genes_fitness:
        mg = ModuleGenome(module, genes)
        full = Genome({module: mg, "head": complement})
        candidates.append(
            Candidate(module_genome=mg, full_genome=full, fitness=fitness,
                      cost=estimate(tiny16, full))
        )
    return PhaseResult(
        module=module, ranked_population=tuple(candidates),
        best=candidates[0], history=(),
    )


def test_store_replaces_and_ranks(tiny16):
    buf = PassthroughBuffer(module="backbone", capacity=3)
    buf.store(make_phase_result(tiny16, [((0, 0), 0.9), ((0, 1), 0.5)]), cycle=0)
    assert [e.module_genome.genes for e in buf.entries] == [(0, 0), (0, 1)]
    assert all(e.cycle_stored == 0 for e in buf.entries)

    # Replacement semantics: older entries vanish entirely.
    buf.store(make_phase_result(tiny16, [((1, 1), 0.7)]), cycle=1)
    assert [e.module_genome.genes for e in buf.entries] == [(1, 1)]
    assert all(e.cycle_stored == 1 for e in buf.entries)


def test_store_dedupes_keeping_first(tiny16):
    buf = PassthroughBuffer(module="backbone", capacity=4)
    buf.store(
        make_phase_result(tiny16, [((0, 0), 0.9), ((0, 0), 0.9), ((1, 0), 0.4)]),
        cycle=0,
    )
    assert [e.module_genome.genes for e in buf.entries] == [(0, 0), (1, 0)]
    assert buf.entries[0].fitness_at_store_time == 0.9


def test_store_caps_capacity(tiny16):
    buf = PassthroughBuffer(module="backbone", capacity=2)
    buf.store(
        make_phase_result(tiny16, [((0, 0), 0.9), ((0, 1), 0.8), ((1, 0), 0.7)]),
        cycle=0,
    )
    assert len(buf.entries) == 2


def test_store_module_mismatch(tiny16):
    buf = PassthroughBuffer(module="head")
    with pytest.raises(ValueError, match="stored into buffer"):
        buf.store(make_phase_result(tiny16, [((0, 0), 0.9)]), cycle=0)


def test_store_empty_population_warns(tiny16, caplog):
    buf = PassthroughBuffer(module="backbone")
    buf.entries = (BufferEntry(ModuleGenome("backbone", (0, 0)), 0.1, 0),)
    empty = PhaseResult(module="backbone", ranked_population=(), best=None, history=())
    with caplog.at_level(logging.WARNING):
        buf.store(empty, cycle=1)
    assert "left unchanged" in caplog.text
    assert len(buf.entries) == 1


def test_draw_elites_prefix_semantics(tiny16):
    buf = PassthroughBuffer(module="backbone", capacity=100)
    rows = [((0, 0), 0.9), ((0, 1), 0.8), ((1, 0), 0.7), ((1, 1), 0.6)]
    buf.store(make_phase_result(tiny16, rows), cycle=0)
    assert buf.draw_elites(0) == []
    assert [g.genes for g in buf.draw_elites(2)] == [(0, 0), (0, 1)]
    assert [g.genes for g in buf.draw_elites(99)] == [g for g, _ in rows]
    with pytest.raises(ValueError):
        buf.draw_elites(-1)


def test_rank_consistency_after_store(ssd_tiny):
    # Entries must always be sorted by stored fitness (ties: genes asc).
    setup = PhaseSetup(
        space=ssd_tiny, module="backbone",
        complement={"head": sample_random_genome(ssd_tiny, stream_for(1, 51)).assignments["head"]},
        evaluator=SyntheticEvaluator(ssd_tiny, 5), budget=unbounded_budget(),
        config=EvolutionConfig(population_size=16), seed=5,
    )
    result = run_phase(setup, generations=3)
    buf = PassthroughBuffer(module="backbone", capacity=16)
    buf.store(result, cycle=2)
    keys = [(-e.fitness_at_store_time, e.module_genome.genes) for e in buf.entries]
    assert keys == sorted(keys)
    genes = [e.module_genome.genes for e in buf.entries]
    assert len(set(genes)) == len(genes)


def test_buffer_serialization_round_trip(tiny16):
    buf = PassthroughBuffer(module="backbone", capacity=5, passthrough_ratio=0.4)
    buf.store(make_phase_result(tiny16, [((0, 1), 0.8), ((1, 0), 0.7)]), cycle=3)
    again = PassthroughBuffer.from_dict(buf.to_dict())
    assert again.module == buf.module
    assert again.capacity == buf.capacity
    assert again.passthrough_ratio == buf.passthrough_ratio
    assert again.entries == buf.entries
