"""Fitness evaluation: synthetic landscapes, external evaluators, oracle.

Fitness is an opaque score in [0, 1], higher is better, always a function of
the *full* genome: a candidate's score is only meaningful in the context of
its fixed complementary modules, so caches are keyed on every module's
genes, never on a single module's slice.

Three evaluator kinds are provided:

- :class:`SyntheticEvaluator`: a deterministic hash landscape with unary
  per-gene utilities plus sparse cross-module pair interactions. It is the
  desk-scale stand-in for a trained supernet's validation metric and is
  bit-reproducible across processes and languages (see the hash contract in
  the module docstring of :mod:`cyclenas.rng`).
- :class:`ExternalEvaluator`: line-delimited JSON over a child process's
  standard streams (protocol below), for plugging in a real trainer.
- :func:`oracle_best`: exhaustive enumeration, the ground truth against
  which the search heuristic is validated on small spaces.

Wire protocol (version 1), one JSON object per line:

    engine -> evaluator   {"type":"hello","version":1,"space_hash":"<hex16>"}
    evaluator -> engine   {"type":"hello","version":1,"space_hash":"<hex16>"}
    engine -> evaluator   {"type":"eval","id":<u64>,"genome":{"<module>":[..],..}}
    evaluator -> engine   {"type":"result","id":<u64>,"fitness":<float in [0,1]>}
    engine -> evaluator   {"type":"shutdown"}

Ids are strictly increasing per run; unknown fields are ignored; results
may arrive out of order.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from .rng import fold, unit_float
from .space import Genome, SearchSpace, enumerate_genomes, genome_key, genome_to_dict

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
PAIR_TAG = 0xBEEF

Fitness = float


class EvaluatorError(RuntimeError):
    """External evaluator failed or violated the wire protocol."""


def module_tags(space: SearchSpace) -> dict[str, int]:
    """Stable small-integer tags: 1 + rank in canonical module order.

    For detector spaces this pins backbone=1, head=2.
    """
    return {m: i + 1 for i, m in enumerate(space.module_order)}


def default_coupling(space: SearchSpace) -> tuple[tuple[int, int], ...]:
    """Sparse interaction pairs between the first two modules' genes.

    Position i of the first module couples with position j of the second
    whenever (i + j) % 3 == 0. Spaces with a single module have no pairs.
    """
    order = space.module_order
    if len(order) < 2:
        return ()
    n_a = len(space.modules[order[0]].axes)
    n_b = len(space.modules[order[1]].axes)
    return tuple(
        (i, j) for i in range(n_a) for j in range(n_b) if (i + j) % 3 == 0
    )


def synthetic_fitness(
    space: SearchSpace,
    genome: Genome,
    seed: int,
    coupling: Optional[Sequence[tuple[int, int]]] = None,
) -> Fitness:
    """Deterministic landscape value in [0, 1) for a full genome.

    Each gene contributes a unary utility hashed from (module tag, position,
    chosen raw value); each coupled (i, j) pair contributes a pairwise
    utility hashed from both chosen values, weighted twice. Summation order
    is fixed (modules in canonical order, positions ascending, pairs in
    (i, j) order) so independent implementations agree bit-exactly.

    Each term is a 64-bit hash divided by 2**64 under IEEE-754, so a single
    term can round to exactly 1.0 with probability ~2**-54; the averaged
    fitness is strictly below 1 for any non-pathological landscape.
    """
    if coupling is None:
        coupling = default_coupling(space)
    tags = module_tags(space)
    order = space.module_order

    u_sum = 0.0
    n_unary = 0
    for module_id in order:
        ms = space.modules[module_id]
        genes = genome.assignments[module_id].genes
        tag = tags[module_id]
        for i, axis in enumerate(ms.axes):
            value = axis.choices[genes[i]]
            u_sum += unit_float(fold(seed, tag, i, value))
            n_unary += 1

    p_sum = 0.0
    n_pairs = len(coupling)
    if n_pairs:
        ms_a = space.modules[order[0]]
        ms_b = space.modules[order[1]]
        genes_a = genome.assignments[order[0]].genes
        genes_b = genome.assignments[order[1]].genes
        for i, j in coupling:
            v_a = ms_a.axes[i].choices[genes_a[i]]
            v_b = ms_b.axes[j].choices[genes_b[j]]
            p_sum += unit_float(fold(seed, PAIR_TAG, i, j, v_a, v_b))

    denom = n_unary + 2 * n_pairs
    if denom == 0:
        return 0.0
    return (u_sum + 2.0 * p_sum) / denom


class Evaluator:
    """Interface: deterministic full-genome fitness with batching."""

    evaluator_id: str
    space: SearchSpace

    def evaluate(self, genome: Genome) -> Fitness:
        raise NotImplementedError

    def evaluate_batch(self, genomes: Sequence[Genome]) -> list[Fitness]:
        return [self.evaluate(g) for g in genomes]

    def close(self):
        pass


class SyntheticEvaluator(Evaluator):
    def __init__(self, space: SearchSpace, seed: int,
                 coupling: Optional[Sequence[tuple[int, int]]] = None,
                 workers: int = 1):
        self.space = space
        self.seed = seed
        self.coupling = tuple(coupling) if coupling is not None else default_coupling(space)
        self.workers = max(1, workers)
        self.evaluator_id = f"synthetic:{seed}"

    def evaluate(self, genome: Genome) -> Fitness:
        return synthetic_fitness(self.space, genome, self.seed, self.coupling)

    def evaluate_batch(self, genomes: Sequence[Genome]) -> list[Fitness]:
        if self.workers == 1 or len(genomes) < 2:
            return [self.evaluate(g) for g in genomes]
        # Results are reassembled in request order, so worker scheduling
        # cannot perturb anything downstream.
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(self.evaluate, genomes))


class CachingEvaluator(Evaluator):
    """Memoizes fitness per full genome.

    Keys are (space_hash, evaluator_id, full gene tuple); partial keys would
    alias distinct complementary contexts.
    """

    def __init__(self, inner: Evaluator):
        self.inner = inner
        self.space = inner.space
        self.evaluator_id = inner.evaluator_id
        self._cache: dict[tuple, Fitness] = {}
        self.hits = 0
        self.misses = 0

    def _key(self, genome: Genome) -> tuple:
        return (self.space.space_hash, self.evaluator_id, genome_key(self.space, genome))

    def evaluate(self, genome: Genome) -> Fitness:
        return self.evaluate_batch([genome])[0]

    def evaluate_batch(self, genomes: Sequence[Genome]) -> list[Fitness]:
        keys = [self._key(g) for g in genomes]
        missing: dict[tuple, int] = {}
        for idx, key in enumerate(keys):
            if key not in self._cache and key not in missing:
                missing[key] = idx
        if missing:
            fresh = self.inner.evaluate_batch([genomes[idx] for idx in missing.values()])
            for key, value in zip(missing.keys(), fresh):
                self._cache[key] = value
        self.misses += len(missing)
        self.hits += len(keys) - len(missing)
        return [self._cache[key] for key in keys]

    def close(self):
        self.inner.close()


class ExternalEvaluator(Evaluator):
    """Client for the line-delimited JSON evaluator protocol.

    Requests are pipelined up to ``window`` in flight; responses are matched
    by id and reassembled in request order, so the engine's trajectory is
    independent of the child's completion order. Any protocol violation
    aborts the run with a diagnostic carrying the offending line - corrupted
    fitness is worse than a stopped search, and checkpoints make aborts
    cheap.
    """

    def __init__(self, space: SearchSpace, command: str | Sequence[str], window: int = 32):
        self.space = space
        if isinstance(command, str):
            self.command = shlex.split(command)
            self.evaluator_id = f"external:{command}"
        else:
            self.command = list(command)
            self.evaluator_id = "external:" + " ".join(self.command)
        # Bounded so that in-flight request/result lines always fit inside
        # the OS pipe buffers (interleaving otherwise risks a write-write
        # deadlock with a slow child).
        self.window = min(max(1, window), 256)
        self._proc: Optional[subprocess.Popen] = None
        self._next_id = 0

    def start(self):
        if self._proc is not None:
            return
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise EvaluatorError(f"could not start evaluator {self.command}: {exc}") from exc
        self._send({"type": "hello", "version": PROTOCOL_VERSION, "space_hash": self.space.space_hash})
        hello = self._read()
        if hello.get("type") != "hello":
            raise EvaluatorError(f"expected hello, got: {json.dumps(hello)}")
        if hello.get("version") != PROTOCOL_VERSION:
            raise EvaluatorError(f"protocol version mismatch: engine {PROTOCOL_VERSION}, evaluator {hello.get('version')}")
        if hello.get("space_hash") != self.space.space_hash:
            raise EvaluatorError(
                f"space_hash mismatch: engine {self.space.space_hash}, evaluator {hello.get('space_hash')}"
            )

    def _send(self, obj: dict):
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(obj, sort_keys=True) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluatorError(f"evaluator process closed its input: {exc}") from exc

    def _read(self) -> dict:
        assert self._proc is not None and self._proc.stdout is not None
        line = self._proc.stdout.readline()
        if not line:
            code = self._proc.poll()
            raise EvaluatorError(f"evaluator process exited (code {code}) before responding")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvaluatorError(f"evaluator sent invalid JSON: {line.rstrip()!r} ({exc})") from exc
        if not isinstance(obj, dict):
            raise EvaluatorError(f"evaluator sent a non-object line: {line.rstrip()!r}")
        return obj

    def evaluate(self, genome: Genome) -> Fitness:
        return self.evaluate_batch([genome])[0]

    def evaluate_batch(self, genomes: Sequence[Genome]) -> list[Fitness]:
        if self._proc is None:
            self.start()
        pending: dict[int, int] = {}  # request id -> position in batch
        results: dict[int, Fitness] = {}
        next_to_send = 0
        while len(results) < len(genomes):
            while next_to_send < len(genomes) and len(pending) < self.window:
                request_id = self._next_id
                self._next_id += 1
                pending[request_id] = next_to_send
                self._send({
                    "type": "eval",
                    "id": request_id,
                    "genome": genome_to_dict(genomes[next_to_send]),
                })
                next_to_send += 1
            obj = self._read()
            if obj.get("type") != "result":
                raise EvaluatorError(f"expected result, got: {json.dumps(obj)}")
            rid = obj.get("id")
            if rid not in pending:
                raise EvaluatorError(f"result with unknown id: {json.dumps(obj)}")
            fitness = obj.get("fitness")
            if not isinstance(fitness, (int, float)) or isinstance(fitness, bool) \
                    or fitness != fitness or not 0.0 <= fitness <= 1.0:
                raise EvaluatorError(f"fitness outside [0,1] or not a number: {json.dumps(obj)}")
            results[pending.pop(rid)] = float(fitness)
        return [results[i] for i in range(len(genomes))]

    def close(self):
        if self._proc is None:
            return
        try:
            if self._proc.poll() is None:
                self._send({"type": "shutdown"})
        except EvaluatorError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            logger.warning("evaluator did not exit after shutdown; killing")
            self._proc.kill()
            self._proc.wait()
        self._proc = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()


def make_evaluator(space: SearchSpace, spec: str, workers: int = 1) -> Evaluator:
    """Build an evaluator from its config string.

    ``synthetic:<seed>`` or ``external:<command line>``.
    """
    kind, _, arg = spec.partition(":")
    if kind == "synthetic":
        try:
            seed = int(arg)
        except ValueError:
            raise ValueError(f"synthetic evaluator needs an integer seed, got {arg!r}") from None
        return SyntheticEvaluator(space, seed, workers=workers)
    if kind == "external":
        if not arg:
            raise ValueError("external evaluator needs a command line")
        return ExternalEvaluator(space, arg, window=max(1, workers) * 8)
    raise ValueError(f"unknown evaluator spec {spec!r} (expected synthetic:<seed> or external:<cmd>)")


def oracle_best(space: SearchSpace, evaluator: Evaluator, cap: int = 1_000_000) -> tuple[Genome, Fitness]:
    """Exhaustive ground truth: the fittest genome in the whole space.

    Ties break toward the lexicographically smallest gene tuple (canonical
    module order, so backbone genes are most significant). Enumeration is
    ascending, so keeping only strictly better genomes realizes the rule.
    """
    best_genome: Optional[Genome] = None
    best_fitness = -1.0
    for genome in enumerate_genomes(space, cap=cap):
        fitness = evaluator.evaluate(genome)
        if fitness > best_fitness:
            best_genome = genome
            best_fitness = fitness
    assert best_genome is not None
    return best_genome, best_fitness
