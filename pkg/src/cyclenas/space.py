"""Modular architecture search spaces and genetic operators.

A search space is a set of named modules (e.g. ``backbone`` and ``head``),
each defined by an ordered list of choice axes plus a parallel skeleton that
pins the structural context of every gene (stage, spatial size, layer kind,
input linkage). Genomes hold choice *indices*, never raw values, which keeps
the genetic operators agnostic of what the choices mean and makes
lexicographic ordering well defined.

Axis roles are encoded in the axis name: the segment after the final ``.``
must be one of ``width``, ``kernel``, ``depth`` or ``expand``. Depth choices
count active layers in a stage (>= 1); inactive layers cost nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

from .rng import Stream, fnv1a64

SPACE_FORMAT_VERSION = 1

ROLE_WIDTH = "width"
ROLE_KERNEL = "kernel"
ROLE_DEPTH = "depth"
ROLE_EXPAND = "expand"
AXIS_ROLES = (ROLE_WIDTH, ROLE_KERNEL, ROLE_DEPTH, ROLE_EXPAND)

KIND_CONV = "conv"
KIND_INVERTED_BOTTLENECK = "inverted_bottleneck"
LAYER_KINDS = (KIND_CONV, KIND_INVERTED_BOTTLENECK)

ENUMERATION_CAP = 1_000_000

ModuleId = str
InLink = Union[int, str]


class SpaceError(ValueError):
    """Malformed space document; the message carries the offending path."""


@dataclass(frozen=True)
class ChoiceAxis:
    """One searchable decision: a named, ordered list of integer options."""

    name: str
    choices: tuple[int, ...]

    def __post_init__(self):
        if not self.choices:
            raise SpaceError(f"axis {self.name!r}: empty choice list")

    @property
    def role(self) -> str:
        return self.name.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class SkeletonEntry:
    """Structural context of a gene, consumed only by the cost model."""

    stage: int
    hw: tuple[int, int]
    kind: str
    in_link: InLink


@dataclass(frozen=True)
class ModuleSpace:
    module: ModuleId
    axes: tuple[ChoiceAxis, ...]
    skeleton: tuple[SkeletonEntry, ...]

    @property
    def cardinality(self) -> int:
        n = 1
        for axis in self.axes:
            n *= len(axis.choices)
        return n

    def stage_ids(self) -> list[int]:
        seen: list[int] = []
        for entry in self.skeleton:
            if entry.stage not in seen:
                seen.append(entry.stage)
        return sorted(seen)


@dataclass(frozen=True)
class SearchSpace:
    """A full multi-module space plus a content digest of its document.

    ``modules`` is keyed by module id; canonical module order is the sorted
    key order (so ``backbone`` precedes ``head``), which also fixes
    lexicographic genome comparison and hash tags.
    """

    modules: Mapping[ModuleId, ModuleSpace]
    space_hash: str

    @property
    def module_order(self) -> tuple[ModuleId, ...]:
        return tuple(sorted(self.modules))

    @property
    def cardinality(self) -> int:
        n = 1
        for module in self.modules.values():
            n *= module.cardinality
        return n


@dataclass(frozen=True)
class ModuleGenome:
    module: ModuleId
    genes: tuple[int, ...]


@dataclass(frozen=True)
class Genome:
    """One complete architecture: a ModuleGenome per module of the space."""

    assignments: Mapping[ModuleId, ModuleGenome]

    def genes_of(self, module: ModuleId) -> tuple[int, ...]:
        return self.assignments[module].genes

    def replace(self, module_genome: ModuleGenome) -> "Genome":
        updated = dict(self.assignments)
        updated[module_genome.module] = module_genome
        return Genome(updated)


# ---------------------------------------------------------------------------
# Document parsing / serialization
# ---------------------------------------------------------------------------


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise SpaceError(f"{path}: {message}")


def _parse_axis(obj, path: str) -> ChoiceAxis:
    _require(isinstance(obj, dict), path, "axis must be an object")
    _require("name" in obj, path, "missing 'name'")
    _require("choices" in obj, path, "missing 'choices'")
    name = obj["name"]
    _require(isinstance(name, str) and name, f"{path}.name", "must be a non-empty string")
    choices = obj["choices"]
    _require(isinstance(choices, list) and choices, f"{path}.choices", "empty axis")
    seen = set()
    for i, value in enumerate(choices):
        _require(
            isinstance(value, int) and not isinstance(value, bool) and value > 0,
            f"{path}.choices[{i}]",
            f"option values must be strictly positive integers, got {value!r}",
        )
        _require(value not in seen, f"{path}.choices[{i}]", f"duplicate choice value {value}")
        seen.add(value)
    return ChoiceAxis(name=name, choices=tuple(choices))


def _parse_skeleton_entry(obj, path: str) -> SkeletonEntry:
    _require(isinstance(obj, dict), path, "skeleton entry must be an object")
    for key in ("stage", "hw", "kind", "in_link"):
        _require(key in obj, path, f"missing {key!r}")
    stage = obj["stage"]
    _require(isinstance(stage, int) and stage >= 0, f"{path}.stage", "must be a non-negative integer")
    hw = obj["hw"]
    _require(
        isinstance(hw, list) and len(hw) == 2 and all(isinstance(v, int) and v > 0 for v in hw),
        f"{path}.hw",
        "must be a pair of positive integers [h, w]",
    )
    kind = obj["kind"]
    _require(kind in LAYER_KINDS, f"{path}.kind", f"unknown layer kind {kind!r}")
    in_link = obj["in_link"]
    _require(
        isinstance(in_link, (int, str)) and not isinstance(in_link, bool),
        f"{path}.in_link",
        "must be a stage index, 'input:<channels>' or '<module>:<stage>'",
    )
    return SkeletonEntry(stage=stage, hw=(hw[0], hw[1]), kind=kind, in_link=in_link)


def _validate_module(module_id: str, space: ModuleSpace, all_modules: Sequence[str]):
    """Structural validity only. Whether the axis roles are sufficient to
    decode concrete layers is the cost model's concern (see
    :func:`cyclenas.cost.stage_plans`); genetic operators and fitness work
    on any structurally valid space, including degenerate ones."""
    path = f"modules.{module_id}"
    _require(len(space.axes) > 0, f"{path}.axes", "module has no axes")
    _require(
        len(space.skeleton) == len(space.axes),
        f"{path}.skeleton",
        f"missing skeleton entry: {len(space.skeleton)} entries for {len(space.axes)} axes",
    )

    # All genes of a stage must agree on the stage's structure.
    stages: dict[int, SkeletonEntry] = {}
    for i, entry in enumerate(space.skeleton):
        if entry.stage in stages:
            _require(
                stages[entry.stage] == entry,
                f"{path}.skeleton[{i}]",
                f"stage {entry.stage} entries disagree on hw/kind/in_link",
            )
        else:
            stages[entry.stage] = entry

    earlier = set(all_modules[: all_modules.index(module_id)])
    for stage, entry in sorted(stages.items()):
        spath = f"{path} stage {stage}"
        link = entry.in_link
        if isinstance(link, int):
            _require(link in stages and link < stage, spath, f"in_link {link} must reference an earlier stage")
        elif link.startswith("input:"):
            tail = link.split(":", 1)[1]
            _require(tail.isdigit() and int(tail) > 0, spath, f"bad input link {link!r}")
        else:
            parts = link.split(":")
            _require(len(parts) == 2 and parts[1].lstrip("-").isdigit(), spath, f"bad in_link {link!r}")
            _require(
                parts[0] in earlier,
                spath,
                f"in_link {link!r} must reference a module earlier in canonical order",
            )


def parse_space_document(document: dict) -> SearchSpace:
    """Validate a decoded space document and compute its content hash."""
    _require(isinstance(document, dict), "$", "document must be an object")
    _require(document.get("version") == SPACE_FORMAT_VERSION, "version",
             f"expected {SPACE_FORMAT_VERSION}, got {document.get('version')!r}")
    modules_obj = document.get("modules")
    _require(isinstance(modules_obj, dict) and modules_obj, "modules", "must be a non-empty object")

    order = sorted(modules_obj)
    modules: dict[str, ModuleSpace] = {}
    for module_id in order:
        mpath = f"modules.{module_id}"
        mobj = modules_obj[module_id]
        _require(isinstance(mobj, dict), mpath, "must be an object")
        axes = tuple(
            _parse_axis(a, f"{mpath}.axes[{i}]") for i, a in enumerate(mobj.get("axes") or [])
        )
        skeleton = tuple(
            _parse_skeleton_entry(s, f"{mpath}.skeleton[{i}]")
            for i, s in enumerate(mobj.get("skeleton") or [])
        )
        modules[module_id] = ModuleSpace(module=module_id, axes=axes, skeleton=skeleton)

    for module_id in order:
        _validate_module(module_id, modules[module_id], order)

    canonical = canonical_document(modules)
    digest = fnv1a64(canonical.encode("utf-8"))
    return SearchSpace(modules={m: modules[m] for m in order}, space_hash=f"{digest:016x}")


def parse_space(text: str) -> SearchSpace:
    """Parse the JSON space document format."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpaceError(f"$: not valid JSON ({exc})") from exc
    return parse_space_document(document)


def load_space(path) -> SearchSpace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_space(fh.read())


def builtin_space_names() -> list[str]:
    """Names of the space documents shipped with the package."""
    from importlib import resources

    data = resources.files("cyclenas") / "data"
    return sorted(p.name[: -len(".json")] for p in data.iterdir() if p.name.endswith(".json"))


def builtin_space_path(name: str):
    """Filesystem path of a shipped space document (``builtin:<name>``)."""
    from importlib import resources

    path = resources.files("cyclenas") / "data" / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"no builtin space {name!r}; available: {', '.join(builtin_space_names())}")
    return path


def space_to_document(space: SearchSpace) -> dict:
    return json.loads(canonical_document(space.modules))


def canonical_document(modules: Mapping[str, ModuleSpace]) -> str:
    """Canonical serialization: sorted keys, no insignificant whitespace."""
    doc = {
        "version": SPACE_FORMAT_VERSION,
        "modules": {
            module_id: {
                "axes": [{"name": a.name, "choices": list(a.choices)} for a in ms.axes],
                "skeleton": [
                    {"stage": s.stage, "hw": list(s.hw), "kind": s.kind, "in_link": s.in_link}
                    for s in ms.skeleton
                ],
            }
            for module_id, ms in modules.items()
        },
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def serialize_space(space: SearchSpace) -> str:
    return canonical_document(space.modules)


# ---------------------------------------------------------------------------
# Genome helpers
# ---------------------------------------------------------------------------


def validate_module_genome(space: ModuleSpace, genome: ModuleGenome):
    if genome.module != space.module:
        raise ValueError(f"genome for module {genome.module!r} does not match space {space.module!r}")
    if len(genome.genes) != len(space.axes):
        raise ValueError(
            f"module {space.module!r}: expected {len(space.axes)} genes, got {len(genome.genes)}"
        )
    for i, g in enumerate(genome.genes):
        n = len(space.axes[i].choices)
        if not 0 <= g < n:
            raise ValueError(f"module {space.module!r} gene {i}: index {g} out of range [0, {n})")


def validate_genome(space: SearchSpace, genome: Genome):
    if set(genome.assignments) != set(space.modules):
        raise ValueError(
            f"genome modules {sorted(genome.assignments)} do not match space modules {list(space.module_order)}"
        )
    for module_id, module_genome in genome.assignments.items():
        validate_module_genome(space.modules[module_id], module_genome)


def genome_key(space: SearchSpace, genome: Genome) -> tuple[int, ...]:
    """Flat gene tuple in canonical module order, for lexicographic ties."""
    key: list[int] = []
    for module_id in space.module_order:
        key.extend(genome.assignments[module_id].genes)
    return tuple(key)


def gene_value(space: ModuleSpace, genes: Sequence[int], i: int) -> int:
    return space.axes[i].choices[genes[i]]


def genome_to_dict(genome: Genome) -> dict[str, list[int]]:
    return {m: list(g.genes) for m, g in sorted(genome.assignments.items())}


def genome_from_dict(space: SearchSpace, obj: Mapping[str, Sequence[int]]) -> Genome:
    genome = Genome(
        {m: ModuleGenome(module=m, genes=tuple(genes)) for m, genes in obj.items()}
    )
    validate_genome(space, genome)
    return genome


# ---------------------------------------------------------------------------
# Genetic operators
# ---------------------------------------------------------------------------


def sample_random(space: ModuleSpace, rng: Stream) -> ModuleGenome:
    """Draw each gene independently and uniformly over its axis."""
    genes = tuple(rng.randrange(len(axis.choices)) for axis in space.axes)
    return ModuleGenome(module=space.module, genes=genes)


def sample_random_genome(space: SearchSpace, rng: Stream) -> Genome:
    return Genome({m: sample_random(space.modules[m], rng) for m in space.module_order})


def mutate(space: ModuleSpace, parent: ModuleGenome, mutation_prob: float, rng: Stream) -> ModuleGenome:
    """Resample each gene uniformly (current value included) with
    probability ``mutation_prob``, otherwise copy it."""
    child, _ = mutate_counting(space, parent, mutation_prob, rng)
    return child


def mutate_counting(
    space: ModuleSpace, parent: ModuleGenome, mutation_prob: float, rng: Stream
) -> tuple[ModuleGenome, int]:
    """Like :func:`mutate`, also reporting how many resample events fired."""
    if not 0.0 <= mutation_prob <= 1.0:
        raise ValueError(f"mutation_prob must be in [0, 1], got {mutation_prob}")
    validate_module_genome(space, parent)
    genes = list(parent.genes)
    fired = 0
    for i, axis in enumerate(space.axes):
        if rng.random() < mutation_prob:
            fired += 1
            genes[i] = rng.randrange(len(axis.choices))
    return ModuleGenome(module=space.module, genes=tuple(genes)), fired


def crossover(space: ModuleSpace, parent_a: ModuleGenome, parent_b: ModuleGenome, rng: Stream) -> ModuleGenome:
    """Uniform crossover: each gene from parent_a or parent_b with p=1/2."""
    if parent_a.module != parent_b.module:
        raise ValueError(
            f"crossover parents from different modules: {parent_a.module!r} vs {parent_b.module!r}"
        )
    validate_module_genome(space, parent_a)
    validate_module_genome(space, parent_b)
    genes = tuple(
        parent_a.genes[i] if rng.random() < 0.5 else parent_b.genes[i]
        for i in range(len(space.axes))
    )
    return ModuleGenome(module=space.module, genes=genes)


def enumerate_module(space: ModuleSpace, cap: int = ENUMERATION_CAP) -> Iterator[ModuleGenome]:
    """Yield every module genome once, in lexicographic gene order."""
    if space.cardinality > cap:
        raise ValueError(
            f"module {space.module!r} cardinality {space.cardinality} exceeds enumeration cap {cap}"
        )
    sizes = [len(axis.choices) for axis in space.axes]
    genes = [0] * len(sizes)
    while True:
        yield ModuleGenome(module=space.module, genes=tuple(genes))
        for i in reversed(range(len(sizes))):
            genes[i] += 1
            if genes[i] < sizes[i]:
                break
            genes[i] = 0
        else:
            return


def enumerate_genomes(space: SearchSpace, cap: int = ENUMERATION_CAP) -> Iterator[Genome]:
    """Yield every full genome once, lexicographic with canonical module
    order most significant (backbone genes first)."""
    if space.cardinality > cap:
        raise ValueError(f"joint cardinality {space.cardinality} exceeds enumeration cap {cap}")

    order = space.module_order

    def rec(idx: int, acc: dict):
        if idx == len(order):
            yield Genome(dict(acc))
            return
        module_id = order[idx]
        for mg in enumerate_module(space.modules[module_id], cap=cap):
            acc[module_id] = mg
            yield from rec(idx + 1, acc)

    yield from rec(0, {})
