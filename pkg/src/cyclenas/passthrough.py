"""Per-module elite memory carried across alternation cycles.

When the search switches back to a module, part of its new population is
seeded from this buffer instead of being resampled from scratch, which is
what keeps the alternating search from repeatedly falling off a cliff at
every module switch.

The buffer always reflects the module's most recent optimization cycle:
storing a phase result *replaces* the previous entries rather than merging
with them, because fitness values measured against an older complementary
assignment are not comparable with fresh ones. Draws are a deterministic
top-n prefix of the ranking; there is no sampling randomness inside the
buffer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

from .space import ModuleGenome

if TYPE_CHECKING:  # pragma: no cover
    from .evolution import PhaseResult

logger = logging.getLogger(__name__)

DEFAULT_PASSTHROUGH_RATIO = 0.6


@dataclass(frozen=True)
class BufferEntry:
    module_genome: ModuleGenome
    fitness_at_store_time: float
    cycle_stored: int


@dataclass
class PassthroughBuffer:
    """Ranked, deduplicated elite memory for one module.

    Entries are sorted by stored fitness descending (ties: lexicographic
    genes ascending) and capped at ``capacity``. The default capacity ties
    the buffer to the population size, and the default ratio keeps 60% of a
    fresh population coming from memory.
    """

    module: str
    capacity: int = 100
    passthrough_ratio: float = DEFAULT_PASSTHROUGH_RATIO
    entries: tuple[BufferEntry, ...] = field(default=())

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"buffer capacity must be >= 1, got {self.capacity}")
        if not 0.0 <= self.passthrough_ratio <= 1.0:
            raise ValueError(f"passthrough_ratio must be in [0, 1], got {self.passthrough_ratio}")

    def store(self, phase_result: "PhaseResult", cycle: int) -> None:
        """Replace the buffer with the phase's final ranked population.

        Duplicate genomes keep their first (highest-ranked) occurrence.
        """
        if phase_result.module != self.module:
            raise ValueError(
                f"phase result for module {phase_result.module!r} "
                f"stored into buffer for {self.module!r}"
            )
        if not phase_result.ranked_population:
            logger.warning("empty phase population for %r; buffer left unchanged", self.module)
            return
        seen: set[tuple[int, ...]] = set()
        fresh: list[BufferEntry] = []
        for candidate in phase_result.ranked_population:
            genes = candidate.module_genome.genes
            if genes in seen:
                continue
            seen.add(genes)
            fresh.append(
                BufferEntry(
                    module_genome=candidate.module_genome,
                    fitness_at_store_time=candidate.fitness,
                    cycle_stored=cycle,
                )
            )
            if len(fresh) >= self.capacity:
                break
        self.entries = tuple(fresh)

    def draw_elites(self, n: int) -> list[ModuleGenome]:
        """Top min(n, len) genomes in rank order."""
        if n < 0:
            raise ValueError(f"cannot draw {n} elites")
        return [entry.module_genome for entry in self.entries[:n]]

    def to_dict(self) -> dict:
        return {
            "module": self.module,
            "capacity": self.capacity,
            "passthrough_ratio": self.passthrough_ratio,
            "entries": [
                {
                    "genes": list(e.module_genome.genes),
                    "fitness": e.fitness_at_store_time,
                    "cycle": e.cycle_stored,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "PassthroughBuffer":
        buf = cls(
            module=obj["module"],
            capacity=obj["capacity"],
            passthrough_ratio=obj["passthrough_ratio"],
        )
        buf.entries = tuple(
            BufferEntry(
                module_genome=ModuleGenome(module=obj["module"], genes=tuple(e["genes"])),
                fitness_at_store_time=e["fitness"],
                cycle_stored=e["cycle"],
            )
            for e in obj["entries"]
        )
        return buf
