"""Deterministic, counter-based random streams.

All randomness in the engine flows through :class:`Stream` objects derived
from a single 64-bit master seed by hashing integer coordinates (cycle,
phase, generation, slot, purpose tag) with splitmix64. Streams are
counter-based: a checkpoint only needs to remember integer positions, and
any stream can be re-derived from scratch on resume. The same hash chain is
the contract for external evaluators, so the exact bit layout matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    """One splitmix64 step: advance by the golden gamma, then scramble.

    This is the well-known 64-bit finalizer (Steele et al.); it is trivially
    portable, which is why the evaluator wire protocol pins it.
    """
    x = (x + _GAMMA) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return (z ^ (z >> 31)) & MASK64


def fold(seed: int, *fields: int) -> int:
    """Hash a sequence of integer fields into 64 bits.

    Chain: k0 = seed, k_n = splitmix64(k_{n-1} XOR field_n). The fold order
    is part of the cross-process contract; never reorder fields.
    """
    k = seed & MASK64
    for f in fields:
        k = splitmix64(k ^ (f & MASK64))
    return k


def unit_float(h: int) -> float:
    """Map a 64-bit hash to [0, 1) by dividing by 2**64 (IEEE-754 double)."""
    return (h & MASK64) / 18446744073709551616.0


@dataclass
class Stream:
    """A counter-based random stream.

    Value ``i`` of the stream is ``splitmix64(key XOR i)``, so draws are
    independent of call history and the stream state is just ``(key,
    counter)``.
    """

    key: int
    counter: int = field(default=0)

    def u64(self) -> int:
        v = splitmix64(self.key ^ self.counter)
        self.counter += 1
        return v

    def random(self) -> float:
        """Next float in [0, 1) with 53 bits of precision."""
        return (self.u64() >> 11) * (1.0 / 9007199254740992.0)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n) via multiply-shift.

        Bias is bounded by n / 2**64, negligible for the small ranges used
        here (axis sizes, population indices).
        """
        if n <= 0:
            raise ValueError(f"randrange bound must be positive, got {n}")
        return (self.u64() * n) >> 64

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def spawn(self, *fields: int) -> "Stream":
        """Derive an independent child stream from integer coordinates."""
        return Stream(fold(self.key, *fields))


def stream_for(seed: int, *fields: int) -> Stream:
    """Derive the stream for a (seed, coordinates...) tuple."""
    return Stream(fold(seed, *fields))


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a content digest, used for space and config hashes."""
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h
