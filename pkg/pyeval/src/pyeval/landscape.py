"""The synthetic fitness landscape, reimplemented from the hash contract.

Contract (must match the engine bit-for-bit):

- splitmix64 step: x += 0x9E3779B97F4A7C15; x ^= x >> 30; x *= 0xBF58476D1CE4E5B9;
  x ^= x >> 27; x *= 0x94D049BB133111EB; x ^= x >> 31 (all mod 2**64).
- fold(seed, fields...): k = seed; for each field: k = splitmix64(k XOR field).
- unit value: fold result / 2**64 as an IEEE-754 double.
- module tags: 1 + rank of the module id in lexicographic order.
- unary term for gene i of module m with chosen raw value v:
  unit(fold(seed, tag(m), i, v)).
- coupling: positions i of the first module and j of the second pair up
  whenever (i + j) % 3 == 0; the pair term is
  unit(fold(seed, 0xBEEF, i, j, v_first, v_second)).
- fitness = (sum of unary + 2 * sum of pair terms) / (n_unary + 2 * n_pairs),
  summed in module order, positions ascending, pairs in (i, j) order.
- space hash: 64-bit FNV-1a over the canonical space document (sorted keys,
  compact separators), rendered as 16 hex digits.
"""

import json

MASK64 = (1 << 64) - 1
PAIR_TAG = 0xBEEF


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def fold(seed, *fields):
    k = seed & MASK64
    for field in fields:
        k = splitmix64(k ^ (field & MASK64))
    return k


def unit(h):
    return (h & MASK64) / 18446744073709551616.0


def fnv1a64(data):
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


class Space:
    """Just enough of the space document to serve fitness requests."""

    def __init__(self, document):
        self.modules = {
            name: [axis["choices"] for axis in body["axes"]]
            for name, body in document["modules"].items()
        }
        self.order = sorted(self.modules)
        canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
        self.space_hash = f"{fnv1a64(canonical.encode('utf-8')):016x}"
        if len(self.order) >= 2:
            n_a = len(self.modules[self.order[0]])
            n_b = len(self.modules[self.order[1]])
            self.coupling = [
                (i, j) for i in range(n_a) for j in range(n_b) if (i + j) % 3 == 0
            ]
        else:
            self.coupling = []
        self.n_unary = sum(len(axes) for axes in self.modules.values())

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def fitness(self, seed, genome):
        u_sum = 0.0
        for tag, module in enumerate(self.order, start=1):
            axes = self.modules[module]
            genes = genome[module]
            if len(genes) != len(axes):
                raise ValueError(f"module {module!r}: expected {len(axes)} genes, got {len(genes)}")
            for i, gene in enumerate(genes):
                u_sum += unit(fold(seed, tag, i, axes[i][gene]))

        p_sum = 0.0
        if self.coupling:
            axes_a = self.modules[self.order[0]]
            axes_b = self.modules[self.order[1]]
            genes_a = genome[self.order[0]]
            genes_b = genome[self.order[1]]
            for i, j in self.coupling:
                v_a = axes_a[i][genes_a[i]]
                v_b = axes_b[j][genes_b[j]]
                p_sum += unit(fold(seed, PAIR_TAG, i, j, v_a, v_b))

        denominator = self.n_unary + 2 * len(self.coupling)
        if denominator == 0:
            return 0.0
        return (u_sum + 2.0 * p_sum) / denominator
