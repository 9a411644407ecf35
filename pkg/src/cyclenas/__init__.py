"""Constraint-aware cyclic evolutionary architecture search.

The engine alternates evolutionary optimization over the modules of a
detector-style network (backbone, head), carrying a ranked elite buffer per
module across alternation cycles, under analytical microcontroller resource
budgets. All randomness is counter-based and derived from one master seed,
so runs are reproducible bit-for-bit and can be interrupted and resumed at
any generation boundary.
"""

__version__ = "0.1.0"
