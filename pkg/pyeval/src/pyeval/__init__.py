"""Reference external evaluator for the search engine's wire protocol.

Implements the line-delimited JSON protocol (hello / eval / result /
shutdown) over standard streams and reproduces the engine's synthetic
fitness landscape bit-exactly from the published hash contract, using only
the standard library. It doubles as the template for plugging in a real
trainer: replace :func:`pyeval.landscape.fitness` with code that
instantiates and scores the requested architecture.
"""

PROTOCOL_VERSION = 1
