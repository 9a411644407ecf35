"""The request loop: line-delimited JSON over stdin/stdout.

Session shape:

    engine -> us    {"type":"hello","version":1,"space_hash":"<hex16>"}
    us -> engine    {"type":"hello","version":1,"space_hash":"<hex16>"}
    engine -> us    {"type":"eval","id":<u64>,"genome":{"<module>":[..],..}}
    us -> engine    {"type":"result","id":<u64>,"fitness":<float>}
    engine -> us    {"type":"shutdown"}

Unknown fields are ignored. A malformed request is answered with
``{"type":"error","id":...}`` and aborts the session with a nonzero exit.
To serve a real trainer instead of the synthetic landscape, swap the
``space.fitness`` call for model instantiation and scoring; everything
else stays.
"""

import argparse
import json
import sys

from . import PROTOCOL_VERSION
from .landscape import Space


def _emit(stream, obj):
    stream.write(json.dumps(obj) + "\n")
    stream.flush()


def serve(space, seed, stdin=None, stdout=None):
    """Run one protocol session; returns the process exit code."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    line = stdin.readline()
    if not line:
        return 1
    try:
        hello = json.loads(line)
    except json.JSONDecodeError:
        _emit(stdout, {"type": "error", "id": None})
        return 1
    if hello.get("type") != "hello" or hello.get("version") != PROTOCOL_VERSION:
        _emit(stdout, {"type": "error", "id": None})
        return 1
    # Always answer with our own hash; a mismatch is the engine's to refuse.
    _emit(stdout, {"type": "hello", "version": PROTOCOL_VERSION, "space_hash": space.space_hash})

    for line in stdin:
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            _emit(stdout, {"type": "error", "id": None})
            return 1
        kind = message.get("type")
        if kind == "shutdown":
            return 0
        if kind != "eval":
            _emit(stdout, {"type": "error", "id": message.get("id")})
            return 1
        try:
            value = space.fitness(seed, message["genome"])
        except (KeyError, IndexError, TypeError, ValueError):
            _emit(stdout, {"type": "error", "id": message.get("id")})
            return 1
        _emit(stdout, {"type": "result", "id": message["id"], "fitness": value})
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Reference synthetic-landscape evaluator (wire protocol v1)."
    )
    parser.add_argument("--space", required=True, help="Path to the space document.")
    parser.add_argument("--seed", type=int, default=0, help="Landscape seed.")
    args = parser.parse_args(argv)
    space = Space.load(args.space)
    sys.exit(serve(space, args.seed))


if __name__ == "__main__":
    main()
