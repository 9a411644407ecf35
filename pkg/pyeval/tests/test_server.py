import io
import json
import subprocess
import sys
from pathlib import Path

from pyeval.landscape import Space
from pyeval.server import serve
from test_landscape import ARGMAX_GENOME_FITNESS, TINY16, TINY16_HASH


def run_session(lines, seed=42):
    stdin = io.StringIO("".join(json.dumps(m) + "\n" for m in lines))
    stdout = io.StringIO()
    code = serve(Space(TINY16), seed, stdin=stdin, stdout=stdout)
    return code, [json.loads(line) for line in stdout.getvalue().splitlines()]


def hello():
    return {"type": "hello", "version": 1, "space_hash": TINY16_HASH}


def test_handshake_and_shutdown():
    code, replies = run_session([hello(), {"type": "shutdown"}])
    assert code == 0
    assert replies == [{"type": "hello", "version": 1, "space_hash": TINY16_HASH}]


def test_eval_round_trip():
    code, replies = run_session([
        hello(),
        {"type": "eval", "id": 0, "genome": {"backbone": [1, 0], "head": [1, 0]}},
        {"type": "eval", "id": 1, "genome": {"backbone": [0, 0], "head": [0, 0]},
         "extra_field": "ignored"},
        {"type": "shutdown"},
    ])
    assert code == 0
    assert replies[1] == {"type": "result", "id": 0, "fitness": ARGMAX_GENOME_FITNESS}
    assert replies[2]["id"] == 1
    assert 0.0 <= replies[2]["fitness"] < 1.0


def test_every_eval_gets_exactly_one_result():
    requests = [
        {"type": "eval", "id": i, "genome": {"backbone": [i % 2, 0], "head": [0, i % 2]}}
        for i in range(8)
    ]
    code, replies = run_session([hello(), *requests, {"type": "shutdown"}])
    assert code == 0
    result_ids = [r["id"] for r in replies if r["type"] == "result"]
    assert result_ids == list(range(8))


def test_malformed_request_answers_error_and_aborts():
    stdin = io.StringIO(json.dumps(hello()) + "\nnot json at all\n")
    stdout = io.StringIO()
    code = serve(Space(TINY16), 42, stdin=stdin, stdout=stdout)
    assert code == 1
    replies = [json.loads(line) for line in stdout.getvalue().splitlines()]
    assert replies[-1]["type"] == "error"


def test_bad_eval_payload_answers_error():
    code, replies = run_session([
        hello(),
        {"type": "eval", "id": 5, "genome": {"backbone": [0]}},
    ])
    assert code == 1
    assert replies[-1] == {"type": "error", "id": 5}


def test_wrong_protocol_version_rejected():
    code, replies = run_session([{"type": "hello", "version": 2, "space_hash": TINY16_HASH}])
    assert code == 1
    assert replies[0]["type"] == "error"


def test_subprocess_end_to_end(tmp_path):
    space_file = tmp_path / "space.json"
    space_file.write_text(json.dumps(TINY16))
    src = str(Path(__file__).resolve().parent.parent / "src")
    process = subprocess.Popen(
        [sys.executable, "-m", "pyeval", "--space", str(space_file), "--seed", "42"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1,
        env={**__import__("os").environ, "PYTHONPATH": src},
    )
    try:
        process.stdin.write(json.dumps(hello()) + "\n")
        process.stdin.flush()
        assert json.loads(process.stdout.readline())["space_hash"] == TINY16_HASH
        process.stdin.write(json.dumps(
            {"type": "eval", "id": 7, "genome": {"backbone": [1, 0], "head": [1, 0]}}
        ) + "\n")
        process.stdin.flush()
        reply = json.loads(process.stdout.readline())
        assert reply == {"type": "result", "id": 7, "fitness": ARGMAX_GENOME_FITNESS}
        process.stdin.write(json.dumps({"type": "shutdown"}) + "\n")
        process.stdin.flush()
        assert process.wait(timeout=10) == 0
    finally:
        if process.poll() is None:
            process.kill()
