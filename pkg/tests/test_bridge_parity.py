"""Cross-language parity: the compiled bridge must be indistinguishable
from the builtin scorer on the wire. Skipped entirely when the bridge has
not been built (cd bridge && npm install && npm run build) -- the rest of
the suite never depends on it.
"""

import io
import json
import socket
import subprocess
import sys

import pytest

from conftest import BRIDGE_DIR, BRIDGE_MAIN
from rankcascade.config import config_from_mapping
from rankcascade.evaluation import write_run
from rankcascade.external import ExternalScorer
from rankcascade.pipeline import run_pipeline
from rankcascade.rerank import builtin_duo_preference, builtin_overlap_score

pytestmark = pytest.mark.skipif(
    not BRIDGE_MAIN.exists(),
    reason=f"bridge not built: {BRIDGE_MAIN} missing")

BRIDGE_STDIO = f"stdio:node {BRIDGE_MAIN}"


@pytest.fixture(scope="module")
def bridge_tcp():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    proc = subprocess.Popen(
        ["node", str(BRIDGE_MAIN), "--listen", f"127.0.0.1:{port}"],
        cwd=BRIDGE_DIR, stderr=subprocess.PIPE)
    banner = proc.stderr.readline().decode()
    if not banner.startswith("listening"):
        proc.wait(timeout=5)
        pytest.fail(f"bridge did not start: {banner!r}")
    yield f"tcp:127.0.0.1:{port}"
    proc.terminate()
    proc.wait(timeout=5)


def _run_text(run):
    buffer = io.StringIO()
    write_run(run, buffer)
    return buffer.getvalue()


def _configs(synthetic_config, endpoint):
    builtin = config_from_mapping(synthetic_config(
        tag="parity", mono={"depth": 20}, duo={"depth": 10}))
    external = config_from_mapping(synthetic_config(
        tag="parity",
        mono={"depth": 20, "scorer": "external", "endpoint": endpoint},
        duo={"depth": 10}))
    return builtin, external


def test_handshake_tag():
    with ExternalScorer(BRIDGE_STDIO + " --tag check") as scorer:
        assert scorer.tag == "check"


def test_scores_match_builtin_exactly():
    query = "tomato soup recipe"
    docs = ["a simple tomato soup recipe", "soup of the day",
            "gardening with tomato plants", "T5-base", ""]
    with ExternalScorer(BRIDGE_STDIO) as scorer:
        mono = scorer.mono_batch(query, docs)
        pairs = [(a, b) for a in docs for b in docs]
        duo = scorer.duo_batch(query, pairs)
    assert mono == [builtin_overlap_score(query, d) for d in docs]
    assert duo == [builtin_duo_preference(query, a, b) for a, b in pairs]


def test_duo_antisymmetry_is_exact_over_the_wire():
    query = "red apples"
    docs = ["red apples", "apples", "green pears", "wine"]
    pairs = [(a, b) for a in docs for b in docs if a != b]
    with ExternalScorer(BRIDGE_STDIO) as scorer:
        forward = scorer.duo_batch(query, pairs)
        backward = scorer.duo_batch(query, [(b, a) for a, b in pairs])
    for f, b in zip(forward, backward):
        assert f + b == 1.0  # exact, not approximate


def test_pipeline_stdio_parity(synthetic_config):
    builtin, external = _configs(synthetic_config, BRIDGE_STDIO)
    builtin_run, _ = run_pipeline(builtin)
    external_run, _ = run_pipeline(external)
    assert _run_text(external_run) == _run_text(builtin_run)


def test_pipeline_tcp_parity(synthetic_config, bridge_tcp):
    builtin, external = _configs(synthetic_config, bridge_tcp)
    builtin_run, _ = run_pipeline(builtin)
    external_run, _ = run_pipeline(external)
    assert _run_text(external_run) == _run_text(builtin_run)


def test_bridge_survives_garbage_and_keeps_serving():
    proc = subprocess.Popen(
        ["node", str(BRIDGE_MAIN), "--stdio"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE)
    try:
        assert json.loads(proc.stdout.readline())["ready"] is True
        proc.stdin.write(b"}{ not json\n")
        proc.stdin.flush()
        reply = json.loads(proc.stdout.readline())
        assert reply["id"] is None and "error" in reply
        proc.stdin.write(json.dumps(
            {"id": 2, "kind": "mono", "query": "a", "doc": "a"}).encode()
            + b"\n")
        proc.stdin.flush()
        assert json.loads(proc.stdout.readline()) == {"id": 2, "score": 1.0}
    finally:
        proc.stdin.close()
        proc.wait(timeout=5)


def test_bridge_refuses_busy_port(bridge_tcp):
    port = bridge_tcp.rsplit(":", 1)[1]
    second = subprocess.run(
        ["node", str(BRIDGE_MAIN), "--listen", f"127.0.0.1:{port}"],
        capture_output=True, timeout=15)
    assert second.returncode == 1
    assert b"cannot listen" in second.stderr
