"""Client for external scorer processes speaking newline-delimited JSON.

Endpoints:
  tcp:HOST:PORT      connect to a running scorer server
  stdio:COMMAND ...  spawn COMMAND and talk over its stdin/stdout

On connect the server must send {"ready": true, "tag": ...} as its first
line. Requests are {"id", "kind": "mono"|"duo", "query", "doc"[, "doc_b"]}
and responses {"id", "score"} may arrive in any order; they are matched
back by id. Request ids are never reused within a connection.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import socket
import subprocess
import threading
from typing import Sequence

from .errors import ConfigError, ProtocolError, StageFailure, Timeout

DEFAULT_TIMEOUT = 10.0


class _LineTransport:
    """Line-oriented IO with a reader thread, shared by tcp and stdio."""

    def __init__(self) -> None:
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader: threading.Thread | None = None

    def _start_reader(self, stream) -> None:
        def pump() -> None:
            try:
                for raw in stream:
                    if isinstance(raw, bytes):
                        raw = raw.decode("utf-8", errors="replace")
                    self._lines.put(raw)
            except (OSError, ValueError):
                pass
            self._lines.put(None)  # EOF marker

        self._reader = threading.Thread(target=pump, daemon=True)
        self._reader.start()

    def recv_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise Timeout(
                f"no response from scorer within {timeout}s") from None
        if line is None:
            raise ProtocolError("scorer closed the connection")
        return line

    def send_line(self, line: str) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class _TcpTransport(_LineTransport):
    def __init__(self, host: str, port: int, timeout: float) -> None:
        super().__init__()
        try:
            self._sock = socket.create_connection((host, port),
                                                  timeout=timeout)
        except OSError as exc:
            raise StageFailure(
                f"cannot connect to scorer at {host}:{port}: {exc}") from None
        # the timeout above bounds connection establishment only; response
        # deadlines are enforced per recv_line, so reads must block freely
        self._sock.settimeout(None)
        self._wfile = self._sock.makefile("wb")
        self._start_reader(self._sock.makefile("rb"))

    def send_line(self, line: str) -> None:
        try:
            self._wfile.write(line.encode("utf-8") + b"\n")
            self._wfile.flush()
        except OSError as exc:
            raise ProtocolError(f"cannot write to scorer: {exc}") from None

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class _StdioTransport(_LineTransport):
    def __init__(self, command: str) -> None:
        super().__init__()
        argv = shlex.split(command)
        if not argv:
            raise ConfigError("stdio endpoint has an empty command")
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise StageFailure(
                f"cannot start scorer {argv[0]!r}: {exc}") from None
        self._start_reader(self._proc.stdout)

    def send_line(self, line: str) -> None:
        try:
            self._proc.stdin.write(line.encode("utf-8") + b"\n")
            self._proc.stdin.flush()
        except (OSError, BrokenPipeError) as exc:
            raise ProtocolError(f"cannot write to scorer: {exc}") from None

    def close(self) -> None:
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


def _open_transport(endpoint: str, timeout: float) -> _LineTransport:
    if endpoint.startswith("tcp:"):
        rest = endpoint[len("tcp:"):]
        host, sep, port_text = rest.rpartition(":")
        if not sep or not host:
            raise ConfigError(
                f"tcp endpoint must be tcp:HOST:PORT, got {endpoint!r}")
        try:
            port = int(port_text)
        except ValueError:
            raise ConfigError(
                f"bad port in endpoint {endpoint!r}") from None
        return _TcpTransport(host, port, timeout)
    if endpoint.startswith("stdio:"):
        return _StdioTransport(endpoint[len("stdio:"):])
    raise ConfigError(
        f"endpoint must start with tcp: or stdio:, got {endpoint!r}")


def _parse_response(line: str) -> dict:
    try:
        response = json.loads(line)
    except json.JSONDecodeError:
        raise ProtocolError(
            f"unparseable scorer response: {line!r}") from None
    if not isinstance(response, dict):
        raise ProtocolError(f"scorer response is not an object: {line!r}")
    if "error" in response:
        raise ProtocolError(f"scorer reported an error: {response['error']}")
    return response


def _check_score(score) -> float:
    if not isinstance(score, (int, float)) or isinstance(score, bool) \
            or not math.isfinite(score) or not 0.0 <= score <= 1.0:
        raise ProtocolError(
            f"scorer score must be a number in [0, 1], got {score!r}")
    return float(score)


def external_score_batch(endpoint: str, requests: Sequence[dict],
                         timeout: float = DEFAULT_TIMEOUT) -> list[dict]:
    """One-shot batch: connect, handshake, send, collect responses by id.

    Requests must already carry unique ids; the returned responses are
    aligned with the request order regardless of arrival order.
    """
    ids = [request.get("id") for request in requests]
    if len(set(ids)) != len(ids) or any(i is None for i in ids):
        raise ValueError("requests must carry unique non-null ids")
    transport = _open_transport(endpoint, timeout)
    try:
        greeting = _parse_response(transport.recv_line(timeout))
        if greeting.get("ready") is not True:
            raise ProtocolError(f"scorer did not signal ready: {greeting!r}")
        for request in requests:
            transport.send_line(json.dumps(request))
        pending = {request["id"]: position
                   for position, request in enumerate(requests)}
        responses: list[dict] = [{}] * len(requests)
        while pending:
            line = transport.recv_line(timeout)
            if not line.strip():
                continue
            response = _parse_response(line)
            rid = response.get("id")
            if rid not in pending:
                raise ProtocolError(
                    f"scorer answered unknown request id {rid!r}")
            _check_score(response.get("score"))
            responses[pending.pop(rid)] = response
        return responses
    finally:
        transport.close()


class ExternalScorer:
    """Scorer backed by an external process; satisfies PairwiseScorer.

    Batch calls are serialized with a lock so concurrent per-query workers
    share one connection without interleaving id spaces.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.endpoint = endpoint
        self.timeout = timeout
        self._lock = threading.Lock()
        self._next_id = 0
        self._transport = _open_transport(endpoint, timeout)
        self.tag = self._handshake()

    def _handshake(self) -> str:
        greeting = _parse_response(self._transport.recv_line(self.timeout))
        if greeting.get("ready") is not True:
            raise ProtocolError(f"scorer did not signal ready: {greeting!r}")
        tag = greeting.get("tag", "")
        return tag if isinstance(tag, str) else ""

    def _score_batch(self, requests: list[dict]) -> list[float]:
        if not requests:
            return []
        with self._lock:
            pending: dict[int, int] = {}  # request id -> position
            for position, request in enumerate(requests):
                self._next_id += 1
                request["id"] = self._next_id
                pending[self._next_id] = position
                self._transport.send_line(json.dumps(request))
            scores: list[float] = [0.0] * len(requests)
            while pending:
                line = self._transport.recv_line(self.timeout)
                if not line.strip():
                    continue
                response = _parse_response(line)
                rid = response.get("id")
                if rid not in pending:
                    raise ProtocolError(
                        f"scorer answered unknown request id {rid!r}")
                scores[pending.pop(rid)] = _check_score(response.get("score"))
            return scores

    def mono_batch(self, query: str, docs: Sequence[str]) -> list[float]:
        return self._score_batch([
            {"kind": "mono", "query": query, "doc": doc} for doc in docs
        ])

    def duo_batch(self, query: str,
                  pairs: Sequence[tuple[str, str]]) -> list[float]:
        return self._score_batch([
            {"kind": "duo", "query": query, "doc": a, "doc_b": b}
            for a, b in pairs
        ])

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
