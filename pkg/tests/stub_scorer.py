"""Minimal external scorer speaking the newline-JSON wire protocol.

Test helper only: mirrors the builtin overlap/preference formulas so runs
scored through it must be byte-identical to builtin-scorer runs. Serves on
stdio by default, or TCP with --listen HOST:PORT. --batch-reverse answers
every two requests in reversed order to exercise out-of-order matching.
"""

import argparse
import json
import re
import socket
import sys

_TOKEN = re.compile(r"[a-z0-9]+")


def overlap(query, doc):
    query_terms = set(_TOKEN.findall(query.lower()))
    if not query_terms:
        return 0.0
    doc_terms = set(_TOKEN.findall(doc.lower()))
    return len(query_terms & doc_terms) / len(query_terms)


def handle_line(line):
    line = line.strip()
    if not line:
        return None
    try:
        request = json.loads(line)
        kind = request["kind"]
        if kind == "mono":
            score = overlap(request["query"], request["doc"])
        elif kind == "duo":
            delta = overlap(request["query"], request["doc"]) \
                - overlap(request["query"], request["doc_b"])
            score = min(1.0, max(0.0, 0.5 + delta / 2.0))
        else:
            raise ValueError(f"unknown kind {kind!r}")
        return {"id": request["id"], "score": score}
    except Exception as exc:  # malformed line: answer, do not die
        return {"id": None, "error": str(exc)}


def serve_stream(rfile, wfile, tag, batch_reverse=False):
    wfile.write((json.dumps({"ready": True, "tag": tag}) + "\n").encode())
    wfile.flush()
    held = []
    for raw in rfile:
        response = handle_line(raw.decode("utf-8", errors="replace"))
        if response is None:
            continue
        held.append(response)
        if not batch_reverse or len(held) == 2:
            for out in reversed(held) if batch_reverse else held:
                wfile.write((json.dumps(out) + "\n").encode())
            wfile.flush()
            held = []
    for out in held:
        wfile.write((json.dumps(out) + "\n").encode())
    wfile.flush()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--listen", help="HOST:PORT for TCP mode")
    parser.add_argument("--tag", default="stub-py")
    parser.add_argument("--batch-reverse", action="store_true")
    args = parser.parse_args()
    if not args.listen:
        serve_stream(sys.stdin.buffer, sys.stdout.buffer, args.tag,
                     args.batch_reverse)
        return 0
    host, _, port_text = args.listen.rpartition(":")
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        server.bind((host or "127.0.0.1", int(port_text)))
    except OSError as exc:
        print(f"cannot listen on {args.listen}: {exc}", file=sys.stderr)
        return 1
    server.listen(8)
    print(f"listening on {args.listen}", file=sys.stderr, flush=True)
    while True:
        conn, _addr = server.accept()
        with conn:
            serve_stream(conn.makefile("rb"), conn.makefile("wb"),
                         args.tag, args.batch_reverse)


if __name__ == "__main__":
    sys.exit(main())
