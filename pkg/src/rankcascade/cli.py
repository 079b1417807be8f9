"""Command-line entry points.

One subcommand per invocation; exit codes are 0 success, 1 usage or
configuration error, 2 data or format error, 3 stage failure. All output
files are deterministic for identical inputs and flags.
"""

from __future__ import annotations

import argparse
import sys

from .candidates import ScoredCandidate
from .config import parse_config
from .corpus import (apply_expansions, read_corpus, read_expansions,
                     read_passages, read_queries, render_index_text,
                     segment_corpus, write_passages)
from .dense import load_embedding_store, search_dense
from .errors import ConfigError, DataError, FormatError, StageFailure
from .evaluation import (compare_reports, evaluate_run, make_run, parse_qrels,
                         parse_run, render_report, write_run)
from .external import ExternalScorer
from .fusion import DEFAULT_RRF_C, ensemble_fuse, fuse_rrf, fuse_union
from .lexical import (DEFAULT_B, DEFAULT_K1, build_index, read_index,
                      search_sparse, write_index)
from .pipeline import run_pipeline
from .rerank import OverlapScorer, duo_rerank, mono_rerank


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; we reserve 2 for data errors."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rankcascade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", parents=[], help="split documents into "
                       "sliding-window passages")
    p.add_argument("--corpus", required=True)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("--out", required=True)

    p = sub.add_parser("expand", help="attach expansion queries to passages")
    p.add_argument("--passages", required=True)
    p.add_argument("--expansions", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("index", help="build a BM25 index from passages")
    p.add_argument("--in", dest="passages", required=True)
    p.add_argument("--corpus", help="parent documents for url/title prepend")
    p.add_argument("--prepend-meta", action="store_true")
    p.add_argument("--k1", type=float, default=DEFAULT_K1)
    p.add_argument("--b", type=float, default=DEFAULT_B)
    p.add_argument("--out", required=True)

    p = sub.add_parser("embed-load-check", help="validate an embedding store")
    p.add_argument("--store", required=True)

    p = sub.add_parser("search", help="sparse / dense / hybrid retrieval")
    p.add_argument("--index")
    p.add_argument("--queries", required=True)
    p.add_argument("--mode", choices=("sparse", "dense", "hybrid"),
                   default="sparse")
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--passage-emb")
    p.add_argument("--query-emb")
    p.add_argument("--fusion", choices=("rrf", "union"), default="rrf")
    p.add_argument("--c", type=float, default=DEFAULT_RRF_C)
    p.add_argument("--tag", default="rankcascade")
    p.add_argument("--out", required=True)

    p = sub.add_parser("rerank", help="mono or duo rerank of a run's heads")
    p.add_argument("--stage", choices=("mono", "duo"), required=True)
    p.add_argument("--scorer", choices=("builtin", "external"),
                   default="builtin")
    p.add_argument("--endpoint")
    p.add_argument("--in", dest="run", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--passages", required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--method", choices=("SUM", "SYM-SUM"), default="SYM-SUM")
    p.add_argument("--tag")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fuse", help="fuse runs (ensemble)")
    p.add_argument("--method", choices=("rrf", "mean"), default="mean")
    p.add_argument("--in", dest="runs", nargs="+", required=True)
    p.add_argument("--c", type=float, default=DEFAULT_RRF_C)
    p.add_argument("--tag", default="ensemble")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--threshold", type=int, default=2)
    p.add_argument("--exp-gain", action="store_true")
    p.add_argument("--compare", help="second run for per-metric deltas")

    p = sub.add_parser("pipeline", help="full cascade from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--tag")
    p.add_argument("--out", required=True)

    return parser


def _read_run(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_run(fh, path=path)


def _cmd_segment(args) -> int:
    with open(args.corpus, "r", encoding="utf-8") as fh:
        docs = read_corpus(fh, path=args.corpus)
    if args.window < 1 or not 1 <= args.stride <= args.window:
        raise ConfigError(
            f"need window >= 1 and 1 <= stride <= window, got "
            f"window={args.window} stride={args.stride}")
    passages = segment_corpus(docs, args.window, args.stride)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_passages(passages, fh)
    print(f"wrote {len(passages)} passages from {len(docs)} documents")
    return 0


def _cmd_expand(args) -> int:
    with open(args.passages, "r", encoding="utf-8") as fh:
        passages = read_passages(fh, path=args.passages)
    with open(args.expansions, "r", encoding="utf-8") as fh:
        expansions = read_expansions(fh, path=args.expansions)
    passages, unknown = apply_expansions(passages, expansions)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_passages(passages, fh)
    attached = sum(len(p.expansion_queries) for p in passages)
    print(f"attached {attached} expansion queries")
    if unknown:
        print(f"warning: {len(unknown)} expansion key(s) match no passage",
              file=sys.stderr)
    return 0


def _cmd_index(args) -> int:
    with open(args.passages, "r", encoding="utf-8") as fh:
        passages = read_passages(fh, path=args.passages)
    parents = {}
    if args.corpus:
        with open(args.corpus, "r", encoding="utf-8") as fh:
            parents = {d.docid: d for d in read_corpus(fh, path=args.corpus)}
    if args.prepend_meta and not args.corpus:
        raise ConfigError("--prepend-meta needs --corpus for url/title")
    records = [(p.passage_id,
                render_index_text(p, parents.get(p.parent),
                                  prepend_meta=args.prepend_meta))
               for p in passages]
    index = build_index(records, k1=args.k1, b=args.b)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_index(index, fh)
    print(f"indexed {index.N} passages, {len(index.postings)} terms")
    return 0


def _cmd_embed_load_check(args) -> int:
    store = load_embedding_store(args.store)
    rows = sum(m.shape[0] for m in store.items.values())
    print(f"ok items={len(store)} dim={store.dim} rows={rows}")
    return 0


def _cmd_search(args) -> int:
    if args.k < 1:
        raise ConfigError(f"--k must be >= 1, got {args.k}")
    index = None
    if args.mode in ("sparse", "hybrid"):
        if not args.index:
            raise ConfigError(f"mode {args.mode} needs --index")
        with open(args.index, "r", encoding="utf-8") as fh:
            index = read_index(fh, path=args.index)
    passage_store = query_store = None
    if args.mode in ("dense", "hybrid"):
        if not args.passage_emb or not args.query_emb:
            raise ConfigError(
                f"mode {args.mode} needs --passage-emb and --query-emb")
        passage_store = load_embedding_store(args.passage_emb)
        query_store = load_embedding_store(args.query_emb)
    with open(args.queries, "r", encoding="utf-8") as fh:
        queries = read_queries(fh, path=args.queries)
    lists: dict[str, list[tuple[str, float]]] = {}
    for qid, text in queries:
        per_mode = []
        if index is not None:
            per_mode.append(search_sparse(index, text, args.k))
        if query_store is not None:
            if qid not in query_store:
                raise FormatError(f"query {qid!r} has no embedding")
            per_mode.append(search_dense(query_store.items[qid],
                                         passage_store, args.k))
        if len(per_mode) == 1:
            fused = per_mode[0]
        elif args.fusion == "union":
            fused = fuse_union(per_mode, args.k)
        else:
            fused = fuse_rrf(per_mode, args.k, c=args.c)
        lists[qid] = [(c.item_id, c.score) for c in fused]
    run = make_run(args.tag, lists)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_run(run, fh)
    print(f"wrote run for {len(lists)} queries")
    return 0


def _cmd_rerank(args) -> int:
    if args.scorer == "external" and not args.endpoint:
        raise ConfigError("--scorer external needs --endpoint")
    run = _read_run(args.run)
    with open(args.queries, "r", encoding="utf-8") as fh:
        queries = dict(read_queries(fh, path=args.queries))
    with open(args.passages, "r", encoding="utf-8") as fh:
        passages = read_passages(fh, path=args.passages)
    texts = {p.passage_id: p.text for p in passages}
    scorer = (ExternalScorer(args.endpoint) if args.scorer == "external"
              else OverlapScorer())
    tag = args.tag if args.tag else f"{run.tag}-{args.stage}"
    try:
        lists: dict[str, list[tuple[str, float]]] = {}
        for qid in sorted(run.rankings):
            if qid not in queries:
                raise FormatError(f"query {qid!r} missing from {args.queries}")
            candidates = [ScoredCandidate(item_id=item, score=score,
                                          stage="input")
                          for item, _rank, score in run.rankings[qid]]
            if args.stage == "mono":
                ranked = mono_rerank(queries[qid], candidates, scorer,
                                     args.depth, texts)
            else:
                ranked = duo_rerank(queries[qid], candidates, scorer,
                                    args.depth, args.method, texts)
            lists[qid] = [(c.item_id, c.score) for c in ranked]
    finally:
        if isinstance(scorer, ExternalScorer):
            scorer.close()
    with open(args.out, "w", encoding="utf-8") as fh:
        write_run(make_run(tag, lists), fh)
    print(f"reranked {len(lists)} queries ({args.stage}, depth {args.depth})")
    return 0


def _cmd_fuse(args) -> int:
    runs = [_read_run(path) for path in args.runs]
    fused = ensemble_fuse(runs, method=args.method, c=args.c, tag=args.tag)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_run(fused, fh)
    print(f"fused {len(runs)} runs over {len(fused.rankings)} queries")
    return 0


def _cmd_eval(args) -> int:
    if args.threshold < 1:
        raise ConfigError(f"--threshold must be >= 1, got {args.threshold}")
    run = _read_run(args.run)
    with open(args.qrels, "r", encoding="utf-8") as fh:
        qrels = parse_qrels(fh, path=args.qrels)
    report = evaluate_run(run, qrels, threshold=args.threshold,
                          exponential=args.exp_gain)
    print(render_report(report))
    print()
    for line in report.machine_lines():
        print(line)
    if args.compare:
        other = evaluate_run(_read_run(args.compare), qrels,
                             threshold=args.threshold,
                             exponential=args.exp_gain)
        print()
        print(compare_reports(report, other))
    return 0


def _cmd_pipeline(args) -> int:
    config = parse_config(args.config)
    if args.tag:
        config.tag = args.tag
    run, warnings = run_pipeline(config, threads=args.threads)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_run(run, fh)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote run {run.tag!r} for {len(run.rankings)} queries")
    return 0


_COMMANDS = {
    "segment": _cmd_segment,
    "expand": _cmd_expand,
    "index": _cmd_index,
    "embed-load-check": _cmd_embed_load_check,
    "search": _cmd_search,
    "rerank": _cmd_rerank,
    "fuse": _cmd_fuse,
    "eval": _cmd_eval,
    "pipeline": _cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
