"""End-to-end retrieval pipeline: segment, index, retrieve, fuse, rerank.

The per-query work is independent and side-effect free, so a thread pool
only changes wall time, never output: results are collected in query order
and every stage sorts with the one global tie rule.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .candidates import ScoredCandidate
from .config import PipelineConfig
from .corpus import (apply_expansions, read_corpus, read_expansions,
                     read_queries, render_index_text, segment_corpus)
from .dense import EmbeddingStore, load_embedding_store, search_dense
from .errors import FormatError
from .evaluation import Run, make_run
from .external import ExternalScorer
from .fusion import fuse_rrf, fuse_union
from .lexical import InvertedIndex, build_index, search_sparse
from .rerank import OverlapScorer, PairwiseScorer, duo_rerank, mono_rerank


@dataclass
class PipelineData:
    """Everything loaded/derived once per pipeline invocation."""

    queries: list[tuple[str, str]]
    index: InvertedIndex | None
    texts: dict[str, str]  # passage_id -> raw passage text (reranker input)
    passage_store: EmbeddingStore | None = None
    query_store: EmbeddingStore | None = None
    warnings: list[str] = field(default_factory=list)


def prepare(config: PipelineConfig) -> PipelineData:
    with open(config.corpus, "r", encoding="utf-8") as fh:
        docs = read_corpus(fh, path=config.corpus)
    passages = segment_corpus(docs, config.window, config.stride)
    warnings: list[str] = []
    if config.expansions:
        with open(config.expansions, "r", encoding="utf-8") as fh:
            expansions = read_expansions(fh, path=config.expansions)
        passages, unknown = apply_expansions(passages, expansions)
        if unknown:
            warnings.append(
                f"{len(unknown)} expansion key(s) match no passage: "
                f"{', '.join(unknown[:5])}{'...' if len(unknown) > 5 else ''}")
    by_docid = {d.docid: d for d in docs}
    texts = {p.passage_id: p.text for p in passages}

    index = None
    if config.mode in ("sparse", "hybrid"):
        records = [
            (p.passage_id,
             render_index_text(p, parent=by_docid[p.parent],
                               prepend_meta=config.prepend_meta))
            for p in passages
        ]
        index = build_index(records, k1=config.bm25.k1, b=config.bm25.b)

    passage_store = query_store = None
    if config.mode in ("dense", "hybrid"):
        passage_store = load_embedding_store(config.passage_embeddings)
        query_store = load_embedding_store(config.query_embeddings)
        if passage_store.dim != query_store.dim:
            raise FormatError(
                f"passage embeddings dim {passage_store.dim} != query "
                f"embeddings dim {query_store.dim}")
        missing = [p for p in texts if p not in passage_store]
        if missing:
            raise FormatError(
                f"{len(missing)} passage(s) have no embeddings, first: "
                f"{missing[0]!r}")

    with open(config.queries, "r", encoding="utf-8") as fh:
        queries = read_queries(fh, path=config.queries)
    if query_store is not None:
        for qid, _text in queries:
            if qid not in query_store:
                raise FormatError(f"query {qid!r} has no embedding")
    return PipelineData(queries=queries, index=index, texts=texts,
                        passage_store=passage_store, query_store=query_store,
                        warnings=warnings)


def _make_scorer(config: PipelineConfig) -> PairwiseScorer:
    if config.mono is not None and config.mono.scorer == "external":
        return ExternalScorer(config.mono.endpoint)
    return OverlapScorer()


def _retrieve(config: PipelineConfig, data: PipelineData, qid: str,
              text: str) -> list[ScoredCandidate]:
    lists: list[list[ScoredCandidate]] = []
    if config.mode in ("sparse", "hybrid"):
        lists.append(search_sparse(data.index, text, config.k_sparse))
    if config.mode in ("dense", "hybrid"):
        query_matrix = data.query_store.items[qid]
        lists.append(search_dense(query_matrix, data.passage_store,
                                  config.k_dense))
    if len(lists) == 1:
        return lists[0]
    depth = max(config.k_sparse, config.k_dense)
    if config.fusion.method == "union":
        return fuse_union(lists, depth)
    return fuse_rrf(lists, depth, c=config.fusion.c)


def _rank_query(config: PipelineConfig, data: PipelineData,
                scorer: PairwiseScorer, qid: str,
                text: str) -> list[ScoredCandidate]:
    candidates = _retrieve(config, data, qid, text)
    if config.mono is not None:
        candidates = mono_rerank(text, candidates, scorer,
                                 config.mono.depth, data.texts)
    if config.duo is not None and len(candidates) >= 2:
        candidates = duo_rerank(text, candidates, scorer, config.duo.depth,
                                config.duo.method, data.texts)
    return candidates


def run_pipeline(config: PipelineConfig,
                 threads: int | None = None) -> tuple[Run, list[str]]:
    """Execute the configured cascade; returns (run, warnings).

    `threads` overrides config.threads; it must never change the output,
    only the wall time.
    """
    data = prepare(config)
    scorer = _make_scorer(config)
    thread_count = config.threads if threads is None else threads
    if thread_count < 1:
        raise ValueError(f"threads must be >= 1, got {thread_count}")

    def work(query: tuple[str, str]) -> list[tuple[str, float]]:
        qid, text = query
        ranked = _rank_query(config, data, scorer, qid, text)
        return [(c.item_id, c.score) for c in ranked]

    try:
        if thread_count == 1:
            ranked_lists = [work(q) for q in data.queries]
        else:
            with ThreadPoolExecutor(max_workers=thread_count) as pool:
                ranked_lists = list(pool.map(work, data.queries))
    finally:
        if isinstance(scorer, ExternalScorer):
            scorer.close()

    run = make_run(config.tag,
                   {qid: pairs for (qid, _), pairs
                    in zip(data.queries, ranked_lists)})
    if config.ensemble is not None:
        run = _apply_ensemble(config, run)
    return run, data.warnings


def _apply_ensemble(config: PipelineConfig, run: Run) -> Run:
    from .evaluation import parse_run
    from .fusion import ensemble_fuse

    runs = [run]
    for path in config.ensemble.runs:
        with open(path, "r", encoding="utf-8") as fh:
            runs.append(parse_run(fh, path=path))
    return ensemble_fuse(runs, method=config.ensemble.method,
                         c=config.fusion.c, tag=config.tag)
