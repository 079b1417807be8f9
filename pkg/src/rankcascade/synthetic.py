"""Deterministic synthetic corpus for end-to-end pipeline experiments.

Construction (2000 passages, 50 queries, dim-64 embeddings):

* 40 "lexical" queries own three coined terms each. The relevant passage
  contains all three once in a long body; three short distractor passages
  repeat two of the three terms, which BM25's tf saturation still rewards
  enough to outrank the relevant passage (ranks 1-3 vs 4).
* 10 "vocabulary mismatch" queries share no terms with their relevant
  passage, so sparse retrieval cannot find it; five term-matching
  distractors fill the sparse list instead.
* Query i embeds as basis vector e_i. The mismatch-relevant passage embeds
  exactly as e_i (dense score 1.0). Every passage sharing a term with
  query i carries a -0.1 * e_i component, pushing it below the zero-score
  crowd in dense retrieval. All other passages live in dims 50..63,
  orthogonal to every query.

Net effect, provable rather than probabilistic: sparse-only recall@10 is
0.8, hybrid recall@10 is 1.0, fused NDCG@5 is at most 0.2, and the
mono/duo rerankers lift NDCG@5 to at least 0.8.

The generator re-derives the BM25 rankings it relies on and refuses to
emit a dataset that violates them.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Document, apply_expansions, render_index_text, segment_corpus
from .dense import EmbeddingStore, make_store, write_store_binary
from .evaluation import Qrels, write_qrels
from .lexical import build_index, search_sparse, tokenize

DIM = 64
N_QUERIES = 50
N_PASSAGES = 2000
EPSILON = 0.1
_RESIDUAL_BASE = 50  # dims 50..63 never appear in any query embedding


@dataclass
class SyntheticDataset:
    root: Path
    corpus: Path
    queries: Path
    expansions: Path
    qrels: Path
    passage_embeddings: Path
    query_embeddings: Path


def _is_mismatch(i: int) -> bool:
    return i % 5 == 4


def _query_terms(i: int) -> list[str]:
    prefix = "mterm" if _is_mismatch(i) else "qterm"
    return [f"{prefix}{i}{suffix}" for suffix in ("a", "b", "c")]


def _residual_row(slot: int) -> np.ndarray:
    row = np.zeros(DIM)
    row[_RESIDUAL_BASE + slot % (DIM - _RESIDUAL_BASE)] = 1.0
    return row


def _penalized_row(query_index: int, slot: int) -> np.ndarray:
    row = EPSILON * -_basis(query_index)
    row[_RESIDUAL_BASE + slot % (DIM - _RESIDUAL_BASE)] = math.sqrt(
        1.0 - EPSILON * EPSILON)
    return row


def _basis(i: int) -> np.ndarray:
    row = np.zeros(DIM)
    row[i] = 1.0
    return row


def build_dataset(root: Path, seed: int = 7) -> SyntheticDataset:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    pad_vocab = [f"pad{n}" for n in range(60)]
    fill_vocab = [f"fill{n}" for n in range(400)]
    ans_vocab = [f"ans{n}" for n in range(80)]

    docs: list[Document] = []
    qrels = Qrels()
    queries: list[tuple[str, str]] = []
    # passage_id -> row spec: ("relevant", i) | ("penalized", i, slot) |
    # ("filler", slot)
    expected_rows: dict[str, tuple] = {}

    def pads(count: int) -> list[str]:
        return [rng.choice(pad_vocab) for _ in range(count)]

    for i in range(N_QUERIES):
        qid = f"q{i:03d}"
        terms = _query_terms(i)
        queries.append((qid, " ".join(terms)))
        if _is_mismatch(i):
            rel_docid = f"mrel{i:03d}"
            body = " ".join(rng.choice(ans_vocab) for _ in range(20)) + "."
            docs.append(Document(docid=rel_docid, body=body))
            expected_rows[f"{rel_docid}#0"] = ("relevant", i)
            distractor_count = 5
        else:
            rel_docid = f"qrel{i:03d}"
            body = " ".join(terms + pads(37)) + "."
            docs.append(Document(docid=rel_docid, body=body))
            expected_rows[f"{rel_docid}#0"] = ("penalized", i)
            distractor_count = 3
        qrels.grades.setdefault(qid, {})[f"{rel_docid}#0"] = 3
        for d in range(distractor_count):
            docid = f"dis{i:03d}x{d}"
            pair = [terms[d % 3], terms[(d + 1) % 3]]
            words = pair * 4 + pads(2)
            docs.append(Document(docid=docid, body=" ".join(words) + "."))
            expected_rows[f"{docid}#0"] = ("penalized", i)
            if d < 2:
                qrels.grades[qid][f"{docid}#0"] = 0

    # Fillers: multi-window documents to exercise segmentation end to end.
    # Sentence counts cycle so windows (w=10, s=5) per doc are 1,1,2,3,4,5.
    target_fillers = N_PASSAGES - len(expected_rows)
    cycle = [3, 8, 12, 17, 22, 27]
    filler_docs = 0
    produced = 0
    sentence_counts: list[int] = []
    while produced < target_fillers:
        count = cycle[filler_docs % len(cycle)]
        windows = 1 + max(0, math.ceil((count - 10) / 5))
        if produced + windows > target_fillers:
            count, windows = 3, 1
        sentence_counts.append(count)
        produced += windows
        filler_docs += 1
    for n, count in enumerate(sentence_counts):
        docid = f"fdoc{n:04d}"
        sentences = [
            " ".join(rng.choice(fill_vocab)
                     for _ in range(rng.randint(4, 6))) + "."
            for _ in range(count)
        ]
        docs.append(Document(
            docid=docid,
            url=f"http://corpus.example/{docid}",
            title=" ".join(rng.choice(fill_vocab) for _ in range(2)),
            body=" ".join(sentences)))

    passages = segment_corpus(docs)
    if len(passages) != N_PASSAGES:
        raise RuntimeError(
            f"synthetic corpus produced {len(passages)} passages, "
            f"wanted {N_PASSAGES}")

    # Expansion queries on some filler passages only: they must never
    # introduce a query term, so they cannot disturb the rank guarantees.
    expansions: dict[str, list[str]] = {}
    for n, passage in enumerate(p for p in passages
                                if p.parent.startswith("fdoc")):
        if n % 7 == 0:
            expansions[passage.passage_id] = [
                " ".join(rng.choice(fill_vocab) for _ in range(3))
                for _ in range(1 + n % 3)
            ]

    # Embeddings.
    passage_items: dict[str, np.ndarray] = {}
    slot = 0
    for passage in passages:
        spec = expected_rows.get(passage.passage_id)
        if spec is not None and spec[0] == "relevant":
            passage_items[passage.passage_id] = _basis(spec[1])[None, :]
        elif spec is not None:
            passage_items[passage.passage_id] = \
                _penalized_row(spec[1], slot)[None, :]
            slot += 1
        else:
            rows = [_residual_row(slot + r) for r in range(1 + slot % 3)]
            passage_items[passage.passage_id] = np.stack(rows)
            slot += 1
    passage_store = make_store(DIM, passage_items)
    query_store = make_store(
        DIM, {qid: _basis(i)[None, :] for i, (qid, _) in enumerate(queries)})

    _self_check(docs, passages, expansions, queries)

    paths = SyntheticDataset(
        root=root,
        corpus=root / "corpus.tsv",
        queries=root / "queries.tsv",
        expansions=root / "expansions.tsv",
        qrels=root / "qrels.txt",
        passage_embeddings=root / "passages.emb",
        query_embeddings=root / "queries.emb",
    )
    with open(paths.corpus, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(f"{d.docid}\t{d.url}\t{d.title}\t{d.body}\n")
    with open(paths.queries, "w", encoding="utf-8") as fh:
        for qid, text in queries:
            fh.write(f"{qid}\t{text}\n")
    with open(paths.expansions, "w", encoding="utf-8") as fh:
        for pid in sorted(expansions):
            for q in expansions[pid]:
                fh.write(f"{pid}\t{q}\n")
    with open(paths.qrels, "w", encoding="utf-8") as fh:
        write_qrels(qrels, fh)
    with open(paths.passage_embeddings, "wb") as fh:
        write_store_binary(passage_store, fh)
    with open(paths.query_embeddings, "wb") as fh:
        write_store_binary(query_store, fh)
    return paths


def _self_check(docs, passages, expansions, queries) -> None:
    """Re-derive the sparse rankings the dataset's guarantees rest on."""
    expanded, unknown = apply_expansions(passages, expansions)
    if unknown:
        raise RuntimeError(f"expansions reference unknown passages: {unknown[:3]}")
    by_docid = {d.docid: d for d in docs}
    index = build_index(
        (p.passage_id, render_index_text(p, by_docid[p.parent],
                                         prepend_meta=True))
        for p in expanded)
    for i, (qid, text) in enumerate(queries):
        ranked = search_sparse(index, text, 10)
        ids = [c.item_id for c in ranked]
        if _is_mismatch(i):
            if len(ids) != 5 or any(item.startswith("mrel") for item in ids):
                raise RuntimeError(
                    f"{qid}: mismatch query must retrieve exactly its 5 "
                    f"distractors, got {ids}")
        else:
            if len(ids) != 4 or ids[3] != f"qrel{i:03d}#0":
                raise RuntimeError(
                    f"{qid}: relevant passage must rank 4th of 4, got {ids}")
