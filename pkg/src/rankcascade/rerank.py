"""Pointwise (mono) and pairwise (duo) reranking of candidate heads.

mono rescores the top k1 candidates independently with a relevance score
in [0, 1]. duo scores ordered pairs among the top m and aggregates the
preference matrix:

  SUM      s_i = sum_{j != i} p_ij
  SYM-SUM  s_i = sum_{j != i} (p_ij + (1 - p_ji))

Both restore any strict preference order exactly when the matrix is the
0/1 matrix induced by that order.

Candidates below the reranked head keep their previous order; their scores
are remapped to descending negatives so the emitted list stays globally
sorted (evaluators re-sort runs by score, which must not shuffle the tail
back above the head).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

from .candidates import ScoredCandidate, rank_sort
from .errors import ConfigError, StageFailure
from .lexical import tokenize

DEFAULT_MONO_DEPTH = 50
DEFAULT_DUO_DEPTH = 50
DUO_METHODS = ("SUM", "SYM-SUM")


def builtin_overlap_score(query: str, doc: str) -> float:
    """Fraction of unique query tokens that occur in the document.

    Cheap, deterministic stand-in for a learned pointwise scorer; always
    in [0, 1], and 0.0 for a query with no tokens.
    """
    query_terms = set(tokenize(query))
    if not query_terms:
        return 0.0
    doc_terms = set(tokenize(doc))
    return len(query_terms & doc_terms) / len(query_terms)


def builtin_duo_preference(query: str, doc_a: str, doc_b: str) -> float:
    """Pairwise preference 0.5 + (overlap_a - overlap_b) / 2, clamped.

    Antisymmetric by construction: p(a,b) + p(b,a) == 1 exactly, because
    the two differences are IEEE negations of each other.
    """
    delta = builtin_overlap_score(query, doc_a) \
        - builtin_overlap_score(query, doc_b)
    return min(1.0, max(0.0, 0.5 + delta / 2.0))


class PairwiseScorer(Protocol):
    tag: str

    def mono_batch(self, query: str, docs: Sequence[str]) -> list[float]: ...

    def duo_batch(self, query: str,
                  pairs: Sequence[tuple[str, str]]) -> list[float]: ...


class OverlapScorer:
    """Builtin scorer: token-overlap mono, overlap-difference duo."""

    tag = "overlap"

    def mono_batch(self, query: str, docs: Sequence[str]) -> list[float]:
        return [builtin_overlap_score(query, d) for d in docs]

    def duo_batch(self, query: str,
                  pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [builtin_duo_preference(query, a, b) for a, b in pairs]


@dataclass(frozen=True)
class Scorer:
    """Scorer selection: kind 'builtin' or 'external' (with endpoint)."""

    kind: str = "builtin"
    endpoint: str | None = None
    tag: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("builtin", "external"):
            raise ConfigError(f"unknown scorer kind {self.kind!r}")
        if self.kind == "external" and not self.endpoint:
            raise ConfigError("external scorer needs an endpoint")


@dataclass
class PairMatrix:
    """Preference matrix over the duo head: p[i, j] for ordered pairs."""

    ids: list[str]
    p: np.ndarray

    def __post_init__(self) -> None:
        m = len(self.ids)
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.shape != (m, m):
            raise ValueError(
                f"pair matrix shape {self.p.shape} does not match "
                f"{m} ids")
        off_diag = ~np.eye(m, dtype=bool)
        values = self.p[off_diag]
        if values.size and ((values < 0.0) | (values > 1.0)).any():
            raise ValueError("pair preferences must lie in [0, 1]")


def aggregate_pair_scores(matrix: PairMatrix, method: str) -> np.ndarray:
    if method not in DUO_METHODS:
        raise ConfigError(f"unknown duo aggregation {method!r}")
    m = len(matrix.ids)
    p = matrix.p.copy()
    np.fill_diagonal(p, 0.0)
    row_sums = p.sum(axis=1)
    if method == "SUM":
        return row_sums
    col_sums = p.sum(axis=0)
    # sum_{j != i} (p_ij + 1 - p_ji)
    return row_sums + (m - 1) - col_sums


def order_by_scores(ids: Sequence[str], scores: Sequence[float],
                    stage: str) -> list[ScoredCandidate]:
    return rank_sort(ScoredCandidate(item_id=i, score=float(s), stage=stage)
                     for i, s in zip(ids, scores))


def mono_rerank(query: str, candidates: Sequence[ScoredCandidate],
                scorer: PairwiseScorer, k1: int,
                texts: Mapping[str, str]) -> list[ScoredCandidate]:
    """Rescore the top k1 candidates pointwise and re-sort them.

    Only the head is returned: mono defines the pool for every later stage.
    """
    if k1 < 1:
        raise ValueError(f"k1 must be >= 1, got {k1}")
    head = list(candidates[:k1])
    if not head:
        return []
    try:
        scores = scorer.mono_batch(query, [texts[c.item_id] for c in head])
    except KeyError as exc:
        raise StageFailure(f"mono: no text for item {exc.args[0]!r}") from None
    if len(scores) != len(head):
        raise StageFailure(
            f"mono: scorer returned {len(scores)} scores for "
            f"{len(head)} candidates")
    return order_by_scores([c.item_id for c in head], scores, "mono")


def build_pair_matrix(query: str, ids: Sequence[str],
                      texts: Mapping[str, str],
                      scorer: PairwiseScorer) -> PairMatrix:
    pairs = [(texts[ids[i]], texts[ids[j]])
             for i in range(len(ids)) for j in range(len(ids)) if i != j]
    prefs = scorer.duo_batch(query, pairs)
    m = len(ids)
    if len(prefs) != m * (m - 1):
        raise StageFailure(
            f"duo: scorer returned {len(prefs)} preferences for "
            f"{m * (m - 1)} ordered pairs")
    p = np.zeros((m, m), dtype=np.float64)
    it = iter(prefs)
    for i in range(m):
        for j in range(m):
            if i != j:
                p[i, j] = next(it)
    return PairMatrix(ids=list(ids), p=p)


def duo_rerank(query: str, candidates: Sequence[ScoredCandidate],
               scorer: PairwiseScorer, m: int, method: str,
               texts: Mapping[str, str]) -> list[ScoredCandidate]:
    """Rerank the top m candidates pairwise; the tail keeps its order.

    Head scores are the aggregated preferences (always >= 0); tail items
    get -1.0, -2.0, ... so the full list stays sorted under the global
    tie rule.
    """
    if m < 2:
        raise ValueError(f"duo depth m must be >= 2, got {m}")
    if method not in DUO_METHODS:
        raise ConfigError(f"unknown duo aggregation {method!r}")
    head = list(candidates[:m])
    tail = list(candidates[m:])
    if len(head) < 2:
        reranked = [ScoredCandidate(item_id=c.item_id, score=c.score,
                                    stage="duo") for c in head]
    else:
        try:
            matrix = build_pair_matrix(
                query, [c.item_id for c in head], texts, scorer)
        except KeyError as exc:
            raise StageFailure(
                f"duo: no text for item {exc.args[0]!r}") from None
        scores = aggregate_pair_scores(matrix, method)
        reranked = order_by_scores(matrix.ids, scores, "duo")
    remapped_tail = [
        ScoredCandidate(item_id=c.item_id, score=float(-(i + 1)), stage="duo")
        for i, c in enumerate(tail)
    ]
    return reranked + remapped_tail
