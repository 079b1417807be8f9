"""Candidate-list fusion and run ensembling.

Reciprocal rank fusion: score(item) = sum over input lists of
1 / (c + rank), rank starting at 1, c = 60 by default. Items missing from
a list simply contribute nothing for it.
"""

from __future__ import annotations

from typing import Sequence

from .candidates import ScoredCandidate, rank_sort
from .errors import ConfigError
from .evaluation import Run, make_run

DEFAULT_RRF_C = 60.0


def fuse_rrf(lists: Sequence[Sequence[ScoredCandidate]], k: int,
             c: float = DEFAULT_RRF_C) -> list[ScoredCandidate]:
    """Fuse ranked lists with reciprocal rank fusion, keep the top k."""
    if c <= 0:
        raise ValueError(f"rrf constant c must be > 0, got {c}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[str, float] = {}
    for ranked in lists:
        for rank, candidate in enumerate(ranked, start=1):
            scores[candidate.item_id] = scores.get(candidate.item_id, 0.0) \
                + 1.0 / (c + rank)
    fused = [ScoredCandidate(item_id=i, score=s, stage="fused")
             for i, s in scores.items()]
    return rank_sort(fused)[:k]


def fuse_union(lists: Sequence[Sequence[ScoredCandidate]], k: int) -> list[ScoredCandidate]:
    """Pool candidates, ranked by their best rank across the input lists.

    Input scores from different retrieval stages are not comparable, so a
    union keeps only rank information: score(item) = -best_rank. Meant as a
    candidate pool ahead of a reranker, which replaces the scores anyway.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    best: dict[str, int] = {}
    for ranked in lists:
        for rank, candidate in enumerate(ranked, start=1):
            if candidate.item_id not in best or rank < best[candidate.item_id]:
                best[candidate.item_id] = rank
    pooled = [ScoredCandidate(item_id=i, score=float(-r), stage="fused")
              for i, r in best.items()]
    return rank_sort(pooled)[:k]


def _minmax_normalize(pairs: list[tuple[str, float]]) -> dict[str, float]:
    scores = [s for _, s in pairs]
    low, high = min(scores), max(scores)
    if high == low:
        return {item: 1.0 for item, _ in pairs}
    return {item: (s - low) / (high - low) for item, s in pairs}


def ensemble_fuse(runs: Sequence[Run], method: str = "mean",
                  c: float = DEFAULT_RRF_C, tag: str = "ensemble") -> Run:
    """Combine runs of the same pipeline under different settings.

    mean: per query, min-max normalize each run's scores to [0, 1]
    (constant lists map to all-1.0), then average per item over the runs
    that ranked it.
    rrf: reciprocal rank fusion over the runs' rankings.
    """
    if not runs:
        raise ConfigError("ensemble needs at least one input run")
    if method not in ("mean", "rrf"):
        raise ConfigError(f"unknown ensemble method {method!r}")
    queries: set[str] = set()
    for run in runs:
        queries.update(run.rankings)
    fused: dict[str, list[tuple[str, float]]] = {}
    for qid in queries:
        present = [run.rankings[qid] for run in runs if run.rankings.get(qid)]
        if method == "rrf":
            scores: dict[str, float] = {}
            for ranking in present:
                for item, rank, _score in ranking:
                    scores[item] = scores.get(item, 0.0) + 1.0 / (c + rank)
        else:
            sums: dict[str, float] = {}
            counts: dict[str, int] = {}
            for ranking in present:
                normalized = _minmax_normalize(
                    [(item, score) for item, _rank, score in ranking])
                for item, value in normalized.items():
                    sums[item] = sums.get(item, 0.0) + value
                    counts[item] = counts.get(item, 0) + 1
            scores = {item: sums[item] / counts[item] for item in sums}
        fused[qid] = list(scores.items())
    return make_run(tag, fused)
