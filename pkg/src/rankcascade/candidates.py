"""Ranked candidate lists and the single ordering rule used everywhere.

Every stage emits candidates sorted by (score descending, item_id descending).
Keeping the tie rule in one function is what makes runs reproducible across
stages, thread counts, and the external scorer bridge.
"""

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class ScoredCandidate:
    item_id: str
    score: float
    stage: str  # sparse | dense | fused | mono | duo | ensemble


def rank_sort(candidates: Iterable[ScoredCandidate]) -> list[ScoredCandidate]:
    """Order candidates by score descending, ties by item_id descending."""
    return sorted(candidates, key=lambda c: (c.score, c.item_id), reverse=True)
