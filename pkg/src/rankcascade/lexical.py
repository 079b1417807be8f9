"""Sparse retrieval: tokenization, inverted index, BM25 scoring.

Scores use idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which is
non-negative for every df in [1, N], and the usual saturating tf component
with k1 = 0.9, b = 0.4 defaults.
"""

from __future__ import annotations

import math
import re
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .candidates import ScoredCandidate, rank_sort
from .errors import DuplicateId, EmptyQuery, FormatError, UnknownItem

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4

# ASCII-only on purpose: the same token stream must be reproducible from
# other runtimes (the external scorer bridge), where \w and Unicode word
# boundaries diverge.
_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and return maximal [a-z0-9]+ runs, in order."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class InvertedIndex:
    # term -> postings sorted by item_id; (item_id, tf) pairs
    postings: dict[str, list[tuple[str, int]]]
    doc_length: dict[str, int]
    N: int
    avgdl: float
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))

    def tf(self, term: str, item_id: str) -> int:
        plist = self.postings.get(term)
        if not plist:
            return 0
        i = bisect_left(plist, (item_id,))
        if i < len(plist) and plist[i][0] == item_id:
            return plist[i][1]
        return 0


def build_index(records: Iterable[tuple[str, str]], k1: float = DEFAULT_K1,
                b: float = DEFAULT_B) -> InvertedIndex:
    """Index (item_id, text) records. Duplicate ids are an error."""
    postings: dict[str, dict[str, int]] = {}
    doc_length: dict[str, int] = {}
    for item_id, text in records:
        if item_id in doc_length:
            raise DuplicateId(f"duplicate item id {item_id!r}")
        tokens = tokenize(text)
        doc_length[item_id] = len(tokens)
        for tok in tokens:
            per_term = postings.setdefault(tok, {})
            per_term[item_id] = per_term.get(item_id, 0) + 1
    sorted_postings = {
        term: sorted(items.items()) for term, items in postings.items()
    }
    n = len(doc_length)
    avgdl = (sum(doc_length.values()) / n) if n else 0.0
    return InvertedIndex(postings=sorted_postings, doc_length=doc_length,
                         N=n, avgdl=avgdl, k1=k1, b=b)


def _length_norm(index: InvertedIndex, item_id: str) -> float:
    rel = (index.doc_length[item_id] / index.avgdl) if index.avgdl > 0 else 0.0
    return index.k1 * (1.0 - index.b + index.b * rel)


def bm25_score(index: InvertedIndex, query_terms: Sequence[str],
               item_id: str) -> float:
    """BM25 score of one item for a pre-tokenized query.

    Terms are accumulated in query order; repeated query terms contribute
    once per occurrence, matching the accumulation in search_sparse.
    """
    if item_id not in index.doc_length:
        raise UnknownItem(f"item {item_id!r} is not in the index")
    norm = _length_norm(index, item_id)
    score = 0.0
    for term in query_terms:
        tf = index.tf(term, item_id)
        if tf == 0:
            continue
        score += index.idf(term) * tf * (index.k1 + 1.0) / (tf + norm)
    return score


def search_sparse(index: InvertedIndex, query_text: str,
                  k: int) -> list[ScoredCandidate]:
    """Top-k items by BM25, score descending then item_id descending.

    Items matching no query term are excluded, so the result may be
    shorter than k.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    terms = tokenize(query_text)
    if not terms:
        raise EmptyQuery(f"query {query_text!r} has no tokens")
    scores: dict[str, float] = {}
    norms: dict[str, float] = {}
    for term in terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for item_id, tf in plist:
            norm = norms.get(item_id)
            if norm is None:
                norm = norms[item_id] = _length_norm(index, item_id)
            w = idf * tf * (index.k1 + 1.0) / (tf + norm)
            scores[item_id] = scores.get(item_id, 0.0) + w
    candidates = [ScoredCandidate(item_id=i, score=s, stage="sparse")
                  for i, s in scores.items() if s > 0.0]
    return rank_sort(candidates)[:k]


# -- persistence ---------------------------------------------------------------
#
# Textual format, one file:
#   line 1:  N <int> avgdl <float-repr> k1 <float-repr> b <float-repr>
#   then one line per term, terms sorted: term item_id:tf item_id:tf ...
#   (postings already sorted by item_id)
# Document lengths are reconstructed as the per-item tf sum, so an item
# whose text tokenized to nothing does not survive a round-trip.

def write_index(index: InvertedIndex, stream: TextIO) -> None:
    stream.write(f"N {index.N} avgdl {index.avgdl!r} "
                 f"k1 {index.k1!r} b {index.b!r}\n")
    for term in sorted(index.postings):
        cells = " ".join(f"{item}:{tf}" for item, tf in index.postings[term])
        stream.write(f"{term} {cells}\n")


def read_index(stream: TextIO, path: str = "<index>") -> InvertedIndex:
    header = stream.readline()
    parts = header.split()
    if len(parts) != 8 or parts[0] != "N" or parts[2] != "avgdl" \
            or parts[4] != "k1" or parts[6] != "b":
        raise FormatError(f"{path}:1: bad index header {header!r}")
    try:
        n = int(parts[1])
        avgdl = float(parts[3])
        k1 = float(parts[5])
        b = float(parts[7])
    except ValueError:
        raise FormatError(f"{path}:1: non-numeric index header") from None
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_length: dict[str, int] = {}
    for lineno, line in enumerate(stream, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        cells = line.split(" ")
        term = cells[0]
        if term in postings:
            raise FormatError(f"{path}:{lineno}: repeated term {term!r}")
        plist: list[tuple[str, int]] = []
        for cell in cells[1:]:
            item, sep, tf_text = cell.rpartition(":")
            if not sep or not item:
                raise FormatError(
                    f"{path}:{lineno}: bad posting cell {cell!r}")
            try:
                tf = int(tf_text)
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: bad tf in cell {cell!r}") from None
            if tf < 1:
                raise FormatError(
                    f"{path}:{lineno}: tf must be >= 1 in cell {cell!r}")
            plist.append((item, tf))
            doc_length[item] = doc_length.get(item, 0) + tf
        if plist != sorted(plist):
            raise FormatError(
                f"{path}:{lineno}: postings for {term!r} not sorted by item")
        postings[term] = plist
    return InvertedIndex(postings=postings, doc_length=doc_length,
                         N=n, avgdl=avgdl, k1=k1, b=b)
