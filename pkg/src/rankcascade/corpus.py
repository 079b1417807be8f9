"""Document ingestion and passage segmentation.

Long documents are split into overlapping sliding windows of sentences so a
downstream scorer only ever sees passage-sized text. Expansion queries
(predicted queries a passage might answer) are attached per passage and only
participate in the *index* text, never in the stored passage text itself.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .errors import DuplicateId, EmptyDocument, FormatError

DEFAULT_WINDOW = 10
DEFAULT_STRIDE = 5

_TERMINALS = ".!?"


@dataclass(frozen=True)
class Document:
    docid: str
    url: str = ""
    title: str = ""
    body: str = ""


@dataclass
class Passage:
    passage_id: str
    parent: str
    sentence_offset: int
    text: str
    expansion_queries: list[str] = field(default_factory=list)


def split_sentences(text: str) -> list[str]:
    """Split on '.', '!', '?' when followed by whitespace or end of text.

    A terminal glued to a non-space character ("e.g.x", "3.14") does not
    split. Sentences are stripped of surrounding whitespace; empty pieces
    are dropped, so the result for all-whitespace input is [].
    """
    sentences: list[str] = []
    start = 0
    n = len(text)
    for i, ch in enumerate(text):
        if ch in _TERMINALS and (i + 1 == n or text[i + 1].isspace()):
            piece = text[start:i + 1].strip()
            if piece:
                sentences.append(piece)
            start = i + 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def segment_document(doc: Document, window: int = DEFAULT_WINDOW,
                     stride: int = DEFAULT_STRIDE) -> list[Passage]:
    """Cut a document into sliding windows of sentences.

    Window offsets are 0, stride, 2*stride, ...; emission stops after the
    first window whose end reaches the last sentence, so every sentence is
    covered and no window starts beyond the text. Documents with at most
    `window` sentences yield exactly one passage.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if not 1 <= stride <= window:
        raise ValueError(f"stride must be in [1, window], got {stride}")
    sentences = split_sentences(doc.body)
    if not sentences:
        raise EmptyDocument(f"document {doc.docid!r} has no sentences")
    passages = []
    k = 0
    while True:
        offset = k * stride
        chunk = sentences[offset:offset + window]
        passages.append(Passage(
            passage_id=f"{doc.docid}#{k}",
            parent=doc.docid,
            sentence_offset=offset,
            text=" ".join(chunk),
        ))
        if offset + window >= len(sentences):
            break
        k += 1
    return passages


def segment_corpus(docs: Iterable[Document], window: int = DEFAULT_WINDOW,
                   stride: int = DEFAULT_STRIDE) -> list[Passage]:
    out: list[Passage] = []
    for doc in docs:
        out.extend(segment_document(doc, window, stride))
    return out


def attach_expansions(passage: Passage, queries: Iterable[str]) -> Passage:
    """Return the passage with `queries` appended in order (input unchanged)."""
    extra = [q for q in queries if q]
    if not extra:
        return dataclasses.replace(
            passage, expansion_queries=list(passage.expansion_queries))
    return dataclasses.replace(
        passage, expansion_queries=passage.expansion_queries + extra)


def render_index_text(passage: Passage, parent: Document | None = None,
                      prepend_meta: bool = False) -> str:
    """Build the text that gets indexed for a passage.

    Optionally prepends the parent document's url and title, then the
    passage text, then the expansion queries, single-space joined with
    empty fields skipped.
    """
    parts: list[str] = []
    if prepend_meta and parent is not None:
        if parent.url:
            parts.append(parent.url)
        if parent.title:
            parts.append(parent.title)
    parts.append(passage.text)
    parts.extend(q for q in passage.expansion_queries if q)
    return " ".join(p for p in parts if p)


# -- file formats -------------------------------------------------------------
#
# Corpus: TSV with 4 columns  docid <TAB> url <TAB> title <TAB> body
# Expansions: TSV with 2 columns  passage_id <TAB> query   (repeats allowed;
#   queries attach in file order)
# Passages: TSV  passage_id <TAB> parent <TAB> sentence_offset <TAB> text
#   followed by zero or more expansion-query columns.

def _check_item_id(item_id: str, lineno: int, path: str) -> None:
    if not item_id or item_id.split() != [item_id]:
        raise FormatError(
            f"{path}:{lineno}: item id {item_id!r} is empty or has whitespace")


def read_corpus(stream: TextIO, path: str = "<corpus>") -> list[Document]:
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise FormatError(
                f"{path}:{lineno}: expected 4 tab-separated fields, "
                f"got {len(fields)}")
        docid, url, title, body = fields
        _check_item_id(docid, lineno, path)
        if docid in seen:
            raise DuplicateId(f"{path}:{lineno}: duplicate docid {docid!r}")
        seen.add(docid)
        docs.append(Document(docid=docid, url=url, title=title, body=body))
    return docs


def write_corpus(docs: Iterable[Document], stream: TextIO) -> None:
    for d in docs:
        stream.write(f"{d.docid}\t{d.url}\t{d.title}\t{d.body}\n")


def read_expansions(stream: TextIO, path: str = "<expansions>") -> dict[str, list[str]]:
    expansions: dict[str, list[str]] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise FormatError(
                f"{path}:{lineno}: expected 2 tab-separated fields, "
                f"got {len(fields)}")
        passage_id, query = fields
        _check_item_id(passage_id, lineno, path)
        expansions.setdefault(passage_id, []).append(query)
    return expansions


def apply_expansions(passages: list[Passage],
                     expansions: dict[str, list[str]]) -> tuple[list[Passage], list[str]]:
    """Attach expansion queries by passage_id.

    Returns the updated passages plus the expansion keys that matched no
    passage -- unknown ids are reported, not fatal.
    """
    known = {p.passage_id for p in passages}
    unknown = sorted(k for k in expansions if k not in known)
    out = [attach_expansions(p, expansions.get(p.passage_id, []))
           for p in passages]
    return out, unknown


def write_passages(passages: Iterable[Passage], stream: TextIO) -> None:
    for p in passages:
        cols = [p.passage_id, p.parent, str(p.sentence_offset), p.text]
        cols.extend(p.expansion_queries)
        stream.write("\t".join(cols) + "\n")


def read_passages(stream: TextIO, path: str = "<passages>") -> list[Passage]:
    passages: list[Passage] = []
    seen: set[str] = set()
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) < 4:
            raise FormatError(
                f"{path}:{lineno}: expected at least 4 tab-separated fields, "
                f"got {len(fields)}")
        passage_id, parent, offset, text = fields[:4]
        _check_item_id(passage_id, lineno, path)
        if passage_id in seen:
            raise DuplicateId(
                f"{path}:{lineno}: duplicate passage id {passage_id!r}")
        seen.add(passage_id)
        try:
            offset_val = int(offset)
        except ValueError:
            raise FormatError(
                f"{path}:{lineno}: sentence_offset {offset!r} is not an "
                f"integer") from None
        passages.append(Passage(
            passage_id=passage_id, parent=parent,
            sentence_offset=offset_val, text=text,
            expansion_queries=list(fields[4:]),
        ))
    return passages


def read_queries(stream: TextIO, path: str = "<queries>") -> list[tuple[str, str]]:
    """Read a TSV of  query_id <TAB> text  rows, preserving file order."""
    queries: list[tuple[str, str]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise FormatError(
                f"{path}:{lineno}: expected 2 tab-separated fields, "
                f"got {len(fields)}")
        qid, text = fields
        _check_item_id(qid, lineno, path)
        if qid in seen:
            raise DuplicateId(f"{path}:{lineno}: duplicate query id {qid!r}")
        seen.add(qid)
        queries.append((qid, text))
    return queries
