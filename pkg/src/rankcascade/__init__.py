"""Multi-stage passage ranking at desk scale.

Cascade: sliding-window segmentation and query expansion -> BM25 sparse
retrieval -> late-interaction dense retrieval -> reciprocal-rank fusion ->
pointwise (mono) rerank -> pairwise (duo) rerank -> optional run ensemble,
evaluated with TREC-style NDCG / MAP / recall.
"""

from .candidates import ScoredCandidate, rank_sort
from .config import PipelineConfig, parse_config
from .corpus import (Document, Passage, attach_expansions, render_index_text,
                     segment_corpus, segment_document, split_sentences)
from .dense import EmbeddingStore, load_embedding_store, maxsim, search_dense
from .errors import (ConfigError, DataError, DimMismatch, DuplicateEntry,
                     DuplicateId, EmptyDocument, EmptyQuery, FormatError,
                     NormError, ProtocolError, RankCascadeError, StageFailure,
                     Timeout, UnknownItem)
from .evaluation import (MetricsReport, Qrels, Run, evaluate_run, map_at_k,
                         make_run, ndcg_at_k, parse_qrels, parse_run,
                         recall_at_k, write_qrels, write_run)
from .external import ExternalScorer, external_score_batch
from .fusion import ensemble_fuse, fuse_rrf, fuse_union
from .lexical import (InvertedIndex, bm25_score, build_index, search_sparse,
                      tokenize)
from .pipeline import run_pipeline
from .rerank import (OverlapScorer, PairMatrix, Scorer, builtin_duo_preference,
                     builtin_overlap_score, duo_rerank, mono_rerank)

__all__ = [name for name in dir() if not name.startswith("_")]
