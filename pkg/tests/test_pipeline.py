import io
import sys

import numpy as np
import pytest

from conftest import STUB_SCORER
from rankcascade.config import config_from_mapping
from rankcascade.dense import make_store, write_store_binary
from rankcascade.errors import FormatError
from rankcascade.evaluation import write_run
from rankcascade.lexical import search_sparse
from rankcascade.pipeline import prepare, run_pipeline


def _run_text(run):
    buffer = io.StringIO()
    write_run(run, buffer)
    return buffer.getvalue()


def test_sparse_mode_matches_search_sparse_per_query(synthetic_config):
    config = config_from_mapping(synthetic_config(mode="sparse",
                                                  k_sparse=100))
    run, _warnings = run_pipeline(config)
    data = prepare(config)
    for qid, text in data.queries:
        expected = [(c.item_id, c.score)
                    for c in search_sparse(data.index, text, 100)]
        got = [(item, score) for item, _rank, score in run.rankings[qid]]
        assert got == expected, qid


def test_hybrid_finds_what_sparse_cannot(synthetic_config):
    sparse = config_from_mapping(synthetic_config(mode="sparse"))
    hybrid = config_from_mapping(synthetic_config())
    sparse_run, _ = run_pipeline(sparse)
    hybrid_run, _ = run_pipeline(hybrid)
    # vocabulary-mismatch queries: the relevant passage shares no term with
    # the query, so only the dense route can retrieve it
    mismatch_qids = [f"q{i:03d}" for i in range(50) if i % 5 == 4]
    for qid in mismatch_qids:
        relevant = f"mrel{int(qid[1:]):03d}#0"
        sparse_items = {i for i, _r, _s in sparse_run.rankings[qid]}
        hybrid_items = {i for i, _r, _s in hybrid_run.rankings[qid]}
        assert relevant not in sparse_items
        assert relevant in hybrid_items


def test_mono_narrows_to_its_depth(synthetic_config):
    config = config_from_mapping(synthetic_config(mono={"depth": 10}))
    run, _ = run_pipeline(config)
    assert run.rankings
    for qid, ranking in run.rankings.items():
        assert len(ranking) <= 10
        assert all(0.0 <= score <= 1.0 for _i, _r, score in ranking)


def test_duo_emits_globally_sorted_lists(synthetic_config):
    config = config_from_mapping(synthetic_config(
        mono={"depth": 10}, duo={"depth": 5, "method": "SYM-SUM"}))
    run, _ = run_pipeline(config)
    for qid, ranking in run.rankings.items():
        scores = [score for _i, _r, score in ranking]
        assert scores == sorted(scores, reverse=True)
        head, tail = scores[:5], scores[5:]
        assert all(s >= 0.0 for s in head)
        assert tail == [-1.0 * (n + 1) for n in range(len(tail))]


def test_thread_count_never_changes_output(synthetic_config):
    config = config_from_mapping(synthetic_config(
        mono={"depth": 10}, duo={"depth": 5}))
    single, _ = run_pipeline(config, threads=1)
    pooled, _ = run_pipeline(config, threads=8)
    assert _run_text(single) == _run_text(pooled)


def test_thread_count_validation(synthetic_config):
    config = config_from_mapping(synthetic_config(mode="sparse"))
    with pytest.raises(ValueError):
        run_pipeline(config, threads=0)


def test_external_stdio_scorer_reproduces_builtin_run(synthetic_config):
    builtin = config_from_mapping(synthetic_config(
        mono={"depth": 5}, duo={"depth": 3}))
    external = config_from_mapping(synthetic_config(
        mono={"depth": 5, "scorer": "external",
              "endpoint": f"stdio:{sys.executable} {STUB_SCORER}"},
        duo={"depth": 3}))
    builtin_run, _ = run_pipeline(builtin)
    external_run, _ = run_pipeline(external)
    assert _run_text(builtin_run) == _run_text(external_run)


# -- tiny hand-built corpora for edge paths ------------------------------------

def _write_tiny(tmp_path, with_orphan_expansion=False):
    (tmp_path / "corpus.tsv").write_text(
        "a\t\t\tRed apples and green pears.\n"
        "b\t\t\tPears poached in red wine.\n",
        encoding="utf-8")
    (tmp_path / "queries.tsv").write_text("q1\tred apples\n", encoding="utf-8")
    expansions = "a#0\tfruit colors\n"
    if with_orphan_expansion:
        expansions += "zzz#0\tnobody here\n"
    (tmp_path / "expansions.tsv").write_text(expansions, encoding="utf-8")
    return {
        "corpus": str(tmp_path / "corpus.tsv"),
        "queries": str(tmp_path / "queries.tsv"),
        "expansions": str(tmp_path / "expansions.tsv"),
        "tag": "tiny",
    }


def _write_store(path, dim, items):
    with open(path, "wb") as fh:
        write_store_binary(make_store(dim, items), fh)


def test_orphan_expansion_keys_become_warnings(tmp_path):
    config = config_from_mapping(_write_tiny(tmp_path,
                                             with_orphan_expansion=True))
    run, warnings = run_pipeline(config)
    assert run.rankings["q1"]
    assert len(warnings) == 1 and "zzz#0" in warnings[0]
    clean, no_warnings = run_pipeline(
        config_from_mapping(_write_tiny(tmp_path)))
    assert no_warnings == []
    assert _run_text(clean) == _run_text(run)  # orphans never affect ranking


def test_missing_passage_embedding_is_format_error(tmp_path):
    mapping = _write_tiny(tmp_path)
    rows = np.eye(4)
    _write_store(tmp_path / "p.emb", 4, {"a#0": rows[:1]})  # b#0 missing
    _write_store(tmp_path / "q.emb", 4, {"q1": rows[1:2]})
    mapping.update(mode="hybrid",
                   embeddings={"passages": str(tmp_path / "p.emb"),
                               "queries": str(tmp_path / "q.emb")})
    with pytest.raises(FormatError, match="no embeddings"):
        run_pipeline(config_from_mapping(mapping))


def test_missing_query_embedding_is_format_error(tmp_path):
    mapping = _write_tiny(tmp_path)
    rows = np.eye(4)
    _write_store(tmp_path / "p.emb", 4, {"a#0": rows[:1], "b#0": rows[1:2]})
    _write_store(tmp_path / "q.emb", 4, {"q9": rows[2:3]})
    mapping.update(mode="hybrid",
                   embeddings={"passages": str(tmp_path / "p.emb"),
                               "queries": str(tmp_path / "q.emb")})
    with pytest.raises(FormatError, match="'q1' has no embedding"):
        run_pipeline(config_from_mapping(mapping))


def test_store_dim_disagreement_is_format_error(tmp_path):
    mapping = _write_tiny(tmp_path)
    _write_store(tmp_path / "p.emb", 4,
                 {"a#0": np.eye(4)[:1], "b#0": np.eye(4)[1:2]})
    _write_store(tmp_path / "q.emb", 3, {"q1": np.eye(3)[:1]})
    mapping.update(mode="hybrid",
                   embeddings={"passages": str(tmp_path / "p.emb"),
                               "queries": str(tmp_path / "q.emb")})
    with pytest.raises(FormatError, match="dim"):
        run_pipeline(config_from_mapping(mapping))


def test_ensemble_stage_fuses_with_stored_runs(tmp_path):
    mapping = _write_tiny(tmp_path)
    base_run, _ = run_pipeline(config_from_mapping(mapping))
    stored = tmp_path / "other.run"
    # a stored run that disagrees: it prefers b#0
    stored.write_text("q1 Q0 b#0 1 9.0 other\nq1 Q0 a#0 2 1.0 other\n",
                      encoding="utf-8")
    mapping.update(ensemble={"runs": [str(stored)], "method": "mean"},
                   tag="blended")
    fused_run, _ = run_pipeline(config_from_mapping(mapping))
    assert fused_run.tag == "blended"
    items = {i for i, _r, _s in fused_run.rankings["q1"]}
    base_items = {i for i, _r, _s in base_run.rankings["q1"]}
    assert items == base_items | {"b#0"}
