import io
import math
import random

import pytest

from oracles import oracle_ap, oracle_ndcg, oracle_recall
from rankcascade.errors import DuplicateEntry, FormatError
from rankcascade.evaluation import (MetricsReport, Qrels, Run,
                                    compare_reports, evaluate_run,
                                    format_score, make_run, map_at_k,
                                    ndcg_at_k, parse_qrels, parse_run,
                                    recall_at_k, render_report, write_qrels,
                                    write_run)

# Hand oracle for the NDCG fixture (qrels d1=3, d2=1, d3=0; run d2, d1, d3):
#   DCG@2  = 1/log2(2) + 3/log2(3)
#   IDCG@2 = 3/log2(2) + 1/log2(3)
NDCG2_EXPECTED = (1.0 + 3.0 / math.log2(3)) / (3.0 + 1.0 / math.log2(3))


def _qrels(mapping):
    return Qrels(grades=mapping)


@pytest.fixture
def ndcg_fixture():
    run = make_run("t", {"q": [("d2", 0.9), ("d1", 0.5), ("d3", 0.1)]})
    qrels = _qrels({"q": {"d1": 3, "d2": 1, "d3": 0}})
    return run, qrels


def test_ndcg_hand_value(ndcg_fixture):
    run, qrels = ndcg_fixture
    result = ndcg_at_k(run, qrels, 2)
    assert result.per_query["q"] == pytest.approx(NDCG2_EXPECTED, abs=1e-12)
    assert result.per_query["q"] == pytest.approx(0.7967, abs=1e-4)


def test_ndcg_ideal_order_is_one():
    run = make_run("t", {"q": [("d1", 0.9), ("d2", 0.5), ("d3", 0.1)]})
    qrels = _qrels({"q": {"d1": 3, "d2": 1, "d3": 0}})
    for k in (1, 2, 3, 10):
        assert ndcg_at_k(run, qrels, k).per_query["q"] == pytest.approx(1.0)


def test_ndcg_k_truncates_at_run_length(ndcg_fixture):
    run, qrels = ndcg_fixture
    assert ndcg_at_k(run, qrels, 50).per_query["q"] == \
        ndcg_at_k(run, qrels, 3).per_query["q"]


def test_ndcg_all_zero_grades_excluded():
    run = make_run("t", {"q1": [("d1", 1.0)], "q2": [("d2", 1.0)]})
    qrels = _qrels({"q1": {"d1": 2}, "q2": {"d2": 0}})
    result = ndcg_at_k(run, qrels, 5)
    assert "q2" not in result.per_query
    assert result.skipped == ["q2"]
    assert result.mean == 1.0


def test_ndcg_unjudged_query_counted_in_diagnostics():
    run = make_run("t", {"q1": [("d1", 1.0)], "q9": [("d1", 1.0)]})
    qrels = _qrels({"q1": {"d1": 1}})
    result = ndcg_at_k(run, qrels, 5)
    assert result.skipped == ["q9"]


def test_ndcg_exponential_gain():
    run = make_run("t", {"q": [("d2", 0.9), ("d1", 0.5)]})
    qrels = _qrels({"q": {"d1": 3, "d2": 1}})
    expected = (1.0 + 7.0 / math.log2(3)) / (7.0 + 1.0 / math.log2(3))
    got = ndcg_at_k(run, qrels, 2, exponential=True).per_query["q"]
    assert got == pytest.approx(expected, abs=1e-12)


def test_map_hand_value():
    run = make_run("t", {"q": [("d2", 0.9), ("d1", 0.5)]})
    qrels = _qrels({"q": {"d1": 3, "d2": 1}})
    result = map_at_k(run, qrels, 100)
    assert result.per_query["q"] == pytest.approx(0.5, abs=1e-12)


def test_map_rank_one():
    run = make_run("t", {"q": [("d1", 0.9), ("d2", 0.5)]})
    qrels = _qrels({"q": {"d1": 3}})
    assert map_at_k(run, qrels, 100).per_query["q"] == 1.0


def test_map_divides_by_total_relevant_not_retrieved():
    run = make_run("t", {"q": [("d1", 0.9)]})
    qrels = _qrels({"q": {"d1": 3, "d2": 2, "d3": 2}})
    assert map_at_k(run, qrels, 100).per_query["q"] == pytest.approx(1 / 3)


def test_map_r_zero_excluded():
    run = make_run("t", {"q": [("d1", 0.9)]})
    qrels = _qrels({"q": {"d1": 1}})  # below threshold 2
    result = map_at_k(run, qrels, 100)
    assert result.per_query == {}
    assert result.skipped == ["q"]
    assert result.mean == 0.0


def test_recall_values():
    run = make_run("t", {"q": [("d1", 0.9), ("d2", 0.5)]})
    qrels = _qrels({"q": {"d1": 2, "d2": 2, "d3": 2, "d4": 2}})
    assert recall_at_k(run, qrels, 100).per_query["q"] == 0.5
    run_top = make_run("t", {"q": [("d1", 0.9)]})
    qrels_single = _qrels({"q": {"d1": 2}})
    assert recall_at_k(run_top, qrels_single, 100).per_query["q"] == 1.0


def test_metric_k_precondition():
    run = make_run("t", {"q": [("d1", 0.9)]})
    qrels = _qrels({"q": {"d1": 2}})
    for metric in (ndcg_at_k, map_at_k, recall_at_k):
        with pytest.raises(ValueError):
            metric(run, qrels, 0)


def test_metrics_ignore_everything_below_k():
    rng = random.Random(5)
    tail = [(f"junk{i}", 0.4 - i * 0.001) for i in range(30)]
    base = [("d1", 0.9), ("d2", 0.8)]
    run_a = make_run("t", {"q": base + tail})
    shuffled = tail[:]
    rng.shuffle(shuffled)
    # same ids below rank k with different scores, still below the head
    reshuffled = [(item, 0.4 - pos * 0.001)
                  for pos, (item, _s) in enumerate(shuffled)]
    run_b = make_run("t", {"q": base + reshuffled})
    qrels = _qrels({"q": {"d1": 3, "d2": 2, "junk7": 2}})
    assert ndcg_at_k(run_a, qrels, 2).per_query["q"] == \
        ndcg_at_k(run_b, qrels, 2).per_query["q"]


# -- randomized oracle comparison ---------------------------------------------

def _random_instance(rng):
    queries = {}
    grades = {}
    for qi in range(rng.randint(1, 8)):
        qid = f"q{qi}"
        items = [f"i{n}" for n in range(rng.randint(1, 20))]
        # scores on a 4-decimal grid: exactly representable at %.6g, so the
        # write -> parse -> write identity below can't be broken by two
        # distinct floats rounding to the same printed score
        queries[qid] = [(item, round(rng.random(), 4)) for item in items]
        if rng.random() < 0.85:  # some queries judged, some not
            judged = rng.sample(items, rng.randint(1, len(items)))
            judged += [f"extra{n}" for n in range(rng.randint(0, 3))]
            grades[qid] = {item: rng.randint(0, 3) for item in judged}
    return make_run("t", queries), _qrels(grades)


def _close(a, b):
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def test_metrics_match_oracle_on_random_instances():
    rng = random.Random(2024)
    for _ in range(200):
        run, qrels = _random_instance(rng)
        k = rng.randint(1, 25)
        ranked = {qid: [item for item, _r, _s in rows]
                  for qid, rows in run.rankings.items()}
        for metric, oracle in ((ndcg_at_k, oracle_ndcg),
                               (map_at_k, oracle_ap),
                               (recall_at_k, oracle_recall)):
            result = metric(run, qrels, k)
            expected = {}
            for qid, items in ranked.items():
                if qid not in qrels.grades:
                    continue
                value = oracle(items, qrels.grades[qid], k)
                if value is not None:
                    expected[qid] = value
            assert set(result.per_query) == set(expected)
            for qid, value in expected.items():
                assert _close(result.per_query[qid], value), \
                    f"{metric.__name__} {qid}: {result.per_query[qid]} vs {value}"
            expected_mean = (sum(expected.values()) / len(expected)
                             if expected else 0.0)
            assert _close(result.mean, expected_mean)


# -- parsing and writing ------------------------------------------------------

RUN_TEXT = """\
101 Q0 D7 1 12.5 runA
101 Q0 D3 2 11 runA
102 Q0 D1 1 3.25 runA
"""


def test_parse_run_basic():
    run = parse_run(io.StringIO(RUN_TEXT))
    assert run.tag == "runA"
    assert [item for item, _r, _s in run.rankings["101"]] == ["D7", "D3"]
    assert run.rankings["102"] == [("D1", 1, 3.25)]


def test_parse_run_resorts_and_renumbers():
    text = "1 Q0 A 9 1.0 t\n1 Q0 B 1 2.0 t\n"
    run = parse_run(io.StringIO(text))
    assert run.rankings["1"] == [("B", 1, 2.0), ("A", 2, 1.0)]


def test_parse_run_tie_is_item_descending():
    text = "1 Q0 A 1 2.0 t\n1 Q0 B 2 2.0 t\n"
    run = parse_run(io.StringIO(text))
    assert [item for item, _r, _s in run.rankings["1"]] == ["B", "A"]


def test_parse_run_field_count_error_names_line():
    with pytest.raises(FormatError, match=":1:"):
        parse_run(io.StringIO("101 D7 1 12.5\n"))


def test_parse_run_rejects_bad_numbers():
    with pytest.raises(FormatError):
        parse_run(io.StringIO("1 Q0 A one 2.0 t\n"))
    with pytest.raises(FormatError):
        parse_run(io.StringIO("1 Q0 A 1 fast t\n"))
    with pytest.raises(FormatError):
        parse_run(io.StringIO("1 Q0 A 1 nan t\n"))


def test_parse_run_rejects_duplicates():
    with pytest.raises(DuplicateEntry):
        parse_run(io.StringIO("1 Q0 A 1 2.0 t\n1 Q0 A 2 1.0 t\n"))


def test_run_roundtrip_is_identity_on_normalized_runs():
    rng = random.Random(11)
    for _ in range(100):
        raw, _ = _random_instance(rng)
        buffer = io.StringIO()
        write_run(raw, buffer)
        normalized = parse_run(io.StringIO(buffer.getvalue()))
        again = io.StringIO()
        write_run(normalized, again)
        assert again.getvalue() == buffer.getvalue()
        assert parse_run(io.StringIO(again.getvalue())) == normalized


def test_write_run_normalizes_rank_gaps():
    run = Run(tag="t", rankings={"1": [("A", 4, 2.0), ("B", 9, 1.0)]})
    buffer = io.StringIO()
    write_run(run, buffer)
    assert buffer.getvalue() == "1 Q0 A 1 2 t\n1 Q0 B 2 1 t\n"


def test_empty_run_writes_nothing():
    buffer = io.StringIO()
    write_run(Run(tag="t", rankings={}), buffer)
    assert buffer.getvalue() == ""


def test_score_formatting_six_significant_digits():
    assert format_score(12.5) == "12.5"
    assert format_score(0.032522474) == "0.0325225"
    assert format_score(1.0) == "1"


def test_parse_qrels_basic():
    qrels = parse_qrels(io.StringIO("101 0 D7 3\n101 0 D8 0\n"))
    assert qrels.grades == {"101": {"D7": 3, "D8": 0}}


def test_parse_qrels_rejects_negative_grade():
    with pytest.raises(FormatError):
        parse_qrels(io.StringIO("101 0 D7 -1\n"))


def test_parse_qrels_rejects_duplicates():
    with pytest.raises(DuplicateEntry):
        parse_qrels(io.StringIO("101 0 D7 3\n101 0 D7 2\n"))


def test_qrels_roundtrip():
    rng = random.Random(13)
    for _ in range(100):
        grades = {
            f"q{qi}": {f"d{n}": rng.randint(0, 3)
                       for n in range(rng.randint(1, 10))}
            for qi in range(rng.randint(1, 6))
        }
        qrels = _qrels(grades)
        buffer = io.StringIO()
        write_qrels(qrels, buffer)
        assert parse_qrels(io.StringIO(buffer.getvalue())) == qrels


# -- reports -------------------------------------------------------------------

def _report_with_means(tag, means):
    run = make_run(tag, {})
    qrels = _qrels({})
    report = evaluate_run(run, qrels)
    for name, value in means.items():
        report.metrics[name].mean = value
    return report


def test_table_row_formatting():
    report = _report_with_means(
        "baseline_a", {"MAP@100": 0.2362, "NDCG@5": 0.7190,
                       "NDCG@10": 0.6951, "R@100": 0.3261})
    assert report.table_row() == "baseline_a 0.2362 0.7190 0.6951 0.3261"


def test_machine_lines():
    report = _report_with_means(
        "r", {"MAP@100": 0.1, "NDCG@5": 0.2, "NDCG@10": 0.3, "R@100": 0.4})
    assert report.machine_lines() == [
        "r MAP@100 0.1000", "r NDCG@5 0.2000",
        "r NDCG@10 0.3000", "r R@100 0.4000"]


def test_empty_intersection_gives_zero_nan_free_report():
    run = make_run("t", {"q1": [("d1", 1.0)]})
    qrels = _qrels({"q9": {"d1": 2}})
    report = evaluate_run(run, qrels)
    for name in ("MAP@100", "NDCG@5", "NDCG@10", "R@100"):
        assert report.metrics[name].mean == 0.0
        assert not math.isnan(report.metrics[name].mean)
    assert report.warnings
    assert "0.0000" in render_report(report)


def test_compare_reports_deltas():
    a = _report_with_means("a", {"MAP@100": 0.3, "NDCG@5": 0.75,
                                 "NDCG@10": 0.70, "R@100": 0.5})
    b = _report_with_means("b", {"MAP@100": 0.2, "NDCG@5": 0.70,
                                 "NDCG@10": 0.72, "R@100": 0.5})
    text = compare_reports(a, b)
    # supports the "higher NDCG@5 but lower NDCG@10" style of diagnosis
    assert "NDCG@5   0.7500 0.7000 +0.0500" in text
    assert "NDCG@10  0.7000 0.7200 -0.0200" in text


def test_all_means_within_unit_interval():
    rng = random.Random(17)
    for _ in range(50):
        run, qrels = _random_instance(rng)
        report = evaluate_run(run, qrels)
        for result in report.metrics.values():
            assert 0.0 <= result.mean <= 1.0
