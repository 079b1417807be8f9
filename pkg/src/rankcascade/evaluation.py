"""TREC-style run and qrels handling plus ranking metrics.

Runs are normalized on parse: rankings re-sorted by (score desc, item_id
desc) and ranks reassigned 1..n, so any rank gaps or out-of-order lines in
the input are repaired. Scores are written with %.6g, which round-trips
through a parse for values that were themselves written with %.6g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .errors import DuplicateEntry, FormatError

RELEVANCE_THRESHOLD = 2  # grade >= 2 counts as relevant for MAP / recall


@dataclass
class Run:
    tag: str
    # query_id -> [(item_id, rank, score)] with rank == position (1-based)
    rankings: dict[str, list[tuple[str, int, float]]] = field(default_factory=dict)


@dataclass
class Qrels:
    # query_id -> item_id -> grade (int >= 0)
    grades: dict[str, dict[str, int]] = field(default_factory=dict)

    def relevant_count(self, query_id: str,
                       threshold: int = RELEVANCE_THRESHOLD) -> int:
        return sum(1 for g in self.grades.get(query_id, {}).values()
                   if g >= threshold)


def format_score(score: float) -> str:
    return "%.6g" % score


def _normalize(entries: dict[str, list[tuple[str, float]]]) -> dict[str, list[tuple[str, int, float]]]:
    out: dict[str, list[tuple[str, int, float]]] = {}
    for qid, pairs in entries.items():
        ordered = sorted(pairs, key=lambda p: (p[1], p[0]), reverse=True)
        out[qid] = [(item, rank, score)
                    for rank, (item, score) in enumerate(ordered, start=1)]
    return out


def make_run(tag: str, lists: dict[str, list[tuple[str, float]]]) -> Run:
    """Build a normalized Run from {query_id: [(item_id, score)]}."""
    return Run(tag=tag, rankings=_normalize(lists))


def parse_run(stream: Iterable[str], path: str = "<run>") -> Run:
    entries: dict[str, list[tuple[str, float]]] = {}
    seen: set[tuple[str, str]] = set()
    tag: str | None = None
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 6:
            raise FormatError(
                f"{path}:{lineno}: expected 6 whitespace-separated fields, "
                f"got {len(fields)}")
        qid, literal, item, rank_text, score_text, line_tag = fields
        if literal != "Q0":
            raise FormatError(
                f"{path}:{lineno}: second field must be Q0, got {literal!r}")
        try:
            int(rank_text)
        except ValueError:
            raise FormatError(
                f"{path}:{lineno}: rank {rank_text!r} is not an integer"
            ) from None
        try:
            score = float(score_text)
        except ValueError:
            raise FormatError(
                f"{path}:{lineno}: score {score_text!r} is not a number"
            ) from None
        if not math.isfinite(score):
            raise FormatError(
                f"{path}:{lineno}: score {score_text!r} is not finite")
        key = (qid, item)
        if key in seen:
            raise DuplicateEntry(
                f"{path}:{lineno}: duplicate (query, item) pair {key!r}")
        seen.add(key)
        if tag is None:
            tag = line_tag
        entries.setdefault(qid, []).append((item, score))
    return Run(tag=tag if tag is not None else "", rankings=_normalize(entries))


def write_run(run: Run, stream: TextIO) -> None:
    """Write queries sorted by id, items in stored order, ranks renumbered."""
    for qid in sorted(run.rankings):
        for position, (item, _rank, score) in enumerate(run.rankings[qid],
                                                        start=1):
            stream.write(f"{qid} Q0 {item} {position} "
                         f"{format_score(score)} {run.tag}\n")


def parse_qrels(stream: Iterable[str], path: str = "<qrels>") -> Qrels:
    grades: dict[str, dict[str, int]] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 4:
            raise FormatError(
                f"{path}:{lineno}: expected 4 whitespace-separated fields, "
                f"got {len(fields)}")
        qid, _zero, item, grade_text = fields
        try:
            grade = int(grade_text)
        except ValueError:
            raise FormatError(
                f"{path}:{lineno}: grade {grade_text!r} is not an integer"
            ) from None
        if grade < 0:
            raise FormatError(f"{path}:{lineno}: negative grade {grade}")
        per_query = grades.setdefault(qid, {})
        if item in per_query:
            raise DuplicateEntry(
                f"{path}:{lineno}: duplicate (query, item) pair "
                f"{(qid, item)!r}")
        per_query[item] = grade
    return Qrels(grades=grades)


def write_qrels(qrels: Qrels, stream: TextIO) -> None:
    for qid in sorted(qrels.grades):
        for item in sorted(qrels.grades[qid]):
            stream.write(f"{qid} 0 {item} {qrels.grades[qid][item]}\n")


# -- metrics ------------------------------------------------------------------

@dataclass
class MetricResult:
    name: str
    per_query: dict[str, float]
    mean: float
    # run queries that were skipped: no judgments at all, or nothing that
    # can score above zero (all-zero grades for NDCG, R == 0 for MAP/recall)
    skipped: list[str] = field(default_factory=list)


def _mean(values: dict[str, float]) -> float:
    return (sum(values.values()) / len(values)) if values else 0.0


def _gain(grade: int, exponential: bool) -> float:
    return float(2 ** grade - 1) if exponential else float(grade)


def ndcg_at_k(run: Run, qrels: Qrels, k: int,
              exponential: bool = False) -> MetricResult:
    """NDCG@k with linear gain grade/log2(rank+1) (exponential optional).

    Queries absent from the qrels, or judged with all-zero grades, are
    excluded from the mean.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    per_query: dict[str, float] = {}
    skipped: list[str] = []
    for qid, ranking in run.rankings.items():
        judgments = qrels.grades.get(qid)
        if not judgments:
            skipped.append(qid)
            continue
        ideal_gains = sorted((_gain(g, exponential)
                              for g in judgments.values()), reverse=True)
        idcg = sum(g / math.log2(i + 1) for i, g in
                   enumerate(ideal_gains[:k], start=1))
        if idcg == 0.0:
            skipped.append(qid)
            continue
        dcg = 0.0
        for item, rank, _score in ranking[:k]:
            grade = judgments.get(item, 0)
            if grade:
                dcg += _gain(grade, exponential) / math.log2(rank + 1)
        per_query[qid] = dcg / idcg
    return MetricResult(name=f"NDCG@{k}", per_query=per_query,
                        mean=_mean(per_query), skipped=sorted(skipped))


def map_at_k(run: Run, qrels: Qrels, k: int = 100,
             threshold: int = RELEVANCE_THRESHOLD) -> MetricResult:
    """Mean average precision at k; grade >= threshold is relevant.

    Average precision divides by R, the total number of relevant items in
    the qrels for the query (not capped at k). Queries with R == 0 are
    excluded from the mean.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    per_query: dict[str, float] = {}
    skipped: list[str] = []
    for qid, ranking in run.rankings.items():
        judgments = qrels.grades.get(qid)
        total_relevant = qrels.relevant_count(qid, threshold)
        if not judgments or total_relevant == 0:
            skipped.append(qid)
            continue
        hits = 0
        precision_sum = 0.0
        for item, rank, _score in ranking[:k]:
            if judgments.get(item, 0) >= threshold:
                hits += 1
                precision_sum += hits / rank
        per_query[qid] = precision_sum / total_relevant
    return MetricResult(name=f"MAP@{k}", per_query=per_query,
                        mean=_mean(per_query), skipped=sorted(skipped))


def recall_at_k(run: Run, qrels: Qrels, k: int = 100,
                threshold: int = RELEVANCE_THRESHOLD) -> MetricResult:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    per_query: dict[str, float] = {}
    skipped: list[str] = []
    for qid, ranking in run.rankings.items():
        total_relevant = qrels.relevant_count(qid, threshold)
        if qid not in qrels.grades or total_relevant == 0:
            skipped.append(qid)
            continue
        judgments = qrels.grades[qid]
        hits = sum(1 for item, _rank, _score in ranking[:k]
                   if judgments.get(item, 0) >= threshold)
        per_query[qid] = hits / total_relevant
    return MetricResult(name=f"R@{k}", per_query=per_query,
                        mean=_mean(per_query), skipped=sorted(skipped))


# -- reports ------------------------------------------------------------------

REPORT_METRICS = ("MAP@100", "NDCG@5", "NDCG@10", "R@100")


@dataclass
class MetricsReport:
    tag: str
    metrics: dict[str, MetricResult]
    warnings: list[str] = field(default_factory=list)

    def table_row(self) -> str:
        cells = " ".join(f"{self.metrics[name].mean:.4f}"
                         for name in REPORT_METRICS)
        return f"{self.tag} {cells}"

    def machine_lines(self) -> list[str]:
        return [f"{self.tag} {name} {self.metrics[name].mean:.4f}"
                for name in REPORT_METRICS]


def evaluate_run(run: Run, qrels: Qrels,
                 threshold: int = RELEVANCE_THRESHOLD,
                 exponential: bool = False) -> MetricsReport:
    """Evaluate the standard metric set over run-and-qrels queries.

    Queries present only on one side are skipped and surfaced as warnings;
    an empty intersection yields a zero-filled, NaN-free report.
    """
    metrics = {
        "MAP@100": map_at_k(run, qrels, 100, threshold),
        "NDCG@5": ndcg_at_k(run, qrels, 5, exponential),
        "NDCG@10": ndcg_at_k(run, qrels, 10, exponential),
        "R@100": recall_at_k(run, qrels, 100, threshold),
    }
    warnings = []
    run_queries = set(run.rankings)
    judged = set(qrels.grades)
    unjudged = sorted(run_queries - judged)
    if unjudged:
        warnings.append(
            f"{len(unjudged)} run queries have no judgments: "
            f"{', '.join(unjudged[:5])}{'...' if len(unjudged) > 5 else ''}")
    unranked = sorted(judged - run_queries)
    if unranked:
        warnings.append(
            f"{len(unranked)} judged queries are missing from the run: "
            f"{', '.join(unranked[:5])}{'...' if len(unranked) > 5 else ''}")
    if not run_queries & judged:
        warnings.append("run and qrels share no queries; all means are 0")
    return MetricsReport(tag=run.tag, metrics=metrics, warnings=warnings)


def render_report(report: MetricsReport) -> str:
    lines = [f"run: {report.tag}"]
    for name in REPORT_METRICS:
        result = report.metrics[name]
        extra = f"  (skipped {len(result.skipped)})" if result.skipped else ""
        lines.append(f"  {name:<8} {result.mean:.4f}{extra}")
    for warning in report.warnings:
        lines.append(f"  warning: {warning}")
    return "\n".join(lines)


def compare_reports(a: MetricsReport, b: MetricsReport) -> str:
    """Per-metric deltas (a minus b), the tool for A/B run diagnosis."""
    lines = [f"delta: {a.tag} vs {b.tag}"]
    for name in REPORT_METRICS:
        delta = a.metrics[name].mean - b.metrics[name].mean
        lines.append(f"  {name:<8} {a.metrics[name].mean:.4f} "
                     f"{b.metrics[name].mean:.4f} {delta:+.4f}")
    return "\n".join(lines)
