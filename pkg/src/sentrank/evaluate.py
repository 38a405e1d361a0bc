"""Qrels/run file IO, average precision, precision at k, and the paired t-test.

File formats (whitespace-separated, one record per line):
  qrels:  topic 0 docid grade
  run:    topic Q0 docid rank score tag
Unjudged (topic, doc) pairs count as not relevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import AbstractSet, Iterable, NamedTuple, Sequence

from .errors import ParseError
from .stats import student_t_two_sided_p

DEFAULT_DEPTH = 1000
DEFAULT_KS = (20, 30)


@dataclass
class Qrels:
    """Relevance judgments: topic -> doc -> grade; grade > 0 means relevant."""

    judgments: dict[str, dict[str, int]]

    def relevant(self, topic_id: str) -> set[str]:
        return {d for d, g in self.judgments.get(topic_id, {}).items() if g > 0}

    def topics(self) -> list[str]:
        return sorted(self.judgments)


class RunEntry(NamedTuple):
    doc_id: str
    rank: int
    score: float
    tag: str


@dataclass
class Run:
    """Ranked results per topic, ranks consecutive from 1, scores non-increasing."""

    entries: dict[str, list[RunEntry]]

    def topics(self) -> list[str]:
        return sorted(self.entries)

    def ranking(self, topic_id: str) -> list[str]:
        return [e.doc_id for e in self.entries.get(topic_id, [])]


def parse_qrels(text: str) -> Qrels:
    judgments: dict[str, dict[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", f"line {lineno}")
        topic_id, _, doc_id, grade_s = parts
        try:
            grade = int(grade_s)
        except ValueError:
            raise ParseError(f"non-numeric grade {grade_s!r}", f"line {lineno}") from None
        if grade < 0:
            raise ParseError(f"negative grade {grade}", f"line {lineno}")
        by_doc = judgments.setdefault(topic_id, {})
        if doc_id in by_doc:
            raise ParseError(f"duplicate judgment for ({topic_id}, {doc_id})", f"line {lineno}")
        by_doc[doc_id] = grade
    return Qrels(judgments)


def parse_run(text: str) -> Run:
    entries: dict[str, list[RunEntry]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", f"line {lineno}")
        topic_id, _, doc_id, rank_s, score_s, tag = parts
        try:
            rank = int(rank_s)
            score = float(score_s)
        except ValueError:
            raise ParseError(f"non-numeric rank or score: {line!r}", f"line {lineno}") from None
        if not math.isfinite(score):
            raise ParseError(f"non-finite score {score_s!r}", f"line {lineno}")
        lst = entries.setdefault(topic_id, [])
        if rank != len(lst) + 1:
            raise ParseError(
                f"non-consecutive rank {rank} for topic {topic_id} (expected {len(lst) + 1})",
                f"line {lineno}",
            )
        if lst and score > lst[-1].score:
            raise ParseError(f"score increases at rank {rank} of topic {topic_id}", f"line {lineno}")
        if any(e.doc_id == doc_id for e in lst):
            raise ParseError(f"duplicate doc {doc_id} in topic {topic_id}", f"line {lineno}")
        lst.append(RunEntry(doc_id, rank, score, tag))
    return Run(entries)


def write_run(run: Run, tag: str | None = None) -> str:
    """Format a run: topics ascending, ranks from 1, scores at 6 decimals."""
    lines = []
    for topic_id in sorted(run.entries):
        for i, e in enumerate(run.entries[topic_id], start=1):
            lines.append(f"{topic_id} Q0 {e.doc_id} {i} {e.score:.6f} {tag or e.tag}")
    return "\n".join(lines) + ("\n" if lines else "")


def run_from_results(results: dict[str, Sequence], tag: str) -> Run:
    """Build a Run from per-topic (doc_id, score) sequences already ranked."""
    entries: dict[str, list[RunEntry]] = {}
    for topic_id, ranked in results.items():
        entries[topic_id] = [
            RunEntry(doc_id, i, float(score), tag)
            for i, (doc_id, score) in enumerate(ranked, start=1)
        ]
    return Run(entries)


def average_precision(
    ranked: Sequence[str],
    relevant: AbstractSet[str],
    depth: int = DEFAULT_DEPTH,
) -> float:
    """Mean of precision at each relevant retrieved rank, divided by |relevant|.

    Evaluation truncates at depth; relevant documents never retrieved still
    count in the denominator.
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if not relevant:
        raise ValueError("average precision is undefined with no relevant documents")
    hits = 0
    total = 0.0
    for i, doc_id in enumerate(ranked[:depth], start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def precision_at_k(ranked: Sequence[str], relevant: AbstractSet[str], k: int) -> float:
    """Fraction of the top k that is relevant; short rankings pad as non-relevant."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return sum(1 for doc_id in ranked[:k] if doc_id in relevant) / k


@dataclass
class MetricReport:
    per_topic: dict[str, dict]
    mean_ap: float
    mean_p_at_k: dict[int, float]
    skipped: list[str] = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {
            "per_topic": {
                t: {"ap": v["ap"], "p_at_k": {str(k): p for k, p in v["p_at_k"].items()}}
                for t, v in self.per_topic.items()
            },
            "mean_ap": self.mean_ap,
            "mean_p_at_k": {str(k): p for k, p in self.mean_p_at_k.items()},
            "skipped_topics": self.skipped,
        }

    def to_table(self) -> str:
        ks = sorted(self.mean_p_at_k)
        header = ["topic", "AP"] + [f"P@{k}" for k in ks]
        rows = [header]
        for topic_id in sorted(self.per_topic):
            v = self.per_topic[topic_id]
            rows.append([topic_id, f"{v['ap']:.4f}"] + [f"{v['p_at_k'][k]:.4f}" for k in ks])
        rows.append(["all", f"{self.mean_ap:.4f}"] + [f"{self.mean_p_at_k[k]:.4f}" for k in ks])
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows)


def evaluate_run(
    run: Run,
    qrels: Qrels,
    ks: Iterable[int] = DEFAULT_KS,
    depth: int = DEFAULT_DEPTH,
) -> MetricReport:
    """Per-topic and mean AP / P@k; topics without relevant judgments are skipped."""
    ks = sorted(set(ks))
    per_topic: dict[str, dict] = {}
    skipped: list[str] = []
    for topic_id in sorted(run.entries):
        relevant = qrels.relevant(topic_id)
        if not relevant:
            skipped.append(topic_id)
            continue
        ranking = run.ranking(topic_id)
        per_topic[topic_id] = {
            "ap": average_precision(ranking, relevant, depth),
            "p_at_k": {k: precision_at_k(ranking, relevant, k) for k in ks},
        }
    if not per_topic:
        raise ValueError("no topics with relevant judgments to evaluate")
    n = len(per_topic)
    mean_ap = sum(v["ap"] for v in per_topic.values()) / n
    mean_p = {k: sum(v["p_at_k"][k] for v in per_topic.values()) / n for k in ks}
    return MetricReport(per_topic=per_topic, mean_ap=mean_ap, mean_p_at_k=mean_p, skipped=skipped)


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    n: int
    degenerate: bool


def paired_t_test(x: Sequence[float], y: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on per-topic metric pairs.

    All-zero differences are reported as degenerate (t=0, p=1); zero variance
    with a nonzero mean yields t = +/-inf and p = 0.
    """
    if len(x) != len(y):
        raise ValueError(f"paired samples differ in length: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    d = [float(a) - float(b) for a, b in zip(x, y)]
    if all(v == 0.0 for v in d):
        return TTestResult(t=0.0, p=1.0, n=n, degenerate=True)
    mean = sum(d) / n
    var = sum((v - mean) ** 2 for v in d) / (n - 1)
    sd = math.sqrt(var)
    if sd == 0.0:
        t = math.inf if mean > 0 else -math.inf
        return TTestResult(t=t, p=0.0, n=n, degenerate=False)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t=t, p=student_t_two_sided_p(t, n - 1), n=n, degenerate=False)
