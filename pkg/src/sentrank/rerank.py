"""Sentence-score aggregation over retrieval candidates.

A candidate document's final score mixes its per-topic min-max-normalized
retrieval score with a weighted sum of its top sentence scores:

    final = a * norm_base + (1 - a) * sum_i w_i * s_i      (i = 1..n)

where s_1 >= s_2 >= ... are the document's sentence scores.  Fewer than n
sentences simply contribute fewer terms.  Ties anywhere are broken by
doc_id ascending so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import (
    CleanDocument,
    RawDocument,
    Sentence,
    Topic,
    build_sentences,
    clean,
    truncate_tokens,
)
from .errors import DataError, ParseError
from .index import ScoredDoc

MAX_TOP_SENTENCES = 4


@dataclass(frozen=True)
class AggregationParams:
    """The aggregation knobs: top-sentence count n, mix weight a, weights w.

    w[0] is the weight of the best sentence and is fixed at 1.
    """

    n: int
    a: float
    w: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(float(v) for v in self.w))
        if self.n not in (1, 2, 3, 4):
            raise ValueError(f"n must be in 1..4, got {self.n}")
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"a must be in [0, 1], got {self.a}")
        if len(self.w) != self.n:
            raise ValueError(f"expected {self.n} weights, got {len(self.w)}")
        if self.w[0] != 1.0:
            raise ValueError(f"w[0] is fixed at 1, got {self.w[0]}")
        if any(not 0.0 <= v <= 1.0 for v in self.w):
            raise ValueError(f"weights must be in [0, 1], got {self.w}")

    def key(self) -> tuple[float, ...]:
        """(a, w_2, w_3, w_4) padded with zeros; the tie-break ordering."""
        tail = self.w[1:] + (0.0,) * (MAX_TOP_SENTENCES - self.n)
        return (self.a,) + tail

    def to_jsonable(self) -> dict:
        return {"n": self.n, "a": self.a, "w": list(self.w)}

    @classmethod
    def from_jsonable(cls, obj) -> "AggregationParams":
        if not isinstance(obj, dict) or not {"n", "a", "w"} <= set(obj):
            raise ValueError(f"aggregation params need n, a, w: {obj!r}")
        return cls(n=int(obj["n"]), a=float(obj["a"]), w=tuple(obj["w"]))


@dataclass(frozen=True)
class RerankedDoc:
    doc_id: str
    base_score: float
    norm_base: float
    sentence_scores: tuple[float, ...]
    final_score: float


def minmax_normalize(scored: Sequence[ScoredDoc]) -> dict[str, float]:
    """Map scores to [0, 1] per topic; a degenerate range maps everything to 1."""
    if not scored:
        raise ValueError("cannot normalize an empty result list")
    lo = min(sd.score for sd in scored)
    hi = max(sd.score for sd in scored)
    if hi == lo:
        return {sd.doc_id: 1.0 for sd in scored}
    return {sd.doc_id: (sd.score - lo) / (hi - lo) for sd in scored}


def aggregate(params: AggregationParams, norm_base: float, tops: Sequence[float]) -> float:
    """Evaluate the aggregation equation; tops must be sorted descending in [0, 1]."""
    s = 0.0
    for i in range(min(params.n, len(tops))):
        s += params.w[i] * tops[i]
    return params.a * norm_base + (1.0 - params.a) * s


def scoring_sentences(doc_id: str, text: str, limit: int) -> list[Sentence]:
    """Sentences to score: the whole text if it fits the limit, else chunks.

    Short documents (microblog-style posts) are scored whole as a single
    sentence; longer ones are segmented and chunked to the limit.
    """
    tokens = text.split()
    if not tokens:
        return []
    if len(tokens) <= limit:
        return [Sentence(doc_id=doc_id, index=0, text=text, token_count=len(tokens))]
    return build_sentences(doc_id, text, limit)


class DocStore:
    """Lazily cleans raw documents and builds their scoring sentences."""

    def __init__(self, raw_docs: Sequence[RawDocument], limit: int):
        self._raw = {d.doc_id: d for d in raw_docs}
        self._limit = limit
        self._prepared: dict[str, CleanDocument] = {}

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._raw

    def __getitem__(self, doc_id: str) -> CleanDocument:
        doc = self._prepared.get(doc_id)
        if doc is None:
            raw = self._raw.get(doc_id)
            if raw is None:
                raise KeyError(doc_id)
            doc = clean(raw)
            doc.sentences = scoring_sentences(doc.doc_id, doc.text, self._limit)
            self._prepared[doc_id] = doc
        return doc


class SentenceScoreCache:
    """Per-(topic, doc) sentence scores, persisted as plain text.

    File lines are `topic_id doc_id sentence_index score` with six decimals,
    so tuning can rerun aggregation offline without a scorer.
    """

    def __init__(self):
        self._scores: dict[tuple[str, str], list[float]] = {}

    def __len__(self) -> int:
        return len(self._scores)

    def get(self, topic_id: str, doc_id: str) -> list[float] | None:
        return self._scores.get((topic_id, doc_id))

    def put(self, topic_id: str, doc_id: str, scores: Sequence[float]) -> None:
        self._scores[(topic_id, doc_id)] = [float(s) for s in scores]

    def covers(self, topic_id: str, doc_ids: Sequence[str]) -> bool:
        return all((topic_id, d) in self._scores for d in doc_ids)

    def dump(self) -> str:
        lines = []
        for (topic_id, doc_id) in sorted(self._scores):
            for i, s in enumerate(self._scores[(topic_id, doc_id)]):
                lines.append(f"{topic_id} {doc_id} {i} {s:.6f}")
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path) -> None:
        Path(path).write_text(self.dump(), encoding="utf-8")

    @classmethod
    def parse(cls, text: str) -> "SentenceScoreCache":
        staged: dict[tuple[str, str], dict[int, float]] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", f"line {lineno}")
            topic_id, doc_id, idx_s, score_s = parts
            try:
                idx = int(idx_s)
                score = float(score_s)
            except ValueError:
                raise ParseError(f"bad cache line {line!r}", f"line {lineno}") from None
            by_idx = staged.setdefault((topic_id, doc_id), {})
            if idx in by_idx:
                raise ParseError(f"duplicate cache entry {topic_id}/{doc_id}/{idx}", f"line {lineno}")
            by_idx[idx] = score
        cache = cls()
        for key, by_idx in staged.items():
            if sorted(by_idx) != list(range(len(by_idx))):
                raise ParseError(f"non-consecutive sentence indexes for {key[0]}/{key[1]}")
            cache._scores[key] = [by_idx[i] for i in range(len(by_idx))]
        return cache

    @classmethod
    def load(cls, path) -> "SentenceScoreCache":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


def score_sentences(topic: Topic, doc: CleanDocument, scorer) -> list[float]:
    """Score each sentence of a document against the topic, sorted descending."""
    if not doc.sentences:
        return []
    pairs = [
        (topic.title, truncate_tokens(s.text, scorer.max_tokens)) for s in doc.sentences
    ]
    return sorted(scorer.score_batch(pairs), reverse=True)


def rerank_topic(
    topic: Topic,
    candidates: Sequence[ScoredDoc],
    docs: Mapping[str, CleanDocument] | None,
    scorer,
    params: AggregationParams,
    cache: SentenceScoreCache | None = None,
) -> list[RerankedDoc]:
    """Rerank one topic's candidates by the aggregation equation.

    Sentence scores come from the cache when present; otherwise each
    document is scored once (in a single batch per topic) and the cache is
    populated.  Base scores are min-max normalized within the topic.
    """
    if not candidates:
        return []
    norm = minmax_normalize(candidates)

    per_doc: dict[str, list[float]] = {}
    missing: list[str] = []
    for sd in candidates:
        cached = cache.get(topic.topic_id, sd.doc_id) if cache is not None else None
        if cached is not None:
            per_doc[sd.doc_id] = sorted(cached, reverse=True)
        else:
            missing.append(sd.doc_id)

    if missing:
        if docs is None:
            raise DataError(
                f"no cached scores and no document store for topic {topic.topic_id} "
                f"(first missing doc: {missing[0]})"
            )
        batch: list[tuple[str, str]] = []
        counts: list[tuple[str, int]] = []
        for doc_id in missing:
            if doc_id not in docs:
                raise DataError(f"no document text for {doc_id}")
            sentences = docs[doc_id].sentences
            batch.extend(
                (topic.title, truncate_tokens(s.text, scorer.max_tokens)) for s in sentences
            )
            counts.append((doc_id, len(sentences)))
        scores = scorer.score_batch(batch) if batch else []
        pos = 0
        for doc_id, count in counts:
            raw = scores[pos : pos + count]
            pos += count
            if cache is not None:
                cache.put(topic.topic_id, doc_id, raw)
            per_doc[doc_id] = sorted(raw, reverse=True)

    out = []
    for sd in candidates:
        tops = per_doc[sd.doc_id]
        nb = norm[sd.doc_id]
        out.append(
            RerankedDoc(
                doc_id=sd.doc_id,
                base_score=sd.score,
                norm_base=nb,
                sentence_scores=tuple(tops),
                final_score=aggregate(params, nb, tops),
            )
        )
    out.sort(key=lambda r: (-r.final_score, r.doc_id))
    return out
