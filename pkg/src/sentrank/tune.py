"""Exhaustive grid search over aggregation parameters under cross-validation.

Grids are generated at a 0.1 step with values produced as exact i/10
multiples so equality comparisons are safe.  Candidate order is
lexicographic in (a, w_2, w_3, w_4) and ties in training AP resolve to the
lexicographically smallest candidate, which makes the whole search
deterministic regardless of evaluation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ParseError
from .evaluate import Qrels, DEFAULT_DEPTH
from .index import ScoredDoc
from .rerank import AggregationParams, MAX_TOP_SENTENCES, SentenceScoreCache, minmax_normalize

_GRID = [i / 10 for i in range(11)]


@dataclass(frozen=True)
class FoldSpec:
    """A partition of topics into >= 2 disjoint folds."""

    folds: tuple[frozenset[str], ...]

    def __post_init__(self):
        object.__setattr__(self, "folds", tuple(frozenset(f) for f in self.folds))
        if len(self.folds) < 2:
            raise ValueError(f"need at least 2 folds, got {len(self.folds)}")
        seen: set[str] = set()
        for f in self.folds:
            overlap = seen & f
            if overlap:
                raise ValueError(f"folds overlap on topics {sorted(overlap)}")
            seen |= f

    def all_topics(self) -> set[str]:
        out: set[str] = set()
        for f in self.folds:
            out |= f
        return out

    def training_topics(self, held_out: int) -> list[str]:
        return sorted(t for i, f in enumerate(self.folds) if i != held_out for t in f)

    @classmethod
    def parse(cls, text: str) -> "FoldSpec":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"fold file is not valid JSON: {exc.msg}") from None
        if not isinstance(obj, list) or not all(isinstance(f, list) for f in obj):
            raise ParseError("fold file must be a JSON array of arrays of topic ids")
        try:
            return cls(tuple(frozenset(str(t) for t in f) for f in obj))
        except ValueError as exc:
            raise ParseError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "FoldSpec":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


def make_grid(n: int) -> list[AggregationParams]:
    """All candidates for n <= 3: a and each free w_i range over 0.0..1.0."""
    if n not in (1, 2, 3):
        raise ValueError(f"make_grid supports n in 1..3, got {n} (use extend_grid_4s)")
    if n == 1:
        return [AggregationParams(1, a, (1.0,)) for a in _GRID]
    if n == 2:
        return [AggregationParams(2, a, (1.0, w2)) for a in _GRID for w2 in _GRID]
    return [
        AggregationParams(3, a, (1.0, w2, w3))
        for a in _GRID
        for w2 in _GRID
        for w3 in _GRID
    ]


def _neighborhood(v: float) -> list[float]:
    i = round(v * 10)
    return [j / 10 for j in (i - 1, i, i + 1) if 0 <= j <= 10]


def extend_grid_4s(best3: AggregationParams) -> list[AggregationParams]:
    """Four-sentence candidates around a three-sentence optimum.

    w_4 ranges over the full grid while a, w_2, w_3 take one grid step in
    each direction (clamped to [0, 1]) around their best3 values.
    """
    if best3.n != 3:
        raise ValueError(f"expected three-sentence params, got n={best3.n}")
    return [
        AggregationParams(4, a, (1.0, w2, w3, w4))
        for a in _neighborhood(best3.a)
        for w2 in _neighborhood(best3.w[1])
        for w3 in _neighborhood(best3.w[2])
        for w4 in _GRID
    ]


class CachedRerankEvaluator:
    """Reranks from cached sentence scores and scores the result by mean AP.

    Per topic it precomputes, over candidates sorted by doc_id ascending:
    the normalized base score, the top-4 sentence scores (zero padded), and
    the relevance vector.  Rankings use a stable sort on the negated final
    scores, so ties inherit the doc_id order.  Topics without relevant
    judgments are excluded from means, matching the evaluation module.
    """

    def __init__(
        self,
        candidates: dict[str, Sequence[ScoredDoc]],
        cache: SentenceScoreCache,
        qrels: Qrels,
        depth: int = DEFAULT_DEPTH,
    ):
        self.depth = depth
        self._topics: dict[str, dict] = {}
        self.skipped: list[str] = []
        for topic_id in sorted(candidates):
            cands = candidates[topic_id]
            relevant = qrels.relevant(topic_id)
            if not relevant:
                self.skipped.append(topic_id)
                continue
            if not cands:
                self._topics[topic_id] = {"empty": True, "r": len(relevant)}
                continue
            norm = minmax_normalize(cands)
            by_doc = sorted(sd.doc_id for sd in cands)
            tops = np.zeros((len(by_doc), MAX_TOP_SENTENCES))
            for row, doc_id in enumerate(by_doc):
                scores = cache.get(topic_id, doc_id)
                if scores is None:
                    raise DataError(
                        f"missing cached sentence scores for topic {topic_id}, doc {doc_id}"
                    )
                best = sorted(scores, reverse=True)[:MAX_TOP_SENTENCES]
                tops[row, : len(best)] = best
            self._topics[topic_id] = {
                "empty": False,
                "doc_ids": by_doc,
                "norm": np.array([norm[d] for d in by_doc]),
                "tops": tops,
                "rel": np.array([1.0 if d in relevant else 0.0 for d in by_doc]),
                "r": len(relevant),
            }

    def topics(self) -> list[str]:
        return sorted(self._topics)

    def _finals(self, entry: dict, params: AggregationParams) -> np.ndarray:
        w = np.zeros(MAX_TOP_SENTENCES)
        w[: params.n] = params.w
        tops = entry["tops"]
        # column-by-column accumulation keeps float ops identical to aggregate()
        s = w[0] * tops[:, 0]
        for i in range(1, MAX_TOP_SENTENCES):
            if w[i] != 0.0:
                s = s + w[i] * tops[:, i]
        return params.a * entry["norm"] + (1.0 - params.a) * s

    def rank(self, topic_id: str, params: AggregationParams) -> list[ScoredDoc]:
        """Full reranked list for one topic (doc_id tie-break included)."""
        entry = self._topics.get(topic_id)
        if entry is None:
            raise DataError(f"topic {topic_id} is not evaluable (no candidates or judgments)")
        if entry["empty"]:
            return []
        finals = self._finals(entry, params)
        order = np.argsort(-finals, kind="stable")
        doc_ids = entry["doc_ids"]
        return [ScoredDoc(doc_ids[i], float(finals[i])) for i in order]

    def topic_ap(self, topic_id: str, params: AggregationParams) -> float:
        entry = self._topics[topic_id]
        if entry["empty"]:
            return 0.0
        finals = self._finals(entry, params)
        order = np.argsort(-finals, kind="stable")
        rel = entry["rel"][order][: self.depth]
        ap = 0.0
        for k, pos in enumerate(np.nonzero(rel)[0]):
            ap += (k + 1) / (int(pos) + 1)
        return ap / entry["r"]

    def mean_ap(self, params: AggregationParams, topic_ids: Iterable[str]) -> float:
        ids = sorted(set(topic_ids))
        if not ids:
            raise ValueError("empty topic set")
        unknown = [t for t in ids if t not in self._topics and t not in self.skipped]
        if unknown:
            raise DataError(f"topics not present in the candidate runs: {unknown}")
        usable = [t for t in ids if t in self._topics]
        if not usable:
            raise DataError(f"no evaluable topics among {ids}")
        aps = [self.topic_ap(t, params) for t in usable]
        return sum(aps) / len(aps)


def evaluate_params(
    params: AggregationParams,
    topic_ids: Iterable[str],
    evaluator: CachedRerankEvaluator,
) -> float:
    """Mean AP of a candidate parameter setting over the given topics."""
    return evaluator.mean_ap(params, topic_ids)


@dataclass(frozen=True)
class FoldResult:
    fold_index: int
    params: AggregationParams
    training_ap: float


@dataclass(frozen=True)
class TuneResult:
    per_fold: tuple[FoldResult, ...]

    def to_jsonable(self) -> dict:
        return {
            "per_fold": [
                {
                    "held_out_fold": fr.fold_index,
                    "params": fr.params.to_jsonable(),
                    "training_ap": fr.training_ap,
                }
                for fr in self.per_fold
            ]
        }


def _argmax(
    candidates: Sequence[AggregationParams],
    topic_ids: Sequence[str],
    evaluator: CachedRerankEvaluator,
) -> tuple[AggregationParams, float]:
    best = None
    best_ap = -1.0
    for params in candidates:  # lexicographic order; strict > keeps the smallest on ties
        ap = evaluator.mean_ap(params, topic_ids)
        if ap > best_ap:
            best, best_ap = params, ap
    assert best is not None
    return best, best_ap


def grid_search(
    fold_spec: FoldSpec,
    n: int,
    evaluator: CachedRerankEvaluator,
) -> TuneResult:
    """Per held-out fold, pick the training-AP argmax over the full grid.

    For n = 4 the search first finds the best three-sentence candidate on
    the training folds, then searches its four-sentence neighborhood.
    """
    if n not in (1, 2, 3, 4):
        raise ValueError(f"n must be in 1..4, got {n}")
    results = []
    for i in range(len(fold_spec.folds)):
        train = fold_spec.training_topics(i)
        if not train:
            raise DataError(f"no training topics when holding out fold {i}")
        if n <= 3:
            candidates: Sequence[AggregationParams] = make_grid(n)
        else:
            best3, _ = _argmax(make_grid(3), train, evaluator)
            candidates = extend_grid_4s(best3)
        best, ap = _argmax(candidates, train, evaluator)
        results.append(FoldResult(fold_index=i, params=best, training_ap=ap))
    return TuneResult(tuple(results))
