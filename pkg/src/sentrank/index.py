"""Immutable inverted index with BM25, Dirichlet query-likelihood, and RM3.

The index is built once and then only read; concurrent searches over one
Index are safe.  Retrieval candidates are always the union of the postings
of the query terms: a document matching no query term is never returned.
Tokenization is deliberately minimal (lowercase, alphanumeric runs, an
optional stopword list); there is no stemmer, though a custom pre-stemmed
corpus works fine since queries and documents share one tokenizer.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .corpus import CleanDocument, Topic
from .errors import DataError

INDEX_FORMAT = "sentrank-index/1"

# Classic 33-word English stopword list (the Lucene default).
STOPWORDS = frozenset(
    """a an and are as at be but by for if in into is it no not of on or such
    that the their then there these they this to was will with""".split()
)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str, stopwords: frozenset[str] = STOPWORDS) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop empties and stopwords."""
    terms = _TOKEN_RE.findall(text.lower())
    if stopwords:
        return [t for t in terms if t not in stopwords]
    return terms


class ScoredDoc(NamedTuple):
    doc_id: str
    score: float


@dataclass(frozen=True)
class SearchParams:
    """Retrieval hyperparameters; defaults mirror common toolkit settings."""

    k1: float = 0.9
    b: float = 0.4
    mu: float = 1000.0
    depth: int = 1000
    fb_docs: int = 10
    fb_terms: int = 10
    orig_weight: float = 0.5

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.fb_docs < 1 or self.fb_terms < 1:
            raise ValueError("fb_docs and fb_terms must be >= 1")
        if not 0.0 <= self.orig_weight <= 1.0:
            raise ValueError(f"orig_weight must be in [0, 1], got {self.orig_weight}")


@dataclass(frozen=True)
class WeightedQuery:
    """A query as a term -> nonnegative weight mapping."""

    weights: dict[str, float]

    def __post_init__(self):
        if not self.weights or all(w <= 0 for w in self.weights.values()):
            raise ValueError("query needs at least one positive term weight")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("query weights must be nonnegative")

    def normalized(self) -> "WeightedQuery":
        """Positive weights rescaled to sum to 1; zero-weight terms dropped."""
        total = sum(w for w in self.weights.values() if w > 0)
        return WeightedQuery({t: w / total for t, w in self.weights.items() if w > 0})

    @classmethod
    def from_text(cls, text: str, stopwords: frozenset[str] = STOPWORDS) -> "WeightedQuery":
        """Raw term-frequency weights from free text (normalize separately)."""
        terms = tokenize(text, stopwords)
        if not terms:
            raise ValueError(f"no query terms in {text!r}")
        counts: dict[str, float] = {}
        for t in terms:
            counts[t] = counts.get(t, 0.0) + 1.0
        return cls(counts)


@dataclass
class Index:
    """Inverted index plus the collection statistics the ranking models need."""

    postings: dict[str, list[tuple[str, int]]]
    doc_length: dict[str, int]
    doc_count: int
    avg_doc_length: float
    collection_frequency: dict[str, int]
    total_collection_tokens: int
    doc_terms: dict[str, dict[str, int]]
    stopwords: frozenset[str] = STOPWORDS

    def df(self, term: str) -> int:
        plist = self.postings.get(term)
        return len(plist) if plist else 0

    def idf(self, term: str) -> float:
        """BM25 idf, ln(1 + (N - df + 0.5)/(df + 0.5)); positive for df <= N."""
        df = self.df(term)
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def vocabulary_size(self) -> int:
        return len(self.postings)


def build(docs: Iterable[CleanDocument], stopwords: frozenset[str] = STOPWORDS) -> Index:
    """Index cleaned documents; raises on duplicate ids or an empty collection."""
    doc_terms: dict[str, dict[str, int]] = {}
    doc_length: dict[str, int] = {}
    for doc in docs:
        if doc.doc_id in doc_terms:
            raise DataError(f"duplicate doc_id {doc.doc_id!r}")
        terms = tokenize(doc.text, stopwords)
        counts: dict[str, int] = {}
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
        # sorted term order keeps float accumulation identical after save/load
        doc_terms[doc.doc_id] = dict(sorted(counts.items()))
        doc_length[doc.doc_id] = len(terms)
    if not doc_terms:
        raise DataError("empty collection")

    postings: dict[str, list[tuple[str, int]]] = {}
    collection_frequency: dict[str, int] = {}
    for doc_id in sorted(doc_terms):
        for term, tf in doc_terms[doc_id].items():
            postings.setdefault(term, []).append((doc_id, tf))
            collection_frequency[term] = collection_frequency.get(term, 0) + tf
    total = sum(doc_length.values())
    return Index(
        postings=postings,
        doc_length=doc_length,
        doc_count=len(doc_length),
        avg_doc_length=total / len(doc_length),
        collection_frequency=collection_frequency,
        total_collection_tokens=total,
        doc_terms=doc_terms,
        stopwords=stopwords,
    )


def _ranked(scores: Mapping[str, float], depth: int) -> list[ScoredDoc]:
    """Sort by score descending, doc_id ascending, truncate to depth."""
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [ScoredDoc(doc_id, score) for doc_id, score in ordered[:depth]]


def bm25_search(index: Index, query: WeightedQuery, params: SearchParams) -> list[ScoredDoc]:
    """BM25 over the candidate set.

    score(d) = sum_t w_t * idf(t) * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avdl))
    """
    k1, b = params.k1, params.b
    avdl = index.avg_doc_length
    scores: dict[str, float] = {}
    for term, weight in query.weights.items():
        if weight <= 0:
            continue
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            dl = index.doc_length[doc_id]
            partial = idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avdl))
            scores[doc_id] = scores.get(doc_id, 0.0) + weight * partial
    return _ranked(scores, params.depth)


def ql_search(index: Index, query: WeightedQuery, params: SearchParams) -> list[ScoredDoc]:
    """Dirichlet-smoothed query likelihood over the candidate set.

    score(d) = sum_t w_t * ln((tf + mu*cf(t)/|C|) / (dl + mu)).
    Query terms absent from the collection are skipped (their smoothed
    probability is zero and would send every score to -inf).
    """
    mu = params.mu
    total = index.total_collection_tokens
    terms = [
        (t, w, index.collection_frequency[t])
        for t, w in query.weights.items()
        if w > 0 and t in index.collection_frequency
    ]
    if not terms:
        return []
    candidates: set[str] = set()
    for term, _, _ in terms:
        candidates.update(doc_id for doc_id, _ in index.postings[term])
    scores: dict[str, float] = {}
    for doc_id in candidates:
        dl = index.doc_length[doc_id]
        counts = index.doc_terms[doc_id]
        s = 0.0
        for term, weight, cf in terms:
            tf = counts.get(term, 0)
            s += weight * math.log((tf + mu * cf / total) / (dl + mu))
        scores[doc_id] = s
    return _ranked(scores, params.depth)


def rm3_expand(
    index: Index,
    original: WeightedQuery,
    initial: list[ScoredDoc],
    params: SearchParams,
) -> WeightedQuery:
    """Interpolate the original query with a relevance model from feedback docs.

    Document weights are a softmax over the retrieval scores of the top
    fb_docs results; the feedback model keeps the fb_terms strongest
    non-stopword terms (ties broken lexicographically) and is renormalized.
    The result mixes orig_weight * original + (1 - orig_weight) * feedback
    and always sums to 1.
    """
    orig = original.normalized()
    if not initial:
        return orig
    feedback = initial[: params.fb_docs]
    top = max(sd.score for sd in feedback)
    raw = [(sd.doc_id, math.exp(sd.score - top)) for sd in feedback]
    z = sum(u for _, u in raw)
    p: dict[str, float] = {}
    for doc_id, u in raw:
        dl = index.doc_length[doc_id]
        if dl == 0:
            continue
        for term, tf in index.doc_terms[doc_id].items():
            p[term] = p.get(term, 0.0) + (u / z) * tf / dl
    kept = sorted(
        ((t, w) for t, w in p.items() if t not in index.stopwords),
        key=lambda kv: (-kv[1], kv[0]),
    )[: params.fb_terms]
    if not kept:
        return orig
    fb_total = sum(w for _, w in kept)
    a = params.orig_weight
    mixed: dict[str, float] = {t: a * w for t, w in orig.weights.items()}
    for term, w in kept:
        if a < 1.0:
            mixed[term] = mixed.get(term, 0.0) + (1.0 - a) * (w / fb_total)
    return WeightedQuery({t: w for t, w in mixed.items() if w > 0})


def search_rm3(
    index: Index,
    topic: Topic,
    model: str,
    params: SearchParams,
) -> list[ScoredDoc]:
    """Initial retrieval, RM3 expansion, and a second pass with the expanded query."""
    base = {"bm25": bm25_search, "ql": ql_search}.get(model)
    if base is None:
        raise ValueError(f"unknown retrieval model {model!r}")
    terms = tokenize(topic.title, index.stopwords)
    if not any(t in index.postings for t in terms):
        return []
    original = WeightedQuery.from_text(topic.title, index.stopwords)
    initial = base(index, original.normalized(), params)
    if not initial:
        return []
    expanded = rm3_expand(index, original, initial, params)
    return base(index, expanded, params)


def dumps(index: Index) -> str:
    """Serialize the index to its JSON artifact form."""
    payload = {
        "format": INDEX_FORMAT,
        "stopwords": sorted(index.stopwords),
        "doc_length": index.doc_length,
        "postings": {t: [[d, tf] for d, tf in plist] for t, plist in index.postings.items()},
    }
    return json.dumps(payload, sort_keys=True, ensure_ascii=False)


def save(index: Index, path) -> None:
    """Persist the index to one JSON file; loading reproduces search results."""
    Path(path).write_text(dumps(index), encoding="utf-8")


def load(path) -> Index:
    """Load an index written by save()."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read index at {path}: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != INDEX_FORMAT:
        raise DataError(f"not a {INDEX_FORMAT} artifact: {path}")
    doc_length = {d: int(n) for d, n in payload["doc_length"].items()}
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_terms: dict[str, dict[str, int]] = {d: {} for d in doc_length}
    collection_frequency: dict[str, int] = {}
    for term, plist in payload["postings"].items():
        entries = [(d, int(tf)) for d, tf in plist]
        postings[term] = entries
        collection_frequency[term] = sum(tf for _, tf in entries)
        for d, tf in entries:
            doc_terms[d][term] = tf
    total = sum(doc_length.values())
    if not doc_length:
        raise DataError("index contains no documents")
    return Index(
        postings=postings,
        doc_length=doc_length,
        doc_count=len(doc_length),
        avg_doc_length=total / len(doc_length),
        collection_frequency=collection_frequency,
        total_collection_tokens=total,
        doc_terms=doc_terms,
        stopwords=frozenset(payload["stopwords"]),
    )
