"""Bag-of-words retrieval with sentence-level reranking.

The pipeline: index a collection, retrieve candidates with BM25 or
Dirichlet query likelihood plus RM3 feedback, score each candidate's
sentences with a pluggable scorer, and mix the top sentence scores with
the normalized retrieval score to produce the final ranking.  Aggregation
parameters are tuned by cross-validated grid search on mean AP.
"""

from .corpus import CleanDocument, RawDocument, Sentence, Topic
from .index import Index, ScoredDoc, SearchParams, WeightedQuery
from .rerank import AggregationParams, RerankedDoc, SentenceScoreCache
from .evaluate import MetricReport, Qrels, Run, TTestResult

__version__ = "0.1.0"

__all__ = [
    "CleanDocument",
    "RawDocument",
    "Sentence",
    "Topic",
    "Index",
    "ScoredDoc",
    "SearchParams",
    "WeightedQuery",
    "AggregationParams",
    "RerankedDoc",
    "SentenceScoreCache",
    "MetricReport",
    "Qrels",
    "Run",
    "TTestResult",
    "__version__",
]
