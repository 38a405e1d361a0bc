"""Walkthrough: score candidate documents sentence-by-sentence and mix the
top sentence scores with the retrieval score.

Documents short enough for the scorer are scored whole; long ones are
segmented (and over-long sentences chunked) first.  Sweeping the mix
weight `a` from 1.0 to 0.0 moves the ranking from retrieval-only to
best-sentence-only.

Run from the repository root:  python3 demos/02_sentence_rerank.py
"""

from pathlib import Path

from sentrank import corpus, index
from sentrank.index import SearchParams, search_rm3
from sentrank.rerank import AggregationParams, DocStore, SentenceScoreCache, rerank_topic
from sentrank.scorer import LexicalScorer

MINI = Path("data/mini")

raw_docs = corpus.parse_trec_collection((MINI / "corpus.sgml").read_bytes())
idx = index.build([corpus.clean(r) for r in raw_docs])
topic = corpus.parse_topics((MINI / "topics.sgml").read_bytes())[3]
print(f"topic {topic.topic_id}: {topic.title!r}")

candidates = search_rm3(idx, topic, "ql", SearchParams(depth=50))
print(f"{len(candidates)} candidates from QL+RM3")

# The lexical scorer stands in for a neural sentence scorer: same interface,
# deterministic idf-weighted overlap in [0, 1].
scorer = LexicalScorer(idx)
docs = DocStore(raw_docs, limit=16)
cache = SentenceScoreCache()

for a in (1.0, 0.6, 0.0):
    params = AggregationParams(n=2, a=a, w=(1.0, 0.5))
    reranked = rerank_topic(topic, candidates, docs, scorer, params, cache)
    head = ", ".join(r.doc_id for r in reranked[:5])
    print(f"  a={a:.1f}  top 5: {head}")

best = rerank_topic(topic, candidates, docs, scorer, AggregationParams(2, 0.6, (1.0, 0.5)), cache)[0]
print(f"\nwinner at a=0.6: {best.doc_id}")
print(f"  retrieval score {best.base_score:.4f} (normalized {best.norm_base:.3f})")
print(f"  sentence scores {[round(s, 3) for s in best.sentence_scores[:4]]}")
print(f"  final score     {best.final_score:.4f}")

# every sentence score computed above is reusable for offline tuning
print(f"\ncache now holds {len(cache)} (topic, document) entries, e.g.:")
print("\n".join(cache.dump().splitlines()[:3]))
