"""Walkthrough: parse a TREC-style collection, build the index, and compare
plain BM25 / query-likelihood rankings with their RM3-expanded versions.

Run from the repository root:  python3 demos/01_retrieval.py
"""

from pathlib import Path

from sentrank import corpus, index
from sentrank.index import SearchParams, WeightedQuery, bm25_search, ql_search, search_rm3

MINI = Path("data/mini")

# --- parse and clean the bundled collection --------------------------------
raw_docs = corpus.parse_trec_collection((MINI / "corpus.sgml").read_bytes())
docs = [corpus.clean(r) for r in raw_docs]
print(f"parsed {len(docs)} documents; first id: {docs[0].doc_id}")

idx = index.build(docs)
print(
    f"index: {idx.doc_count} docs, {idx.total_collection_tokens} tokens, "
    f"{idx.vocabulary_size()} distinct terms, avg doc length {idx.avg_doc_length:.1f}"
)

# --- one topic, four rankings ----------------------------------------------
topics = corpus.parse_topics((MINI / "topics.sgml").read_bytes())
topic = topics[0]
print(f"\ntopic {topic.topic_id}: {topic.title!r}")

params = SearchParams(depth=10)
query = WeightedQuery.from_text(topic.title, idx.stopwords).normalized()

for label, ranked in [
    ("BM25", bm25_search(idx, query, params)),
    ("QL", ql_search(idx, query, params)),
    ("BM25+RM3", search_rm3(idx, topic, "bm25", params)),
    ("QL+RM3", search_rm3(idx, topic, "ql", params)),
]:
    head = ", ".join(f"{d}:{s:.4f}" for d, s in ranked[:5])
    print(f"  {label:<9} {head}")

# --- what RM3 actually does to the query ------------------------------------
from sentrank.index import rm3_expand

initial = ql_search(idx, query, SearchParams())
expanded = rm3_expand(idx, WeightedQuery.from_text(topic.title, idx.stopwords), initial, SearchParams())
top_terms = sorted(expanded.weights.items(), key=lambda kv: -kv[1])[:8]
print("\nexpanded query (top terms):")
for term, weight in top_terms:
    print(f"  {term:<14} {weight:.4f}")
