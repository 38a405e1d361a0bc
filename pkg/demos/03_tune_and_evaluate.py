"""Walkthrough: cross-validated grid search over the aggregation parameters,
then TREC-style evaluation with a paired t-test against the baseline.

Sentence scores are computed once and tuned from the cache; the grid is
exhaustive (11 x 11 x 11 for three sentences) and each held-out fold gets
the parameters that maximized mean AP on its training folds.

Run from the repository root:  python3 demos/03_tune_and_evaluate.py
"""

from pathlib import Path

from sentrank import corpus, index
from sentrank.evaluate import evaluate_run, paired_t_test, parse_qrels, run_from_results, write_run, parse_run
from sentrank.index import SearchParams, search_rm3
from sentrank.rerank import AggregationParams, DocStore, SentenceScoreCache, rerank_topic
from sentrank.scorer import LexicalScorer
from sentrank.tune import CachedRerankEvaluator, FoldSpec, grid_search

MINI = Path("data/mini")

raw_docs = corpus.parse_trec_collection((MINI / "corpus.sgml").read_bytes())
topics = corpus.parse_topics((MINI / "topics.sgml").read_bytes())
qrels = parse_qrels((MINI / "qrels.txt").read_text())
folds = FoldSpec.load(MINI / "folds.json")

idx = index.build([corpus.clean(r) for r in raw_docs])
params = SearchParams()
baseline = {t.topic_id: search_rm3(idx, t, "ql", params) for t in topics}

# fill the sentence-score cache once, through the normal rerank path
scorer = LexicalScorer(idx)
docs = DocStore(raw_docs, limit=16)
cache = SentenceScoreCache()
for t in topics:
    rerank_topic(t, baseline[t.topic_id], docs, scorer, AggregationParams(1, 0.5, (1.0,)), cache)

# exhaustive grid search: held-out folds never touch the selection objective
evaluator = CachedRerankEvaluator(baseline, cache, qrels)
result = grid_search(folds, 3, evaluator)
for fr in result.per_fold:
    p = fr.params
    print(
        f"fold {fr.fold_index}: best a={p.a:.1f} w={[round(v, 1) for v in p.w]} "
        f"training AP {fr.training_ap:.4f}"
    )

# assemble the cross-validated run from each fold's winner
merged = {
    topic_id: evaluator.rank(topic_id, fr.params)
    for fr in result.per_fold
    for topic_id in sorted(folds.folds[fr.fold_index])
}
cv_run = run_from_results(merged, tag="sentrank-cv")
base_run = run_from_results(baseline, tag="baseline")

report_base = evaluate_run(parse_run(write_run(base_run)), qrels)
report_cv = evaluate_run(parse_run(write_run(cv_run)), qrels)
print(f"\nbaseline  mean AP {report_base.mean_ap:.4f}  P@20 {report_base.mean_p_at_k[20]:.4f}")
print(f"tuned CV  mean AP {report_cv.mean_ap:.4f}  P@20 {report_cv.mean_p_at_k[20]:.4f}")

common = sorted(report_base.per_topic)
ttest = paired_t_test(
    [report_cv.per_topic[t]["ap"] for t in common],
    [report_base.per_topic[t]["ap"] for t in common],
)
print(f"paired t-test on AP: t={ttest.t:.3f}, p={ttest.p:.4f}, n={ttest.n}")
