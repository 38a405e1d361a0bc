"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them).  Tolerances are fixed here and
match the contracts the library documents; none are calibrated at runtime.
"""

import contextlib
import hashlib
import json
import math
import time
import numpy as np
import pytest

from sentrank import corpus as cmod
from sentrank import index as imod
from sentrank.cli import main
from sentrank.corpus import CleanDocument, RawDocument, Topic, build_sentences, normalize_ws
from sentrank.evaluate import average_precision, paired_t_test, parse_qrels, precision_at_k
from sentrank.index import SearchParams, WeightedQuery, bm25_search, ql_search, search_rm3
from sentrank.rerank import AggregationParams, DocStore, SentenceScoreCache, aggregate, rerank_topic
from sentrank.scorer import LexicalScorer
from sentrank.tune import CachedRerankEvaluator, FoldSpec, extend_grid_4s, grid_search, make_grid

import oracle

NO_STOP = frozenset()


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def build_index(token_docs):
    docs = [CleanDocument(doc_id, " ".join(tokens)) for doc_id, tokens in token_docs.items()]
    return imod.build(docs, stopwords=NO_STOP)


@pytest.fixture(scope="module")
def mini(mini_paths):
    """Mini-corpus pipeline state shared by the aggregation/tuning criteria."""
    raw = cmod.parse_trec_collection(mini_paths["corpus"].read_bytes())
    topics = cmod.parse_topics(mini_paths["topics"].read_bytes())
    qrels = parse_qrels(mini_paths["qrels"].read_text())
    folds = FoldSpec.load(mini_paths["folds"])
    cleaned = [cmod.clean(r) for r in raw]
    idx = imod.build(cleaned)
    params = SearchParams()
    baseline = {t.topic_id: search_rm3(idx, t, "ql", params) for t in topics}
    assert all(baseline.values())
    return {
        "raw": raw,
        "topics": {t.topic_id: t for t in topics},
        "qrels": qrels,
        "folds": folds,
        "index": idx,
        "baseline": baseline,
    }


def test_bm25_ql_oracle_equivalence():
    """20 random corpora, <= 25 queries each: indexed search == brute force."""
    with criterion("BM25/QL oracle equivalence"):
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        for _ in range(20):
            n_docs = int(rng.integers(20, 201))
            vocab = int(rng.integers(5, 51))
            docs = oracle.random_corpus(rng, n_docs, vocab)
            idx = build_index(docs)
            params = SearchParams(depth=int(rng.integers(10, 1001)))
            for _ in range(25):
                terms = {
                    f"t{int(rng.integers(0, vocab + 3))}": float(rng.uniform(0.05, 1.0))
                    for _ in range(int(rng.integers(1, 5)))
                }
                query = WeightedQuery(terms)
                got = bm25_search(idx, query, params)
                ref = oracle.brute_bm25(docs, terms, params.k1, params.b, params.depth)
                assert [d for d, _ in got] == [d for d, _ in ref]
                assert all(abs(a - b) <= 1e-6 for (_, a), (_, b) in zip(got, ref))
                got = ql_search(idx, query, params)
                ref = oracle.brute_ql(docs, terms, params.mu, params.depth)
                assert [d for d, _ in got] == [d for d, _ in ref]
                assert all(abs(a - b) <= 1e-6 for (_, a), (_, b) in zip(got, ref))
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"oracle equivalence took {elapsed:.1f}s"


def test_rm3_identity(mini):
    """orig_weight = 1.0 makes search_rm3 reproduce the base-model run."""
    with criterion("RM3 identity at orig_weight=1.0"):
        params = SearchParams(orig_weight=1.0)
        # bundled fixture, both retrieval models
        idx = mini["index"]
        for model, base_fn in (("bm25", bm25_search), ("ql", ql_search)):
            for topic in mini["topics"].values():
                expanded = search_rm3(idx, topic, model, params)
                query = WeightedQuery.from_text(topic.title, idx.stopwords).normalized()
                base = base_fn(idx, query, params)
                assert [d for d, _ in expanded] == [d for d, _ in base]
                assert all(abs(a - b) <= 1e-9 for (_, a), (_, b) in zip(expanded, base))
        # random corpora
        rng = np.random.default_rng(5150)
        for _ in range(5):
            docs = oracle.random_corpus(rng, 60, 20)
            ridx = build_index(docs)
            topic = Topic("q", "t0 t1 t2")
            for model, base_fn in (("bm25", bm25_search), ("ql", ql_search)):
                expanded = search_rm3(ridx, topic, model, params)
                query = WeightedQuery.from_text(topic.title, NO_STOP).normalized()
                base = base_fn(ridx, query, params)
                assert [d for d, _ in expanded] == [d for d, _ in base]
                assert all(abs(a - b) <= 1e-9 for (_, a), (_, b) in zip(expanded, base))


def test_metric_oracles():
    """AP and P@k match brute force to 1e-12; hand-derived cases reproduce."""
    with criterion("AP/P@k metric oracles"):
        ap1 = average_precision(["D1", "D2", "D3"], {"D1", "D3"})
        assert abs(ap1 - (1.0 + 2.0 / 3.0) / 2.0) <= 1e-12
        ap2 = average_precision(["D1", "D2", "D3", "D4", "D5"], {"D1", "D3", "D9"})
        assert abs(ap2 - (1.0 + 2.0 / 3.0) / 3.0) <= 1e-12

        rng = np.random.default_rng(77)
        for _ in range(100):
            n_docs = int(rng.integers(1, 1001))
            universe = [f"D{i}" for i in range(n_docs)]
            perm = rng.permutation(n_docs)
            n_ranked = int(rng.integers(0, n_docs + 1))
            ranked = [universe[i] for i in perm[:n_ranked]]
            relevant = {d for d in universe if rng.random() < 0.15}
            depth = int(rng.integers(1, 1200))
            k = int(rng.integers(1, 100))
            if relevant:
                mine = average_precision(ranked, relevant, depth)
                ref = oracle.brute_average_precision(ranked, relevant, depth)
                assert abs(mine - ref) <= 1e-12
            assert abs(
                precision_at_k(ranked, relevant, k) - oracle.brute_precision_at_k(ranked, relevant, k)
            ) <= 1e-12


def test_aggregation_identities(mini):
    """a=1 keeps the baseline order; a=0,n=1 ranks by best sentence; 0.92 case."""
    with criterion("aggregation identities"):
        got = aggregate(AggregationParams(2, 0.3, (1.0, 0.5)), 0.5, [0.9, 0.4])
        assert abs(got - 0.92) <= 1e-12

        idx = mini["index"]
        scorer = LexicalScorer(idx)
        docs = DocStore(mini["raw"], limit=16)
        for topic_id, candidates in mini["baseline"].items():
            topic = mini["topics"][topic_id]
            identity = rerank_topic(topic, candidates, docs, scorer, AggregationParams(1, 1.0, (1.0,)))
            assert [r.doc_id for r in identity] == [sd.doc_id for sd in candidates]

            best_sent = rerank_topic(topic, candidates, docs, scorer, AggregationParams(1, 0.0, (1.0,)))
            tops = {
                r.doc_id: (r.sentence_scores[0] if r.sentence_scores else 0.0) for r in best_sent
            }
            expected = sorted(tops, key=lambda d: (-tops[d], d))
            assert [r.doc_id for r in best_sent] == expected


def test_grid_and_tuning(mini):
    """Grid cardinalities; 4S neighborhoods; winners match exhaustive oracle."""
    with criterion("grid cardinalities and tuned winners"):
        start = time.perf_counter()
        assert len(make_grid(1)) == 11
        assert len(make_grid(2)) == 121
        assert len(make_grid(3)) == 1331
        assert len(extend_grid_4s(AggregationParams(3, 0.5, (1.0, 0.5, 0.5)))) == 297
        assert len(extend_grid_4s(AggregationParams(3, 0.0, (1.0, 0.0, 0.0)))) == 88

        # populate the sentence-score cache through the real rerank path
        idx = mini["index"]
        scorer = LexicalScorer(idx)
        docs = DocStore(mini["raw"], limit=16)
        cache = SentenceScoreCache()
        params = AggregationParams(1, 0.5, (1.0,))
        for topic_id, candidates in mini["baseline"].items():
            rerank_topic(mini["topics"][topic_id], candidates, docs, scorer, params, cache)

        evaluator = CachedRerankEvaluator(mini["baseline"], cache, mini["qrels"])
        result = grid_search(mini["folds"], 3, evaluator)
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, f"tuning took {elapsed:.1f}s"

        raw_candidates = {
            t: [(sd.doc_id, sd.score) for sd in cands] for t, cands in mini["baseline"].items()
        }
        raw_scores = {key: list(v) for key, v in cache._scores.items()}
        relevant = {t: mini["qrels"].relevant(t) for t in raw_candidates}
        for fr in result.per_fold:
            train = mini["folds"].training_topics(fr.fold_index)
            ref_params, ref_ap = oracle.grid_argmax_3s(raw_candidates, raw_scores, relevant, train)
            assert (fr.params.a, fr.params.w[1], fr.params.w[2]) == ref_params
            assert abs(fr.training_ap - ref_ap) <= 1e-12


def test_t_test_criterion():
    """Worked p-value within 1e-3; antisymmetry and degeneracy on 1000 samples."""
    with criterion("paired t-test"):
        result = paired_t_test([0.2, 0.3, 0.4], [0.1, 0.1, 0.2])
        assert abs(result.t - 5.0) <= 1e-9
        closed_form_p = 2.0 * (1.0 - (0.5 + 5.0 / (2.0 * math.sqrt(2.0 + 25.0))))
        assert abs(result.p - closed_form_p) <= 1e-3
        assert abs(result.p - 0.0377) <= 1e-3

        rng = np.random.default_rng(31415)
        for _ in range(1000):
            n = int(rng.integers(2, 12))
            x = [float(v) for v in rng.uniform(0, 1, n)]
            y = [float(v) for v in rng.uniform(0, 1, n)]
            fwd = paired_t_test(x, y)
            rev = paired_t_test(y, x)
            assert abs(fwd.t + rev.t) <= 1e-9 or (math.isinf(fwd.t) and math.isinf(rev.t))
            assert abs(fwd.p - rev.p) <= 1e-9
            same = paired_t_test(x, x)
            assert same.degenerate and same.t == 0.0 and same.p == 1.0


def test_end_to_end_determinism(tmp_path, mini_paths):
    """Two consecutive full pipeline runs yield byte-identical artifacts."""
    with criterion("end-to-end determinism"):
        out = tmp_path / "out"
        out.mkdir()
        cfg = {
            "corpus": str(mini_paths["corpus"]),
            "topics": str(mini_paths["topics"]),
            "qrels": str(mini_paths["qrels"]),
            "folds": str(mini_paths["folds"]),
            "index": str(out / "index.json"),
            "cache": str(out / "cache.txt"),
            "baseline_run": str(out / "baseline.run"),
            "reranked_run": str(out / "sentrank.run"),
            "cv_run": str(out / "cv.run"),
            "tune_report": str(out / "tune.json"),
            "eval_report": str(out / "eval.json"),
            "model": "ql",
            "aggregation": {"n": 2, "a": 0.6, "w": [1.0, 0.5]},
            "scorer": "lexical",
            "tune_n": 3,
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(cfg))
        artifacts = ["index.json", "baseline.run", "sentrank.run", "cache.txt",
                     "cv.run", "tune.json", "eval.json"]
        digests = []
        for _ in range(2):
            for stale in out.iterdir():
                stale.unlink()
            for command in ("index", "search", "rerank", "tune"):
                assert main([command, "--config", str(cfg_path)]) == 0
            assert main(["eval", "--config", str(cfg_path),
                         str(out / "baseline.run"), str(out / "cv.run")]) == 0
            digests.append(
                {a: hashlib.sha256((out / a).read_bytes()).hexdigest() for a in artifacts}
            )
        assert digests[0] == digests[1]


def test_corpus_invariants():
    """Segmentation round-trip and chunk-limit hold on 1000 random documents."""
    with criterion("corpus invariants"):
        rng = np.random.default_rng(8080)
        words = ["alpha", "Beta", "gamma.", "Delta!", "eps?", "ZETA", "42", '"q"',
                 "<tag>", "</tag>", "x<y", "a>b", "Mr.", "no"]
        for i in range(1000):
            raw_text = " ".join(words[int(k)] for k in rng.integers(0, len(words), int(rng.integers(0, 80))))
            doc = cmod.clean(RawDocument(f"D{i}", raw_text))
            sentences = cmod.segment(doc.text)
            assert normalize_ws(" ".join(sentences)) == doc.text
            limit = int(rng.integers(1, 9))
            chunked = build_sentences(doc.doc_id, doc.text, limit)
            assert all(s.token_count <= limit for s in chunked)
            assert all(s.token_count == len(s.text.split()) >= 1 for s in chunked)
            assert [s.index for s in chunked] == list(range(len(chunked)))
            original_tokens = [tok for s in sentences for tok in s.split()]
            chunk_tokens = [tok for s in chunked for tok in s.text.split()]
            assert chunk_tokens == original_tokens
