"""Generate the bundled desk-scale fixture: ~200 documents, 10 topics,
qrels, folds, and a ready-to-run pipeline config.

The output is deterministic (fixed seed) and committed to the repository;
rerun this script only to regenerate the fixture from scratch.  Generation
fails loudly if the fixture would be degenerate for the pipeline: every
topic must retrieve candidates under both retrieval models, every topic
needs relevant judgments, and baseline rankings must survive the run
file's six-decimal score rounding without reordering.
"""

import json
import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
OUT = REPO / "data" / "mini"

TOPICS = {
    "T01": ("solar panel efficiency", ["solar", "panel", "efficiency", "photovoltaic", "inverter", "silicon", "rooftop", "sunlight"]),
    "T02": ("deep sea mining", ["seabed", "mining", "nodules", "trench", "submersible", "sediment", "cobalt", "abyss"]),
    "T03": ("ancient roman roads", ["roman", "roads", "legion", "paving", "milestones", "empire", "cobblestone", "aqueduct"]),
    "T04": ("wildfire smoke health", ["wildfire", "smoke", "respiratory", "particulate", "evacuation", "haze", "asthma", "blaze"]),
    "T05": ("electric vehicle batteries", ["battery", "electric", "vehicle", "lithium", "charging", "cathode", "range", "motor"]),
    "T06": ("coral reef bleaching", ["coral", "reef", "bleaching", "algae", "ocean", "warming", "polyps", "lagoon"]),
    "T07": ("wheat crop disease", ["wheat", "crop", "fungus", "rust", "harvest", "blight", "grain", "spores"]),
    "T08": ("glacier melt rivers", ["glacier", "melt", "runoff", "icefield", "moraine", "downstream", "thaw", "basin"]),
    "T09": ("urban noise pollution", ["noise", "traffic", "decibel", "insulation", "nighttime", "honking", "ordinance", "quiet"]),
    "T10": ("asteroid mining robots", ["asteroid", "robots", "regolith", "drill", "orbit", "spacecraft", "autonomous", "payload"]),
}

BACKGROUND = (
    "report year study group people city market water land price member "
    "record season local national figure question answer plan story night "
    "morning office music garden bridge window teacher doctor letter paper "
    "mountain valley harbor train street router kitchen museum festival "
    "library cloud winter summer autumn spring coffee dinner travel money "
    "engine signal number system model result effect cause change matter"
).split()

PUNCTUATION = [".", ".", ".", "!", "?"]


def make_sentence(rng, words, length=None):
    length = length or rng.randint(4, 14)
    picked = [rng.choice(words) for _ in range(length)]
    text = " ".join(picked)
    return text[0].upper() + text[1:] + rng.choice(PUNCTUATION)


def make_document(rng, doc_num, kind, topic_ids):
    """kind: 'relevant'/'partial' draw from the listed topics, 'background' none."""
    doc_id = f"MINI-{doc_num:04d}"
    vocab = list(BACKGROUND)
    emphasis = []
    for topic_id in topic_ids:
        title, related = TOPICS[topic_id]
        title_words = title.split()
        if kind == "relevant":
            emphasis += title_words * 2 + related
        elif kind == "partial":
            emphasis += title_words + related * 2
    if kind == "background":
        # stray topical mentions keep candidate pools realistically noisy
        all_topical = [w for title, related in TOPICS.values() for w in title.split() + related]
        emphasis += [rng.choice(all_topical) for _ in range(rng.randint(2, 6))]
    vocab = vocab + emphasis

    n_sentences = rng.randint(2, 9)
    sentences = [make_sentence(rng, vocab) for _ in range(n_sentences)]
    if kind == "relevant":
        # make sure the title terms appear in at least one sentence
        title = TOPICS[topic_ids[0]][0]
        lead = make_sentence(
            rng, title.split() + TOPICS[topic_ids[0]][1] + BACKGROUND[:20], rng.randint(6, 12)
        )
        sentences.insert(0, lead)

    body = []
    if rng.random() < 0.5:
        body.append(f"<HEADLINE>{sentences[0]}</HEADLINE>")
    paragraphs = []
    for s in sentences:
        paragraphs.append(f"<P>{s}</P>" if rng.random() < 0.4 else s)
    body.append("<TEXT>" + "\n".join(paragraphs) + "</TEXT>")
    return doc_id, "\n".join(body)


SEED = 202305


def build_docs(rng):
    docs = []
    qrels = {tid: {} for tid in TOPICS}
    doc_num = 1

    # 12 clearly relevant + 4 partially on-topic documents per topic
    for topic_id in TOPICS:
        for _ in range(12):
            doc_id, raw = make_document(rng, doc_num, "relevant", [topic_id])
            docs.append((doc_id, raw))
            qrels[topic_id][doc_id] = rng.choice([1, 1, 2])
            doc_num += 1
        for _ in range(4):
            doc_id, raw = make_document(rng, doc_num, "partial", [topic_id])
            docs.append((doc_id, raw))
            qrels[topic_id][doc_id] = rng.choice([0, 0, 1])
            doc_num += 1

    # cross-topic documents: relevant to one topic, mentioning another
    pairs = [("T01", "T05"), ("T02", "T10"), ("T04", "T06"), ("T07", "T08"), ("T03", "T09")]
    for a, b in pairs:
        for _ in range(2):
            doc_id, raw = make_document(rng, doc_num, "relevant", [a, b])
            docs.append((doc_id, raw))
            qrels[a][doc_id] = 1
            qrels[b][doc_id] = rng.choice([0, 1])
            doc_num += 1

    # pure background noise
    while doc_num <= 196:
        doc_id, raw = make_document(rng, doc_num, "background", [])
        docs.append((doc_id, raw))
        doc_num += 1

    # edge cases: markup-only (empty after cleaning) and one run-on sentence
    docs.append((f"MINI-{doc_num:04d}", "<TEXT><P></P></TEXT>"))
    doc_num += 1
    docs.append((f"MINI-{doc_num:04d}", "<DATE>\n</DATE>\n<TEXT>  </TEXT>"))
    doc_num += 1
    runon_words = [rng.choice(BACKGROUND + TOPICS["T01"][1]) for _ in range(300)]
    runon = runon_words[0].capitalize() + " " + " ".join(runon_words[1:])
    docs.append((f"MINI-{doc_num:04d}", f"<TEXT>{runon}</TEXT>"))
    qrels["T01"][f"MINI-{doc_num:04d}"] = 1
    doc_num += 1
    docs.append((f"MINI-{doc_num:04d}", "<TEXT>Rooftop solar panel efficiency riddle.</TEXT>"))
    qrels["T01"][f"MINI-{doc_num:04d}"] = 1

    rng.shuffle(docs)
    return docs, qrels


def main():
    rng = random.Random(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    docs, qrels = build_docs(rng)

    corpus_text = "".join(
        f"<DOC>\n<DOCNO> {doc_id} </DOCNO>\n{raw}\n</DOC>\n" for doc_id, raw in docs
    )
    topics_text = "".join(
        f"<top>\n<num> Number: {tid} </num>\n<title> {title} </title>\n</top>\n"
        for tid, (title, _) in TOPICS.items()
    )
    qrels_lines = []
    for tid in sorted(qrels):
        for doc_id in sorted(qrels[tid]):
            qrels_lines.append(f"{tid} 0 {doc_id} {qrels[tid][doc_id]}")
    qrels_text = "\n".join(qrels_lines) + "\n"

    folds = [["T01", "T03", "T05", "T07", "T09"], ["T02", "T04", "T06", "T08", "T10"]]

    config = {
        "corpus": "data/mini/corpus.sgml",
        "topics": "data/mini/topics.sgml",
        "qrels": "data/mini/qrels.txt",
        "folds": "data/mini/folds.json",
        "index": "out/mini/index.json",
        "cache": "out/mini/sentence_scores.txt",
        "baseline_run": "out/mini/baseline.run",
        "reranked_run": "out/mini/sentrank.run",
        "cv_run": "out/mini/sentrank-cv.run",
        "tune_report": "out/mini/tune.json",
        "eval_report": "out/mini/eval.json",
        "model": "ql",
        "search": {"k1": 0.9, "b": 0.4, "mu": 1000.0, "depth": 1000,
                   "fb_docs": 10, "fb_terms": 10, "orig_weight": 0.5},
        "aggregation": {"n": 2, "a": 0.6, "w": [1.0, 0.5]},
        "scorer": "lexical",
        "chunk_limit": 16,
        "metric_ks": [20, 30],
        "tune_n": 3,
    }

    (OUT / "corpus.sgml").write_text(corpus_text, encoding="utf-8")
    (OUT / "topics.sgml").write_text(topics_text, encoding="utf-8")
    (OUT / "qrels.txt").write_text(qrels_text, encoding="utf-8")
    (OUT / "folds.json").write_text(json.dumps(folds) + "\n", encoding="utf-8")
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")

    verify()


def verify():
    sys.path.insert(0, str(REPO / "src"))
    from sentrank import corpus as cmod
    from sentrank import index as imod
    from sentrank.evaluate import parse_qrels, average_precision
    from sentrank.index import SearchParams

    raw_docs = cmod.parse_trec_collection((OUT / "corpus.sgml").read_bytes())
    assert len(raw_docs) == 200, len(raw_docs)
    topics = cmod.parse_topics((OUT / "topics.sgml").read_bytes())
    assert len(topics) == 10
    qrels = parse_qrels((OUT / "qrels.txt").read_text())

    cleaned = [cmod.clean(r) for r in raw_docs]
    empty = [d.doc_id for d in cleaned if not d.text]
    assert len(empty) == 2, empty
    idx = imod.build(cleaned)
    params = SearchParams()

    for model in ("bm25", "ql"):
        aps = []
        for topic in topics:
            res = imod.search_rm3(idx, topic, model, params)
            assert len(res) >= 30, (model, topic.topic_id, len(res))
            # six-decimal rounding in run files must not reorder the ranking:
            # within a run of equal formatted scores doc_ids must already ascend
            for above, below in zip(res, res[1:]):
                if f"{above.score:.6f}" == f"{below.score:.6f}":
                    assert above.doc_id < below.doc_id, (model, topic.topic_id, above, below)
            relevant = qrels.relevant(topic.topic_id)
            assert relevant
            aps.append(average_precision([sd.doc_id for sd in res], relevant, 1000))
        mean_ap = sum(aps) / len(aps)
        assert 0.05 < mean_ap < 0.95, (model, mean_ap)
        print(f"{model}: mean AP {mean_ap:.4f} over {len(aps)} topics")
    print(f"fixture ok: {len(raw_docs)} docs, {len(topics)} topics")


def scan_seeds(start, count):
    """Find seeds whose fixture passes verification (writes files each try)."""
    global SEED
    for seed in range(start, start + count):
        SEED = seed
        try:
            main()
        except AssertionError as exc:
            print(f"seed {seed}: rejected ({exc})")
            continue
        print(f"seed {seed}: OK")
        return seed
    raise SystemExit("no usable seed found")


if __name__ == "__main__":
    if len(sys.argv) > 1 and sys.argv[1] == "--scan":
        scan_seeds(int(sys.argv[2]), int(sys.argv[3]))
    else:
        main()
