"""Command-line pipeline driver.

Commands: index, search, rerank, tune, eval, scorer-check.
Configuration comes from one JSON file; repeated --set KEY=VALUE flags
override it (dotted keys reach into nested sections, values parse as JSON
when possible).  The effective configuration is echoed into every report.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 scorer
protocol error.  Outputs are written to a temp file and renamed, so a
failing command never leaves a partial artifact behind.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

from . import corpus, evaluate
from . import index as index_mod
from .errors import ConfigError, DataError, ParseError, ScorerError
from .index import ScoredDoc, SearchParams
from .rerank import AggregationParams, DocStore, SentenceScoreCache, rerank_topic
from .scorer import LexicalScorer, spawn_scorer
from .tune import CachedRerankEvaluator, FoldSpec, grid_search

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_SCORER = 3

_DEFAULTS = {
    "corpus": None,
    "topics": None,
    "qrels": None,
    "folds": None,
    "index": None,
    "cache": None,
    "baseline_run": None,
    "reranked_run": None,
    "cv_run": None,
    "tune_report": None,
    "eval_report": None,
    "model": "bm25",
    "search": {
        "k1": 0.9,
        "b": 0.4,
        "mu": 1000.0,
        "depth": 1000,
        "fb_docs": 10,
        "fb_terms": 10,
        "orig_weight": 0.5,
    },
    "aggregation": {"n": 1, "a": 0.5, "w": [1.0]},
    "scorer": "lexical",
    "scorer_timeout": 60.0,
    "scorer_window": 32,
    "chunk_limit": 256,
    "metric_ks": [20, 30],
    "tune_n": 3,
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_override(cfg: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            raise ConfigError(f"unknown config section {part!r} in --set {item!r}")
        node = nxt
    node[parts[-1]] = value


def load_config(path: str, overrides: list[str]) -> dict:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    unknown = sorted(set(data) - set(_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    cfg = _deep_merge(_DEFAULTS, data)
    for item in overrides:
        _apply_override(cfg, item)
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        raise ConfigError(f"config keys required for this command: {missing}")


def _require_readable(cfg: dict, *keys: str) -> None:
    _require(cfg, *keys)
    for k in keys:
        if not Path(cfg[k]).is_file():
            raise ConfigError(f"config key {k!r} points to a missing file: {cfg[k]}")


def _out_path(cfg: dict, key: str) -> Path:
    _require(cfg, key)
    return Path(cfg[key])


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _search_params(cfg: dict) -> SearchParams:
    try:
        return SearchParams(**cfg["search"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad search params: {exc}") from None


def _agg_params(cfg: dict) -> AggregationParams:
    value = cfg["aggregation"]
    if value == "tune":
        raise ConfigError("aggregation is 'tune'; run the tune command or set fixed params")
    try:
        return AggregationParams.from_jsonable(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad aggregation params: {exc}") from None


def _model(cfg: dict) -> str:
    model = cfg["model"]
    if model not in ("bm25", "ql"):
        raise ConfigError(f"model must be 'bm25' or 'ql', got {model!r}")
    return model


def _metric_ks(cfg: dict) -> list[int]:
    ks = cfg["metric_ks"]
    if not isinstance(ks, list) or not ks or not all(isinstance(k, int) and k >= 1 for k in ks):
        raise ConfigError(f"metric_ks must be a list of positive ints, got {ks!r}")
    return ks


def _print_report(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, indent=2))


def _load_topics(cfg: dict) -> list[corpus.Topic]:
    with open(cfg["topics"], "rb") as fh:
        return corpus.parse_topics(fh)


def _run_candidates(run: evaluate.Run) -> dict[str, list[ScoredDoc]]:
    return {
        topic_id: [ScoredDoc(e.doc_id, e.score) for e in entries]
        for topic_id, entries in run.entries.items()
    }


def cmd_index(cfg: dict) -> int:
    _require_readable(cfg, "corpus")
    out = _out_path(cfg, "index")
    raw = corpus.load_collection(cfg["corpus"])
    docs = [corpus.clean(r) for r in raw]
    idx = index_mod.build(docs)
    _atomic_write(out, index_mod.dumps(idx))
    _print_report(
        {
            "command": "index",
            "docs": idx.doc_count,
            "total_tokens": idx.total_collection_tokens,
            "vocabulary": idx.vocabulary_size(),
            "index": str(out),
            "config": cfg,
        }
    )
    return EXIT_OK


def cmd_search(cfg: dict) -> int:
    _require_readable(cfg, "index", "topics")
    out = _out_path(cfg, "baseline_run")
    idx = index_mod.load(cfg["index"])
    topics = _load_topics(cfg)
    params = _search_params(cfg)
    model = _model(cfg)
    results: dict[str, list[ScoredDoc]] = {}
    omitted: list[str] = []
    for topic in topics:
        ranked = index_mod.search_rm3(idx, topic, model, params)
        if not ranked:
            print(f"warning: topic {topic.topic_id} matches no indexed terms; omitted", file=sys.stderr)
            omitted.append(topic.topic_id)
            continue
        results[topic.topic_id] = ranked
    run = evaluate.run_from_results(results, tag="baseline")
    _atomic_write(out, evaluate.write_run(run))
    _print_report(
        {
            "command": "search",
            "model": model,
            "topics": len(results),
            "omitted_topics": omitted,
            "run": str(out),
            "config": cfg,
        }
    )
    return EXIT_OK


def _make_scorer(cfg: dict):
    spec = cfg["scorer"]
    if spec == "lexical":
        _require_readable(cfg, "index")
        return LexicalScorer(index_mod.load(cfg["index"]))
    if isinstance(spec, list) and spec and all(isinstance(s, str) for s in spec):
        return spawn_scorer(spec, timeout=float(cfg["scorer_timeout"]), window=int(cfg["scorer_window"]))
    raise ConfigError(f"scorer must be 'lexical' or a command list, got {spec!r}")


def cmd_rerank(cfg: dict) -> int:
    _require_readable(cfg, "baseline_run", "topics")
    _require(cfg, "cache")
    out = _out_path(cfg, "reranked_run")
    cache_path = Path(cfg["cache"])
    agg = _agg_params(cfg)
    run = evaluate.parse_run(Path(cfg["baseline_run"]).read_text(encoding="utf-8"))
    topics = {t.topic_id: t for t in _load_topics(cfg)}
    cache = SentenceScoreCache.load(cache_path) if cache_path.is_file() else SentenceScoreCache()
    candidates = _run_candidates(run)

    fully_cached = all(
        cache.covers(topic_id, [sd.doc_id for sd in cands])
        for topic_id, cands in candidates.items()
    )
    scorer = None
    docs = None
    if not fully_cached:
        scorer = _make_scorer(cfg)
        _require_readable(cfg, "corpus")
        limit = min(int(cfg["chunk_limit"]), scorer.max_tokens)
        docs = DocStore(corpus.load_collection(cfg["corpus"]), limit=limit)
    try:
        results: dict[str, list[tuple[str, float]]] = {}
        for topic_id in sorted(candidates):
            topic = topics.get(topic_id)
            if topic is None:
                raise DataError(f"run topic {topic_id} is missing from the topics file")
            reranked = rerank_topic(topic, candidates[topic_id], docs, scorer, agg, cache)
            results[topic_id] = [(r.doc_id, r.final_score) for r in reranked]
    finally:
        if scorer is not None:
            scorer.close()
    _atomic_write(out, evaluate.write_run(evaluate.run_from_results(results, tag="sentrank")))
    _atomic_write(cache_path, cache.dump())
    _print_report(
        {
            "command": "rerank",
            "topics": len(results),
            "scorer_used": not fully_cached,
            "run": str(out),
            "cache": str(cache_path),
            "config": cfg,
        }
    )
    return EXIT_OK


def cmd_tune(cfg: dict) -> int:
    _require_readable(cfg, "baseline_run", "cache", "folds", "qrels")
    report_out = _out_path(cfg, "tune_report")
    cv_out = _out_path(cfg, "cv_run")
    run = evaluate.parse_run(Path(cfg["baseline_run"]).read_text(encoding="utf-8"))
    qrels = evaluate.parse_qrels(Path(cfg["qrels"]).read_text(encoding="utf-8"))
    folds = FoldSpec.load(cfg["folds"])
    cache = SentenceScoreCache.load(cfg["cache"])

    run_topics = set(run.entries)
    fold_topics = folds.all_topics()
    if run_topics != fold_topics:
        raise DataError(
            "folds do not cover the run topics exactly; "
            f"missing from folds: {sorted(run_topics - fold_topics)}, "
            f"not in run: {sorted(fold_topics - run_topics)}"
        )

    depth = _search_params(cfg).depth
    evaluator = CachedRerankEvaluator(_run_candidates(run), cache, qrels, depth=depth)
    n = int(cfg["tune_n"])
    result = grid_search(folds, n, evaluator)

    merged: dict[str, list[ScoredDoc]] = {}
    for fr in result.per_fold:
        for topic_id in sorted(folds.folds[fr.fold_index]):
            merged[topic_id] = evaluator.rank(topic_id, fr.params)
    _atomic_write(cv_out, evaluate.write_run(evaluate.run_from_results(merged, tag="sentrank-cv")))

    payload = {
        "command": "tune",
        "n": n,
        **result.to_jsonable(),
        "cv_run": str(cv_out),
        "skipped_topics": evaluator.skipped,
        "config": cfg,
    }
    _atomic_write(report_out, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    _print_report(payload)
    return EXIT_OK


def _jsonable_t(value: float):
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def cmd_eval(cfg: dict, run_a: str, run_b: str | None) -> int:
    _require_readable(cfg, "qrels")
    for path in (run_a, run_b) if run_b else (run_a,):
        if not Path(path).is_file():
            raise ConfigError(f"run file not found: {path}")
    qrels = evaluate.parse_qrels(Path(cfg["qrels"]).read_text(encoding="utf-8"))
    ks = _metric_ks(cfg)
    depth = _search_params(cfg).depth

    parsed_a = evaluate.parse_run(Path(run_a).read_text(encoding="utf-8"))
    report_a = evaluate.evaluate_run(parsed_a, qrels, ks=ks, depth=depth)
    for topic_id in report_a.skipped:
        print(f"warning: topic {topic_id} has no relevant judgments; excluded", file=sys.stderr)
    payload: dict = {
        "command": "eval",
        "run_a": {"path": run_a, **report_a.to_jsonable()},
        "config": cfg,
    }
    print(f"== {run_a}")
    print(report_a.to_table())

    if run_b:
        parsed_b = evaluate.parse_run(Path(run_b).read_text(encoding="utf-8"))
        if set(parsed_a.entries) != set(parsed_b.entries):
            only_a = sorted(set(parsed_a.entries) - set(parsed_b.entries))
            only_b = sorted(set(parsed_b.entries) - set(parsed_a.entries))
            raise DataError(f"run topic sets differ; only in A: {only_a}, only in B: {only_b}")
        report_b = evaluate.evaluate_run(parsed_b, qrels, ks=ks, depth=depth)
        common = sorted(t for t in report_a.per_topic if t in report_b.per_topic)
        ttest = evaluate.paired_t_test(
            [report_a.per_topic[t]["ap"] for t in common],
            [report_b.per_topic[t]["ap"] for t in common],
        )
        payload["run_b"] = {"path": run_b, **report_b.to_jsonable()}
        payload["paired_t_test"] = {
            "metric": "ap",
            "t": _jsonable_t(ttest.t),
            "p": ttest.p,
            "n": ttest.n,
            "degenerate": ttest.degenerate,
        }
        print(f"== {run_b}")
        print(report_b.to_table())
        print(f"paired t-test on AP: t={ttest.t:.4f} p={ttest.p:.6g} n={ttest.n}")

    if cfg.get("eval_report"):
        _atomic_write(Path(cfg["eval_report"]), json.dumps(payload, sort_keys=True, indent=2) + "\n")
    _print_report(payload)
    return EXIT_OK


def _default_golden() -> str:
    return resources.files("sentrank.data").joinpath("scorer_check_requests.jsonl").read_text("utf-8")


def cmd_scorer_check(command: list[str], golden: str | None, expect: str | None, timeout: float) -> int:
    request_text = Path(golden).read_text(encoding="utf-8") if golden else _default_golden()
    request_lines = [ln for ln in request_text.splitlines() if ln.strip()]
    ids = []
    for ln in request_lines:
        try:
            obj = json.loads(ln)
            ids.append(int(obj["id"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ConfigError(f"bad golden request line: {ln!r}") from None

    session = spawn_scorer(command, timeout=timeout)
    responses: list[str] = []
    try:
        for ln in request_lines:
            session.send_line(ln)
        # a conforming scorer may buffer until the request stream closes
        session.close_requests()
        outstanding = set(ids)
        for _ in ids:
            raw = session.read_line()
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError:
                raise ScorerError(f"malformed response line {raw!r}") from None
            rid = obj.get("id") if isinstance(obj, dict) else None
            if rid not in outstanding:
                raise ScorerError(f"response with unexpected id: {raw!r}")
            if "error" in obj:
                raise ScorerError(f"scorer reported an error: {raw!r}")
            score = obj.get("score")
            if isinstance(score, bool) or not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
                raise ScorerError(f"score missing or outside [0, 1]: {raw!r}")
            outstanding.discard(rid)
            responses.append(raw)
        extra = session.remaining_output(timeout=1.0)
        rc = session.close()
        if extra:
            raise ScorerError(f"extraneous output after final response: {extra!r}")
        if rc != 0:
            raise ScorerError(f"scorer exited with status {rc} after stream close")
    except ScorerError:
        session.close()
        raise

    transcript = "\n".join(responses) + "\n"
    matches = None
    if expect:
        expected = Path(expect).read_text(encoding="utf-8")
        matches = transcript == expected
        if not matches:
            raise ScorerError(
                f"response transcript does not match {expect} "
                f"(got {len(responses)} lines)"
            )
    _print_report(
        {
            "command": "scorer-check",
            "ok": True,
            "scorer": session.name,
            "max_tokens": session.max_tokens,
            "requests": len(request_lines),
            "transcript_matches": matches,
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentrank", description="Retrieval + sentence-rerank pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (dotted keys, JSON values)")

    add_config_args(sub.add_parser("index", help="build and persist the inverted index"))
    add_config_args(sub.add_parser("search", help="write the baseline RM3 run"))
    add_config_args(sub.add_parser("rerank", help="rerank the baseline run with sentence scores"))
    add_config_args(sub.add_parser("tune", help="cross-validated grid search over aggregation params"))

    p_eval = sub.add_parser("eval", help="evaluate one run, or compare two with a paired t-test")
    add_config_args(p_eval)
    p_eval.add_argument("run_a")
    p_eval.add_argument("run_b", nargs="?")

    p_check = sub.add_parser("scorer-check", help="validate an external scorer against the protocol")
    p_check.add_argument("--golden", help="request transcript (default: bundled 10 requests)")
    p_check.add_argument("--expect", help="expected response transcript for byte comparison")
    p_check.add_argument("--timeout", type=float, default=30.0)
    p_check.add_argument("scorer_command", nargs="+", help="scorer command (prefix with -- if it takes flags)")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "scorer-check":
        return cmd_scorer_check(args.scorer_command, args.golden, args.expect, args.timeout)
    cfg = load_config(args.config, args.set)
    if args.command == "index":
        return cmd_index(cfg)
    if args.command == "search":
        return cmd_search(cfg)
    if args.command == "rerank":
        return cmd_rerank(cfg)
    if args.command == "tune":
        return cmd_tune(cfg)
    if args.command == "eval":
        return cmd_eval(cfg, args.run_a, args.run_b)
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ScorerError as exc:
        print(f"scorer error: {exc}", file=sys.stderr)
        return EXIT_SCORER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
