"""The worker process: handshake, then one JSON response line per request.

Protocol sentence-scorer/1 over stdin/stdout (UTF-8, one object per line):

  handshake (first stdout line):
      {"protocol":"sentence-scorer/1","name":<str>,"max_tokens":<int>}
  request:   {"id":<int>,"query":<str>,"text":<str>}
  response:  {"id":<int>,"score":<float>}  or  {"id":<int>,"error":<str>}

Responses are emitted in request order.  A malformed request line produces
an error response (id -1 when the id is unrecoverable) and the loop
continues.  When stdin closes the worker exits 0.  In model mode a load
failure exits nonzero before the handshake.  Stdout carries nothing but
protocol lines; diagnostics go to stderr.

Stub mode needs no model assets and scores unit-idf lexical overlap: the
fraction of unique lowercase alphanumeric query tokens that appear in the
text, rounded to six decimals.
"""

from __future__ import annotations

import argparse
import json
import re
import sys

PROTOCOL = "sentence-scorer/1"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def stub_score(query: str, text: str) -> float:
    q = set(_TOKEN_RE.findall(query.lower()))
    if not q:
        return 0.0
    t = set(_TOKEN_RE.findall(text.lower()))
    return round(len(q & t) / len(q), 6)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, separators=(",", ":"), ensure_ascii=False) + "\n")
    sys.stdout.flush()


def _parse_request(line: str):
    """Returns (id, query, text); raises ValueError with a best-effort id."""
    rid = -1
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        raise ValueError(rid, "request is not valid JSON") from None
    if isinstance(obj, dict) and isinstance(obj.get("id"), int) and not isinstance(obj.get("id"), bool):
        rid = obj["id"]
    else:
        raise ValueError(rid, "request has no integer id")
    query = obj.get("query")
    text = obj.get("text")
    if not isinstance(query, str) or not isinstance(text, str):
        raise ValueError(rid, "request needs string query and text")
    return rid, query, text


def serve(score_fn) -> int:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            rid, query, text = _parse_request(line)
        except ValueError as exc:
            rid, message = exc.args
            _emit({"id": rid, "error": message})
            continue
        try:
            score = score_fn(query, text)
        except Exception as exc:  # scoring must not kill the session
            _emit({"id": rid, "error": f"scoring failed: {exc}"})
            continue
        _emit({"id": rid, "score": score})
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="scorer-worker", description=__doc__.splitlines()[0])
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--stub", action="store_true", help="deterministic lexical-overlap mode")
    mode.add_argument("--model", help="Hugging Face model id or local checkpoint path")
    parser.add_argument("--max-tokens", type=int, default=256,
                        help="whitespace-token budget advertised to the host")
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)
    if args.max_tokens < 8:
        parser.error(f"--max-tokens must be >= 8, got {args.max_tokens}")

    if args.stub:
        name = "scorer-worker-stub"
        score_fn = stub_score
    else:
        try:
            from .model import CrossEncoder

            encoder = CrossEncoder(args.model, device=args.device)
        except Exception as exc:
            print(f"scorer-worker: cannot load model {args.model!r}: {exc}", file=sys.stderr)
            return 2
        name = "scorer-worker-model"
        score_fn = encoder.score_pair

    _emit({"protocol": PROTOCOL, "name": name, "max_tokens": args.max_tokens})
    return serve(score_fn)


if __name__ == "__main__":
    sys.exit(main())
