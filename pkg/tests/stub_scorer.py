"""Minimal scorer process for protocol tests.

Default mode scores unit-idf lexical overlap: unique lowercase alphanumeric
query tokens found in the text, over the number of unique query tokens,
rounded to six decimals.  Misbehaving modes exercise the host's error
handling.
"""

import argparse
import json
import re
import sys

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def overlap_score(query: str, text: str) -> float:
    q = set(_TOKEN_RE.findall(query.lower()))
    if not q:
        return 0.0
    t = set(_TOKEN_RE.findall(text.lower()))
    return round(len(q & t) / len(q), 6)


def emit(obj):
    sys.stdout.write(json.dumps(obj, separators=(",", ":"), ensure_ascii=False) + "\n")
    sys.stdout.flush()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", default="normal",
                    choices=["normal", "shuffle", "bad-handshake", "empty-handshake",
                             "invalid-score", "silent", "error-response", "extra-output",
                             "unknown-id", "garbage", "exit-early"])
    ap.add_argument("--max-tokens", type=int, default=64)
    ap.add_argument("--batch", type=int, default=3, help="shuffle batch size")
    args = ap.parse_args()

    if args.mode == "bad-handshake":
        print("{}", flush=True)
        return 0
    if args.mode == "empty-handshake":
        return 0
    emit({"protocol": "sentence-scorer/1", "name": f"stub-{args.mode}", "max_tokens": args.max_tokens})
    if args.mode == "exit-early":
        return 0

    pending = []
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        rid = req["id"]
        if args.mode == "silent":
            continue
        if args.mode == "invalid-score":
            emit({"id": rid, "score": 1.5})
            continue
        if args.mode == "error-response":
            emit({"id": rid, "error": "refusing to score"})
            continue
        if args.mode == "unknown-id":
            emit({"id": rid + 10_000, "score": 0.5})
            continue
        if args.mode == "garbage":
            sys.stdout.write("not json at all\n")
            sys.stdout.flush()
            continue
        score = overlap_score(req["query"], req["text"])
        if args.mode == "shuffle":
            pending.append({"id": rid, "score": score})
            if len(pending) >= args.batch:
                for obj in reversed(pending):
                    emit(obj)
                pending = []
            continue
        emit({"id": rid, "score": score})
        if args.mode == "extra-output":
            sys.stdout.write("chatter\n")
            sys.stdout.flush()

    for obj in reversed(pending):
        emit(obj)
    return 0


if __name__ == "__main__":
    sys.exit(main())
