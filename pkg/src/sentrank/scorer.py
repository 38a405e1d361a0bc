"""Sentence relevance scorers.

Two interchangeable scorer kinds expose `max_tokens` and
`score_batch(pairs) -> list of floats in [0, 1]`:

  * LexicalScorer: deterministic in-process idf-weighted term overlap, for
    running the pipeline without a neural model.
  * ExternalScorer: a client for a scorer subprocess speaking line-delimited
    JSON on stdin/stdout.

Wire protocol ("sentence-scorer/1"), one JSON object per line, UTF-8:
  handshake (scorer -> host, first line):
      {"protocol": "sentence-scorer/1", "name": <str>, "max_tokens": <int>}
  request   (host -> scorer):  {"id": <int>, "query": <str>, "text": <str>}
  response  (scorer -> host):  {"id": <int>, "score": <float>}
                          or   {"id": <int>, "error": <str>}
Responses may arrive in any order.  The host closes its write side to end
the session; a conforming scorer then flushes and exits 0.  Anything else
on the response stream is a protocol violation; diagnostics belong on
stderr.  Out-of-range scores abort the session rather than being clamped.
"""

from __future__ import annotations

import collections
import json
import math
import queue
import subprocess
import threading
from dataclasses import dataclass
from typing import Sequence

from .errors import ScorerError
from .index import Index, tokenize

PROTOCOL = "sentence-scorer/1"
DEFAULT_TIMEOUT = 60.0
DEFAULT_WINDOW = 32
_UNLIMITED_TOKENS = 10**9


def lexical_score(query: str, text: str, index: Index) -> float:
    """Idf-weighted term overlap in [0, 1].

    sum of idf over query terms found in text / sum of idf over all query
    terms, with BM25 idf from the index and ln(1 + N) for unseen terms.
    """
    q_terms = set(tokenize(query, index.stopwords))
    if not q_terms:
        return 0.0
    t_terms = set(tokenize(text, index.stopwords))

    def idf(term: str) -> float:
        if term in index.postings:
            return index.idf(term)
        return math.log(1.0 + index.doc_count)

    denom = sum(idf(t) for t in sorted(q_terms))
    num = sum(idf(t) for t in sorted(q_terms & t_terms))
    return num / denom


class LexicalScorer:
    """In-process scorer backed by lexical_score; no token limit of its own."""

    def __init__(self, index: Index, max_tokens: int = _UNLIMITED_TOKENS):
        self.index = index
        self.name = "lexical"
        self.max_tokens = max_tokens

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [lexical_score(q, t, self.index) for q, t in pairs]

    def close(self):
        pass


@dataclass(frozen=True)
class ScorerHandshake:
    protocol: str
    name: str
    max_tokens: int

    @classmethod
    def parse(cls, line: str) -> "ScorerHandshake":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise ScorerError(f"handshake is not valid JSON: {line!r}") from None
        if not isinstance(obj, dict):
            raise ScorerError(f"handshake is not an object: {line!r}")
        protocol = obj.get("protocol")
        if protocol != PROTOCOL:
            raise ScorerError(f"unsupported scorer protocol {protocol!r} in {line!r}")
        name = obj.get("name")
        max_tokens = obj.get("max_tokens")
        if not isinstance(name, str) or not name:
            raise ScorerError(f"handshake missing scorer name: {line!r}")
        if not isinstance(max_tokens, int) or isinstance(max_tokens, bool) or max_tokens < 8:
            raise ScorerError(f"handshake max_tokens must be an int >= 8: {line!r}")
        return cls(protocol=protocol, name=name, max_tokens=max_tokens)


class ExternalScorer:
    """Session with a scorer subprocess; one owner at a time.

    Up to `window` requests are left outstanding; `timeout` bounds the wait
    for each next response while requests are pending.
    """

    def __init__(self, proc, command, timeout: float, window: int):
        self._proc = proc
        self._command = list(command)
        self._timeout = timeout
        self._window = max(1, window)
        self._next_id = 0
        self._closed = False
        self.handshake: ScorerHandshake | None = None
        self.name = ""
        self.max_tokens = 0
        self._lines: queue.Queue = ExternalScorer._attach_reader(proc.stdout)
        self._stderr_tail: collections.deque = ExternalScorer._attach_drain(proc.stderr)

    @staticmethod
    def _attach_reader(stream) -> queue.Queue:
        q: queue.Queue = queue.Queue()

        def pump():
            for line in stream:
                q.put(line)
            q.put(None)

        threading.Thread(target=pump, daemon=True).start()
        return q

    @staticmethod
    def _attach_drain(stream) -> collections.deque:
        tail: collections.deque = collections.deque(maxlen=50)

        def pump():
            for line in stream:
                tail.append(line.rstrip("\n"))

        threading.Thread(target=pump, daemon=True).start()
        return tail

    @classmethod
    def spawn(
        cls,
        command: Sequence[str],
        timeout: float = DEFAULT_TIMEOUT,
        window: int = DEFAULT_WINDOW,
    ) -> "ExternalScorer":
        """Start a scorer process and validate its handshake line."""
        try:
            proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise ScorerError(f"failed to start scorer {list(command)!r}: {exc}") from None
        session = cls(proc, command, timeout, window)
        try:
            line = session._lines.get(timeout=timeout)
        except queue.Empty:
            proc.kill()
            raise ScorerError(f"scorer produced no handshake within {timeout}s") from None
        if line is None:
            rc = proc.wait()
            raise ScorerError(
                f"scorer exited (status {rc}) before handshake; {session._diag()}"
            )
        try:
            handshake = ScorerHandshake.parse(line.rstrip("\n"))
        except ScorerError:
            proc.kill()
            proc.wait()
            raise
        session.handshake = handshake
        session.name = handshake.name
        session.max_tokens = handshake.max_tokens
        return session

    def _diag(self) -> str:
        return f"stderr: {list(self._stderr_tail)}"

    def _fail(self, message: str):
        try:
            self._proc.kill()
        except OSError:
            pass
        raise ScorerError(f"{message}; {self._diag()}")

    def _next_line(self) -> str:
        try:
            line = self._lines.get(timeout=self._timeout)
        except queue.Empty:
            self._fail(f"no response within {self._timeout}s")
        if line is None:
            rc = self._proc.poll()
            self._fail(f"scorer closed its output (status {rc}) with requests outstanding")
        return line.rstrip("\n")

    def send_line(self, line: str) -> None:
        """Write one raw request line (protocol checks are the caller's job)."""
        try:
            self._proc.stdin.write(line.rstrip("\n") + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self._fail("scorer pipe closed while sending requests")

    def close_requests(self) -> None:
        """Half-close: end the request stream but keep reading responses."""
        try:
            self._proc.stdin.close()
        except OSError:
            pass

    def read_line(self) -> str:
        """Read one raw response line, honoring the session timeout."""
        return self._next_line()

    def remaining_output(self, timeout: float = 5.0) -> list[str]:
        """Lines emitted after the last expected response (should be none)."""
        extra = []
        while True:
            try:
                line = self._lines.get(timeout=timeout)
            except queue.Empty:
                break
            if line is None:
                break
            extra.append(line.rstrip("\n"))
        return extra

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        """Score (query, text) pairs; output order matches input order."""
        if self._closed:
            raise ScorerError("session is closed")
        results: list[float | None] = [None] * len(pairs)
        pending: dict[int, int] = {}
        sent = 0
        done = 0
        n = len(pairs)
        while done < n:
            while sent < n and (sent - done) < self._window:
                q, t = pairs[sent]
                rid = self._next_id
                self._next_id += 1
                pending[rid] = sent
                payload = json.dumps({"id": rid, "query": q, "text": t}, ensure_ascii=False)
                try:
                    self._proc.stdin.write(payload + "\n")
                    self._proc.stdin.flush()
                except (BrokenPipeError, OSError):
                    self._fail("scorer pipe closed while sending requests")
                sent += 1
            raw = self._next_line()
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError:
                self._fail(f"malformed response line {raw!r}")
            if not isinstance(obj, dict) or "id" not in obj:
                self._fail(f"response without id: {raw!r}")
            rid = obj["id"]
            if not isinstance(rid, int) or isinstance(rid, bool) or rid not in pending:
                self._fail(f"response with unknown id: {raw!r}")
            if "error" in obj:
                self._fail(f"scorer reported an error: {raw!r}")
            score = obj.get("score")
            if isinstance(score, bool) or not isinstance(score, (int, float)):
                self._fail(f"response without numeric score: {raw!r}")
            score = float(score)
            if not math.isfinite(score) or not 0.0 <= score <= 1.0:
                self._fail(f"score outside [0, 1]: {raw!r}")
            results[pending.pop(rid)] = score
            done += 1
        return results  # type: ignore[return-value]

    def close(self, timeout: float = 10.0) -> int:
        """Close the request stream and reap the process; returns its exit code."""
        if self._closed:
            return self._proc.returncode
        self._closed = True
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            return self._proc.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            return self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def spawn_scorer(
    command: Sequence[str],
    timeout: float = DEFAULT_TIMEOUT,
    window: int = DEFAULT_WINDOW,
) -> ExternalScorer:
    """Launch an external scorer session (see ExternalScorer.spawn)."""
    return ExternalScorer.spawn(command, timeout=timeout, window=window)
