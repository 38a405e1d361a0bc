"""Collection and topic parsing, text cleaning, sentence segmentation, chunking.

Everything here is a pure function over its inputs; documents can be
processed in parallel without coordination.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

from .errors import ParseError

DEFAULT_CHUNK_TOKENS = 256

# Characters that may open a sentence after terminal punctuation.
_OPENING_QUOTES = frozenset("\"'“‘")

_TAG_RE = re.compile(r"<[^<>]*>")


@dataclass(frozen=True)
class RawDocument:
    """A document as found in the collection, markup and all."""

    doc_id: str
    raw_text: str


@dataclass(frozen=True)
class Sentence:
    """One scoring unit: a sentence (or chunk of one) within a document."""

    doc_id: str
    index: int
    text: str
    token_count: int


@dataclass
class CleanDocument:
    """A markup-free document, optionally segmented into sentences."""

    doc_id: str
    text: str
    sentences: list[Sentence] = field(default_factory=list)


@dataclass(frozen=True)
class Topic:
    """A query: topic identifier plus title text."""

    topic_id: str
    title: str


def _as_bytes(data: bytes | BinaryIO) -> bytes:
    if isinstance(data, bytes):
        return data
    return data.read()


def parse_trec_collection(data: bytes | BinaryIO) -> list[RawDocument]:
    """Parse a concatenation of <DOC>...</DOC> blocks.

    Each block must contain exactly one <DOCNO>...</DOCNO> element; the
    trimmed DOCNO content becomes the document id and the rest of the
    block body is kept verbatim as raw_text.
    """
    raw = _as_bytes(data)
    docs: list[RawDocument] = []
    seen: set[str] = set()
    pos = 0
    while True:
        start = raw.find(b"<DOC>", pos)
        if start < 0:
            break
        end = raw.find(b"</DOC>", start)
        if end < 0:
            raise ParseError("unterminated <DOC> block", f"byte {start}")
        body = raw[start + len(b"<DOC>") : end]
        no_start = body.find(b"<DOCNO>")
        if no_start < 0:
            raise ParseError("missing <DOCNO> in <DOC> block", f"byte {start}")
        no_end = body.find(b"</DOCNO>", no_start)
        if no_end < 0:
            raise ParseError("unterminated <DOCNO>", f"byte {start + no_start}")
        if body.find(b"<DOCNO>", no_end) >= 0:
            raise ParseError("multiple <DOCNO> elements in one block", f"byte {start}")
        try:
            doc_id = body[no_start + len(b"<DOCNO>") : no_end].decode("utf-8").strip()
            rest = (body[:no_start] + body[no_end + len(b"</DOCNO>") :]).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc}", f"byte {start}") from None
        if not doc_id:
            raise ParseError("empty DOCNO", f"byte {start + no_start}")
        if any(c.isspace() for c in doc_id):
            raise ParseError(f"DOCNO contains whitespace: {doc_id!r}", f"byte {start + no_start}")
        if doc_id in seen:
            raise ParseError(f"duplicate DOCNO {doc_id!r}", f"byte {start}")
        seen.add(doc_id)
        docs.append(RawDocument(doc_id=doc_id, raw_text=rest))
        pos = end + len(b"</DOC>")
    return docs


def _field_text(block: str, tag: str) -> str | None:
    """Extract a field's text from a topic block.

    The field runs from after <tag> to </tag> if present, otherwise to the
    next markup tag; this accepts both closed and line-oriented topic files.
    """
    open_tag = f"<{tag}>"
    start = block.find(open_tag)
    if start < 0:
        return None
    start += len(open_tag)
    close = block.find(f"</{tag}>", start)
    nxt = block.find("<", start)
    if close >= 0 and (nxt < 0 or close <= nxt):
        return block[start:close]
    if nxt >= 0:
        return block[start:nxt]
    return block[start:]


def parse_topics(data: bytes | BinaryIO) -> list[Topic]:
    """Parse <top> blocks holding <num> and <title> fields."""
    text = _as_bytes(data).decode("utf-8")
    topics: list[Topic] = []
    seen: set[str] = set()
    pos = 0
    while True:
        start = text.find("<top>", pos)
        if start < 0:
            break
        end = text.find("</top>", start)
        if end < 0:
            raise ParseError("unterminated <top> block", f"offset {start}")
        block = text[start:end]
        num = _field_text(block, "num")
        if num is None:
            raise ParseError("missing <num> in topic block", f"offset {start}")
        topic_id = re.sub(r"^\s*Number\s*:", "", num, flags=re.IGNORECASE).strip()
        if not topic_id:
            raise ParseError("empty topic number", f"offset {start}")
        title = _field_text(block, "title")
        if title is None or not title.strip():
            raise ParseError(f"missing title for topic {topic_id}")
        if topic_id in seen:
            raise ParseError(f"duplicate topic id {topic_id!r}")
        seen.add(topic_id)
        topics.append(Topic(topic_id=topic_id, title=title.strip()))
        pos = end + len("</top>")
    return topics


def parse_json_corpus(data: bytes | BinaryIO) -> list[RawDocument]:
    """Parse a JSON-lines corpus: one object per line with "id" and "text"."""
    text = _as_bytes(data).decode("utf-8")
    docs: list[RawDocument] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", f"line {lineno}") from None
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            raise ParseError('expected object with "id" and "text"', f"line {lineno}")
        doc_id = str(obj["id"]).strip()
        if not doc_id or any(c.isspace() for c in doc_id):
            raise ParseError(f"bad document id {obj['id']!r}", f"line {lineno}")
        if doc_id in seen:
            raise ParseError(f"duplicate document id {doc_id!r}", f"line {lineno}")
        seen.add(doc_id)
        docs.append(RawDocument(doc_id=doc_id, raw_text=str(obj["text"])))
    return docs


def strip_tags(text: str) -> str:
    """Replace every <...> span (matching '>' and no interior '<') with a space.

    A '<' without a matching '>' is literal text, as is one whose candidate
    span contains another '<' before it (the inner tag wins).
    """
    return _TAG_RE.sub(" ", text)


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim the ends."""
    return " ".join(text.split())


def clean(raw: RawDocument) -> CleanDocument:
    """Strip markup tags and normalize whitespace; sentences left empty."""
    return CleanDocument(doc_id=raw.doc_id, text=normalize_ws(strip_tags(raw.raw_text)))


def segment(text: str) -> list[str]:
    """Split cleaned text into sentences.

    A boundary falls after '.', '?' or '!' when followed by whitespace and
    then an uppercase letter, digit, or opening quote.  Trailing text with
    no terminal punctuation becomes a final sentence.
    """
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in ".?!":
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            if j > i + 1 and j < n and (
                text[j].isupper() or text[j].isdigit() or text[j] in _OPENING_QUOTES
            ):
                piece = text[start : i + 1].strip()
                if piece:
                    sentences.append(piece)
                start = j
                i = j
                continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def chunk(sentence: Sentence, max_tokens: int) -> list[Sentence]:
    """Split an over-long sentence into consecutive fixed-size token chunks.

    Every chunk holds exactly max_tokens whitespace tokens except the last,
    which holds the remainder.  A sentence already within the limit is
    returned unchanged.
    """
    if max_tokens < 1:
        raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
    tokens = sentence.text.split()
    if len(tokens) <= max_tokens:
        return [sentence]
    out = []
    for k, ofs in enumerate(range(0, len(tokens), max_tokens)):
        piece = tokens[ofs : ofs + max_tokens]
        out.append(
            Sentence(
                doc_id=sentence.doc_id,
                index=sentence.index + k,
                text=" ".join(piece),
                token_count=len(piece),
            )
        )
    return out


def build_sentences(doc_id: str, text: str, max_tokens: int = DEFAULT_CHUNK_TOKENS) -> list[Sentence]:
    """Segment cleaned text and chunk over-long sentences, renumbering 0..k-1."""
    pieces: list[Sentence] = []
    for piece in segment(text):
        base = Sentence(doc_id=doc_id, index=0, text=piece, token_count=len(piece.split()))
        pieces.extend(chunk(base, max_tokens))
    return [
        Sentence(doc_id=s.doc_id, index=i, text=s.text, token_count=s.token_count)
        for i, s in enumerate(pieces)
    ]


def prepare(raw: RawDocument, max_tokens: int = DEFAULT_CHUNK_TOKENS) -> CleanDocument:
    """Clean a raw document and populate its sentences."""
    doc = clean(raw)
    doc.sentences = build_sentences(doc.doc_id, doc.text, max_tokens)
    return doc


def truncate_tokens(text: str, max_tokens: int) -> str:
    """Keep at most max_tokens whitespace tokens of text."""
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    return " ".join(tokens[:max_tokens])


def load_collection(path) -> list[RawDocument]:
    """Read a collection file; `.jsonl`/`.json` parse as JSON-lines, else TREC SGML."""
    p = Path(path)
    with open(p, "rb") as fh:
        if p.suffix in (".jsonl", ".json", ".ndjson"):
            return parse_json_corpus(fh)
        return parse_trec_collection(fh)


__all__ = [
    "RawDocument",
    "CleanDocument",
    "Sentence",
    "Topic",
    "DEFAULT_CHUNK_TOKENS",
    "parse_trec_collection",
    "parse_topics",
    "parse_json_corpus",
    "strip_tags",
    "normalize_ws",
    "clean",
    "segment",
    "chunk",
    "build_sentences",
    "prepare",
    "truncate_tokens",
    "load_collection",
]
