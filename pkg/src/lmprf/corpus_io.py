"""Readers for document collections, topics and qrels, plus the token pipeline."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .porter import porter_stem

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+")


class ParseError(ValueError):
    """Raised for malformed collection, topic or qrels input."""


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    text: str


@dataclass(frozen=True)
class Topic:
    topic_id: str
    title: str


@dataclass(frozen=True)
class TokenPipeline:
    """Lowercasing, then stopword removal, then Porter stemming."""

    lowercase: bool = True
    stopwords: frozenset[str] = field(default_factory=frozenset)
    stem: bool = True

    def key(self) -> str:
        # stable identifier for caching indexes built with this pipeline
        import hashlib

        h = hashlib.sha1("\n".join(sorted(self.stopwords)).encode("utf-8")).hexdigest()[:12]
        return f"lc{int(self.lowercase)}-st{int(self.stem)}-sw{h}"


class Qrels:
    """Relevance judgments keyed by ``(topic_id, doc_id)``."""

    def __init__(self, judgments: dict[tuple[str, str], int] | None = None):
        self.judgments: dict[tuple[str, str], int] = {}
        for (topic_id, doc_id), grade in (judgments or {}).items():
            self.add(topic_id, doc_id, grade)

    def add(self, topic_id: str, doc_id: str, grade: int) -> None:
        key = (topic_id, doc_id)
        if key in self.judgments:
            raise ParseError(f"duplicate judgment for topic {topic_id!r}, doc {doc_id!r}")
        if grade < 0:
            raise ParseError(f"negative grade {grade} for topic {topic_id!r}, doc {doc_id!r}")
        self.judgments[key] = grade

    def relevant(self, topic_id: str) -> set[str]:
        """Documents with grade > 0 for ``topic_id``."""
        return {d for (t, d), g in self.judgments.items() if t == topic_id and g > 0}

    def relevant_by_topic(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for (t, d), g in self.judgments.items():
            out.setdefault(t, set())
            if g > 0:
                out[t].add(d)
        return out

    def topics(self) -> list[str]:
        return sorted({t for t, _ in self.judgments})

    def __len__(self) -> int:
        return len(self.judgments)


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One term per line, UTF-8; blank lines and ``#`` comments skipped."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            w = line.strip()
            if w and not w.startswith("#"):
                words.add(w.lower())
    return frozenset(words)


def tokenize(text: str, pipeline: TokenPipeline) -> list[str]:
    terms = _TOKEN_RE.findall(text)
    if pipeline.lowercase:
        terms = [t.lower() for t in terms]
    if pipeline.stopwords:
        terms = [t for t in terms if t not in pipeline.stopwords]
    if pipeline.stem:
        terms = [porter_stem(t) for t in terms]
    return [t for t in terms if t]


def _iter_jsonl(path: Path) -> Iterator[RawDocument]:
    offset = 0
    ordinal = 1
    with open(path, "rb") as fh:
        for raw in fh:
            line = raw.strip()
            if line:
                try:
                    rec = json.loads(line)
                    doc = RawDocument(str(rec["doc_id"]), str(rec.get("text", "")))
                except (ValueError, KeyError, TypeError) as exc:
                    raise ParseError(
                        f"{path}: malformed record #{ordinal} at byte offset {offset}: {exc}"
                    ) from None
                if not doc.doc_id:
                    raise ParseError(f"{path}: empty doc_id in record #{ordinal} at byte offset {offset}")
                yield doc
                ordinal += 1
            offset += len(raw)


_DOC_RE = re.compile(rb"<DOC>(.*?)</DOC>", re.S | re.I)
_DOCNO_RE = re.compile(rb"<DOCNO>\s*(.*?)\s*</DOCNO>", re.S | re.I)
_TAG_RE = re.compile(rb"<[^>]+>")


def _iter_trec(path: Path) -> Iterator[RawDocument]:
    data = path.read_bytes()
    pos = 0
    ordinal = 1
    for m in _DOC_RE.finditer(data):
        gap = data[pos : m.start()]
        if gap.strip():
            raise ParseError(f"{path}: text outside <DOC> before record #{ordinal} at byte offset {pos}")
        body = m.group(1)
        no = _DOCNO_RE.search(body)
        if no is None or not no.group(1).strip():
            raise ParseError(f"{path}: record #{ordinal} at byte offset {m.start()} has no <DOCNO>")
        text = body[: no.start()] + b" " + body[no.end() :]
        text = _TAG_RE.sub(b" ", text)
        yield RawDocument(no.group(1).decode("utf-8").strip(), text.decode("utf-8", errors="replace").strip())
        ordinal += 1
        pos = m.end()
    tail = data[pos:]
    if tail.strip():
        raise ParseError(f"{path}: unterminated or malformed record #{ordinal} at byte offset {pos}")


def parse_documents(path: str | Path, format: str | None = None) -> list[RawDocument]:
    """Read a collection in ``trec-sgml`` or ``jsonl`` format, preserving file order.

    The format is guessed from the extension when not given (``.jsonl`` / ``.json``
    is JSONL, anything else TREC SGML).
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix.lower() in (".jsonl", ".json") else "trec-sgml"
    if format == "jsonl":
        it = _iter_jsonl(path)
    elif format in ("trec-sgml", "trec"):
        it = _iter_trec(path)
    else:
        raise ValueError(f"unknown document format {format!r}")
    docs = []
    seen: set[str] = set()
    for doc in it:
        if doc.doc_id in seen:
            raise ParseError(f"{path}: duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        docs.append(doc)
    return docs


def write_documents(docs: Iterable[RawDocument], path: str | Path) -> None:
    """Write documents as JSONL (inverse of ``parse_documents(..., "jsonl")``)."""
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"doc_id": d.doc_id, "text": d.text}, ensure_ascii=False) + "\n")


_TOP_RE = re.compile(r"<top>(.*?)</top>", re.S | re.I)
_NUM_RE = re.compile(r"<num>\s*(?:Number:)?\s*(\S+)", re.I)
_TITLE_RE = re.compile(r"<title>\s*(?:Topic:)?(.*?)(?=<[a-z/]|\Z)", re.S | re.I)


def parse_topics(path: str | Path) -> list[Topic]:
    """TREC topic file (``<top>``/``<num>``/``<title>``) or two-column TSV."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if re.search(r"<num>", text, re.I):
        blocks = _TOP_RE.findall(text) or [text]
        topics = []
        for block in blocks:
            num = _NUM_RE.search(block)
            if num is None:
                raise ParseError(f"{path}: topic block without <num>")
            tid = num.group(1).strip()
            title = _TITLE_RE.search(block)
            if title is None or not title.group(1).strip():
                raise ParseError(f"{path}: topic {tid} has no title")
            topics.append(Topic(tid, " ".join(title.group(1).split())))
        return topics
    topics = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t", 1)
        tid = parts[0].strip()
        if len(parts) < 2 or not parts[1].strip():
            raise ParseError(f"{path}:{lineno}: topic {tid} has no title")
        topics.append(Topic(tid, parts[1].strip()))
    return topics


def write_topics(topics: Sequence[Topic], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in topics:
            fh.write(f"{t.topic_id}\t{t.title}\n")


def parse_qrels(path: str | Path) -> Qrels:
    """TREC qrels: ``topic iteration docid grade`` per line."""
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            try:
                grade = int(parts[3])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer grade {parts[3]!r}") from None
            try:
                qrels.add(parts[0], parts[2], grade)
            except ParseError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return qrels


def write_qrels(qrels: Qrels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (t, d), g in sorted(qrels.judgments.items()):
            fh.write(f"{t} 0 {d} {g}\n")
