"""Immutable inverted index and the unigram statistics every model draws on.

Postings are held in CSR form (``term_ptr`` / ``post_docs`` / ``post_counts``)
with a matching doc-major forward index, so both term-at-a-time scoring and
per-document model estimation are array slices.
"""

from __future__ import annotations

import logging
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus_io import RawDocument, TokenPipeline, ParseError, tokenize

logger = logging.getLogger(__name__)

MAGIC = b"LMPRFIDX"
FORMAT_VERSION = 1


class UndefinedModelError(ValueError):
    """A probability was requested from a model with no mass (e.g. an empty document)."""


class Index:
    """Read-only collection statistics.

    Attributes
    ----------
    vocab : list of str
        Term strings indexed by term id.
    term_ids : dict
        Inverse of ``vocab``.
    doc_ids : list of str
        External ids indexed by document ordinal.
    doc_len : int64 array
    coll_freq : int64 array
    total_tokens : int
    """

    def __init__(self, vocab, doc_ids, term_ptr, post_docs, post_counts, doc_len):
        self.vocab: list[str] = list(vocab)
        self.term_ids: dict[str, int] = {t: i for i, t in enumerate(self.vocab)}
        self.doc_ids: list[str] = list(doc_ids)
        self.term_ptr = np.ascontiguousarray(term_ptr, dtype=np.int64)
        self.post_docs = np.ascontiguousarray(post_docs, dtype=np.int32)
        self.post_counts = np.ascontiguousarray(post_counts, dtype=np.int32)
        self.doc_len = np.ascontiguousarray(doc_len, dtype=np.int64)
        self._term_of_post = np.repeat(np.arange(len(self.vocab), dtype=np.int32), np.diff(self.term_ptr))
        self.coll_freq = np.bincount(
            self._term_of_post, weights=self.post_counts, minlength=len(self.vocab)
        ).astype(np.int64)
        self.total_tokens = int(self.doc_len.sum())
        self.ord_of: dict[str, int] = {d: i for i, d in enumerate(self.doc_ids)}
        # rank of each external id in sorted order, used for deterministic tie-breaks
        order = sorted(range(len(self.doc_ids)), key=self.doc_ids.__getitem__)
        self.id_rank = np.empty(len(self.doc_ids), dtype=np.int64)
        self.id_rank[order] = np.arange(len(order))
        self._build_forward()
        for a in (self.term_ptr, self.post_docs, self.post_counts, self.doc_len, self.coll_freq):
            a.setflags(write=False)

    def _build_forward(self) -> None:
        n_post = len(self.post_docs)
        term_of_post = self._term_of_post
        order = np.lexsort((term_of_post, self.post_docs)) if n_post else np.zeros(0, dtype=np.int64)
        self.doc_terms = term_of_post[order]
        self.doc_counts = self.post_counts[order]
        per_doc = np.bincount(self.post_docs, minlength=self.n_docs) if n_post else np.zeros(self.n_docs, np.int64)
        self.doc_ptr = np.concatenate(([0], np.cumsum(per_doc))).astype(np.int64)
        for a in (self.doc_terms, self.doc_counts, self.doc_ptr):
            a.setflags(write=False)

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    @property
    def n_terms(self) -> int:
        return len(self.vocab)

    def term_id(self, term: str) -> int | None:
        return self.term_ids.get(term)

    def postings(self, term_id: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.term_ptr[term_id], self.term_ptr[term_id + 1]
        return self.post_docs[lo:hi], self.post_counts[lo:hi]

    def doc_vector(self, doc: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted term ids and counts of document ``doc``."""
        lo, hi = self.doc_ptr[doc], self.doc_ptr[doc + 1]
        return self.doc_terms[lo:hi], self.doc_counts[lo:hi]

    def count(self, term_id: int, doc: int) -> int:
        terms, counts = self.doc_vector(doc)
        i = np.searchsorted(terms, term_id)
        if i < len(terms) and terms[i] == term_id:
            return int(counts[i])
        return 0

    def collection_probs(self) -> np.ndarray:
        if self.total_tokens == 0:
            raise UndefinedModelError("collection has no tokens")
        return self.coll_freq / self.total_tokens

    # -- persistence -------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Binary index plus ``<path>.vocab.tsv`` sidecar (term_id, term, coll_freq)."""
        path = Path(path)
        ids_blob = "\n".join(self.doc_ids).encode("utf-8")
        arrays = [
            self.term_ptr.astype("<i8"),
            self.post_docs.astype("<i4"),
            self.post_counts.astype("<i4"),
            self.doc_len.astype("<i8"),
        ]
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IQQQQ", FORMAT_VERSION, self.n_terms, self.n_docs,
                                 len(self.post_docs), len(ids_blob)))
            fh.write(ids_blob)
            for a in arrays:
                fh.write(a.tobytes())
        with open(vocab_path(path), "w", encoding="utf-8") as fh:
            for i, (t, cf) in enumerate(zip(self.vocab, self.coll_freq)):
                fh.write(f"{i}\t{t}\t{int(cf)}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Index":
        path = Path(path)
        data = path.read_bytes()
        if data[:8] != MAGIC:
            raise ParseError(f"{path}: not an index file")
        version, n_terms, n_docs, n_post, n_blob = struct.unpack_from("<IQQQQ", data, 8)
        if version != FORMAT_VERSION:
            raise ParseError(f"{path}: unsupported index version {version}")
        off = 8 + struct.calcsize("<IQQQQ")
        blob = data[off : off + n_blob].decode("utf-8")
        off += n_blob
        doc_ids = blob.split("\n") if n_docs else []

        def take(dtype, count):
            nonlocal off
            a = np.frombuffer(data, dtype=dtype, count=count, offset=off)
            off += a.nbytes
            return a.astype(dtype[1:])

        term_ptr = take("<i8", n_terms + 1)
        post_docs = take("<i4", n_post)
        post_counts = take("<i4", n_post)
        doc_len = take("<i8", n_docs)
        vocab = [""] * n_terms
        with open(vocab_path(path), encoding="utf-8") as fh:
            for line in fh:
                tid, term, _ = line.rstrip("\n").split("\t")
                vocab[int(tid)] = term
        return cls(vocab, doc_ids, term_ptr, post_docs, post_counts, doc_len)


def vocab_path(index_path: str | Path) -> Path:
    p = Path(index_path)
    return p.with_name(p.name + ".vocab.tsv")


def build_index(docs: Sequence[RawDocument], pipeline: TokenPipeline) -> Index:
    """Tokenize ``docs`` and build the index; term ids follow sorted term order."""
    seen: set[str] = set()
    doc_counts: list[Counter] = []
    for d in docs:
        if d.doc_id in seen:
            raise ParseError(f"duplicate doc_id {d.doc_id!r}")
        seen.add(d.doc_id)
        doc_counts.append(Counter(tokenize(d.text, pipeline)))
    vocab = sorted(set().union(*doc_counts)) if doc_counts else []
    tid = {t: i for i, t in enumerate(vocab)}

    rows, cols, vals = [], [], []
    for ordinal, c in enumerate(doc_counts):
        for term, n in c.items():
            rows.append(tid[term])
            cols.append(ordinal)
            vals.append(n)
    rows_a = np.asarray(rows, dtype=np.int64)
    cols_a = np.asarray(cols, dtype=np.int32)
    vals_a = np.asarray(vals, dtype=np.int32)
    order = np.lexsort((cols_a, rows_a))
    term_ptr = np.zeros(len(vocab) + 1, dtype=np.int64)
    np.add.at(term_ptr, rows_a + 1, 1)
    term_ptr = np.cumsum(term_ptr)
    doc_len = np.array([sum(c.values()) for c in doc_counts], dtype=np.int64)
    index = Index(vocab, [d.doc_id for d in docs], term_ptr, cols_a[order], vals_a[order], doc_len)
    logger.info("indexed %d documents, %d terms, %d tokens", index.n_docs, index.n_terms, index.total_tokens)
    return index


def p_ml_doc(index: Index, term: int, doc: int) -> float:
    n = index.doc_len[doc]
    if n == 0:
        raise UndefinedModelError(f"document {index.doc_ids[doc]!r} is empty")
    return index.count(term, doc) / n


def p_collection(index: Index, term: int | None) -> float:
    if index.total_tokens == 0:
        raise UndefinedModelError("collection has no tokens")
    if term is None or not 0 <= term < index.n_terms:
        return 0.0
    return index.coll_freq[term] / index.total_tokens


@dataclass(frozen=True)
class FeedbackSet:
    """Pooled term counts of the feedback documents.

    ``term_ids`` is sorted ascending; ``counts[i]`` is c(term_ids[i], F).
    """

    doc_ords: tuple[int, ...]
    term_ids: np.ndarray
    counts: np.ndarray
    total: int

    @property
    def size(self) -> int:
        return len(self.doc_ords)

    def p_ml(self) -> np.ndarray:
        if self.total == 0:
            raise UndefinedModelError("feedback documents are empty")
        return self.counts / self.total

    def term_counts(self) -> dict[int, int]:
        return dict(zip(self.term_ids.tolist(), self.counts.tolist()))


def feedback_counts(index: Index, doc_ords: Sequence[int]) -> FeedbackSet:
    doc_ords = tuple(int(d) for d in doc_ords)
    if not doc_ords:
        raise ValueError("empty feedback set")
    for d in doc_ords:
        if not 0 <= d < index.n_docs:
            raise IndexError(f"document ordinal {d} out of range")
    parts_t = [index.doc_vector(d)[0] for d in doc_ords]
    parts_c = [index.doc_vector(d)[1] for d in doc_ords]
    terms = np.concatenate(parts_t).astype(np.int64)
    counts = np.concatenate(parts_c).astype(np.int64)
    uniq, inv = np.unique(terms, return_inverse=True)
    pooled = np.bincount(inv, weights=counts, minlength=len(uniq)).astype(np.int64)
    return FeedbackSet(doc_ords, uniq, pooled, int(pooled.sum()))
