"""Word-vector tables, averaged query vectors and the two similarity functions."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus_io import ParseError

logger = logging.getLogger(__name__)


class EmbeddingTable:
    """Term -> vector lookup backed by one dense ``(n_terms, dim)`` matrix."""

    def __init__(self, terms: Sequence[str], matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise ValueError("embedding matrix must be 2-d with dim >= 1")
        if len(terms) != matrix.shape[0]:
            raise ValueError("one row per term required")
        self.terms = list(terms)
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self.row = {t: i for i, t in enumerate(self.terms)}

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.row

    def __getitem__(self, term: str) -> np.ndarray:
        return self.matrix[self.row[term]]

    def get(self, term: str):
        i = self.row.get(term)
        return None if i is None else self.matrix[i]

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return {t: self.matrix[i] for t, i in self.row.items()}


@dataclass(frozen=True)
class QueryVector:
    values: np.ndarray
    source_terms: tuple[str, ...]


def load_embeddings(path: str | Path, format: str | None = None) -> EmbeddingTable:
    """Read word2vec text (``count dim`` header) or GloVe text (no header).

    With ``format=None`` a first line of exactly two integers is taken as a
    word2vec header.  Duplicate terms keep the last row.
    """
    path = Path(path)
    rows: dict[str, np.ndarray] = {}
    dim = None
    declared = None
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and format != "glove":
                header = _parse_header(parts)
                if header is not None:
                    declared, dim = header
                    continue
                if format == "word2vec":
                    raise ParseError(f"{path}:1: expected 'count dim' header")
            term, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim < 1:
                    raise ParseError(f"{path}:{lineno}: row has no values")
            if len(values) != dim:
                raise ParseError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            try:
                vec = np.array(values, dtype=float)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric vector value") from None
            if term in rows:
                logger.warning("%s:%d: duplicate term %r, keeping last", path, lineno, term)
            rows[term] = vec
    if dim is None:
        raise ParseError(f"{path}: no vectors")
    if declared is not None and declared != len(rows):
        logger.warning("%s: header declares %d vectors, read %d", path, declared, len(rows))
    terms = list(rows)
    matrix = np.vstack([rows[t] for t in terms]) if terms else np.zeros((0, dim))
    return EmbeddingTable(terms, matrix)


def _parse_header(parts):
    if len(parts) != 2:
        return None
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        return None


def save_embeddings(table: EmbeddingTable, path: str | Path, format: str = "word2vec") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if format == "word2vec":
            fh.write(f"{len(table)} {table.dim}\n")
        for t, v in zip(table.terms, table.matrix):
            fh.write(t + " " + " ".join(repr(float(x)) for x in v) + "\n")


def collapse_to_stems(table: EmbeddingTable, stem: Callable[[str], str]) -> EmbeddingTable:
    """Average the vectors of all surface forms sharing a stem.

    Lets a table of raw word forms be matched against a stemmed index.
    """
    groups: dict[str, list[int]] = {}
    for i, t in enumerate(table.terms):
        groups.setdefault(stem(t.lower()), []).append(i)
    merged = sum(len(g) > 1 for g in groups.values())
    if merged:
        logger.info("collapsed %d stems shared by several surface forms", merged)
    stems = sorted(groups)
    matrix = np.vstack([table.matrix[groups[s]].mean(axis=0) for s in stems]) if stems else np.zeros((0, table.dim))
    return EmbeddingTable(stems, matrix)


def query_vector(table: EmbeddingTable, terms: Iterable[str]) -> QueryVector:
    """Mean of the vectors of the in-table query terms, counting repeats."""
    used = []
    missing = []
    for t in terms:
        (used if t in table else missing).append(t)
    if missing:
        logger.warning("query terms without vectors: %s", " ".join(missing))
    if not used:
        raise KeyError("no query term has an embedding")
    vec = np.mean([table[t] for t in used], axis=0)
    return QueryVector(vec, tuple(used))


def _check_pair(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"vector length mismatch: {u.shape} vs {v.shape}")
    return u, v


def sigmoid_sim(u, v) -> float:
    u, v = _check_pair(u, v)
    x = float(u @ v)
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def cosine_sim(u, v) -> float:
    u, v = _check_pair(u, v)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine similarity of a zero vector")
    return float(u @ v / (nu * nv))


def sigmoid_sims(q, M) -> np.ndarray:
    """``sigmoid_sim(q, row)`` for every row of ``M``."""
    x = np.asarray(M, dtype=float) @ np.asarray(q, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def cosine_sims(q, M) -> np.ndarray:
    """``cosine_sim(q, row)`` for every row of ``M``."""
    M = np.asarray(M, dtype=float)
    q = np.asarray(q, dtype=float)
    nq = np.linalg.norm(q)
    norms = np.linalg.norm(M, axis=1)
    if nq == 0 or np.any(norms == 0):
        raise ValueError("cosine similarity of a zero vector")
    return (M @ q) / (norms * nq)
