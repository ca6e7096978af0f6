"""KL-divergence ranking with Dirichlet-smoothed document models."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import _kernels
from .index import Index, UndefinedModelError

logger = logging.getLogger(__name__)

DEFAULT_MU = 1000.0


class EmptyQueryError(ValueError):
    """No query term survives tokenization and vocabulary lookup."""


@dataclass
class QueryLM:
    """Sparse term distribution over the index vocabulary.

    Used both for query models and for the feedback models built from them;
    ``method`` records which estimator produced it.
    """

    weights: dict[int, float]
    method: str = "mle"

    def __post_init__(self):
        if not self.weights:
            raise ValueError("empty language model")
        total = math.fsum(self.weights.values())
        if any(w <= 0 or not math.isfinite(w) for w in self.weights.values()):
            raise ValueError("language model weights must be positive and finite")
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"language model sums to {total!r}")

    @classmethod
    def from_scores(cls, term_ids: Iterable[int], scores: Iterable[float], method: str) -> "QueryLM":
        """Normalize nonnegative ``scores``; repeated ids add up, zero entries are dropped."""
        t = np.asarray(list(term_ids), dtype=np.int64)
        s = np.asarray(list(scores), dtype=float)
        if len(np.unique(t)) < len(t):
            t, inv = np.unique(t, return_inverse=True)
            s = np.bincount(inv, weights=s, minlength=len(t))
        keep = s > 0
        t, s = t[keep], s[keep]
        if not len(s) or not np.all(np.isfinite(s)):
            raise ValueError(f"{method}: no positive finite mass to normalize")
        p = s / math.fsum(s)
        return cls(dict(zip(t.tolist(), p.tolist())), method)

    def items_sorted(self, vocab: Sequence[str] | None = None) -> list[tuple[int, float]]:
        """Entries by descending weight, ties by term string (or id)."""
        if vocab is None:
            return sorted(self.weights.items(), key=lambda kv: (-kv[1], kv[0]))
        return sorted(self.weights.items(), key=lambda kv: (-kv[1], vocab[kv[0]]))

    def __len__(self) -> int:
        return len(self.weights)


@dataclass
class ScoredList:
    query_id: str
    entries: list[tuple[int, float]] = field(default_factory=list)

    def doc_ords(self) -> list[int]:
        return [d for d, _ in self.entries]


def mle_query(index: Index, terms: Sequence[str]) -> QueryLM:
    """Maximum-likelihood query model over the in-vocabulary terms."""
    counts: Counter[int] = Counter()
    dropped = []
    for t in terms:
        tid = index.term_id(t)
        if tid is None:
            dropped.append(t)
        else:
            counts[tid] += 1
    if dropped:
        logger.warning("query terms not in vocabulary: %s", " ".join(dropped))
    if not counts:
        raise EmptyQueryError(f"no query term in vocabulary: {list(terms)!r}")
    n = sum(counts.values())
    return QueryLM({t: c / n for t, c in counts.items()}, "mle")


def dirichlet_prob(index: Index, term: int, doc: int, mu: float = DEFAULT_MU) -> float:
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if index.total_tokens == 0:
        raise UndefinedModelError("collection has no tokens")
    dl = index.doc_len[doc]
    if dl + mu == 0:
        raise UndefinedModelError(f"document {index.doc_ids[doc]!r} is empty and mu=0")
    p_c = index.coll_freq[term] / index.total_tokens if term is not None else 0.0
    return (index.count(term, doc) + mu * p_c) / (dl + mu)


def score_kl(index: Index, qlm: QueryLM, doc: int, mu: float = DEFAULT_MU) -> float:
    """Cross-entropy form of the negative KL divergence (query entropy dropped)."""
    score = 0.0
    for t, w in qlm.weights.items():
        if index.coll_freq[t] == 0:
            continue
        p = dirichlet_prob(index, t, doc, mu)
        score += w * (math.log(p) if p > 0 else -math.inf)
    return score


def _scorable_terms(index: Index, qlm: QueryLM):
    terms = []
    weights = []
    for t, w in qlm.weights.items():
        if 0 <= t < index.n_terms and index.coll_freq[t] > 0:
            terms.append(t)
            weights.append(w)
        else:
            logger.warning("query term id %d has zero collection probability; skipped", t)
    return np.asarray(terms, dtype=np.int64), np.asarray(weights, dtype=float)


def score_all(index: Index, qlm: QueryLM, mu: float = DEFAULT_MU) -> np.ndarray:
    """KL scores for every document.

    Uses ``log((c + mu*p)/(|d| + mu)) = log(mu*p) - log(|d| + mu) + log1p(c/(mu*p))``
    so that only postings of query terms are touched.
    """
    terms, weights = _scorable_terms(index, qlm)
    dl = index.doc_len.astype(float)
    if mu == 0:
        return _score_all_unsmoothed(index, terms, weights)
    p_c = index.coll_freq[terms] / index.total_tokens
    coef = mu * p_c
    base = float(np.dot(weights, np.log(coef)))
    scores = np.full(index.n_docs, base) - weights.sum() * np.log(dl + mu)
    _kernels.accumulate_scores(index.term_ptr, index.post_docs, index.post_counts,
                               terms, weights, coef, scores)
    return scores


def _score_all_unsmoothed(index, terms, weights):
    scores = np.zeros(index.n_docs)
    hits = np.zeros(index.n_docs, dtype=np.int64)
    for t, w in zip(terms, weights):
        docs, counts = index.postings(t)
        scores[docs] += w * np.log(counts)
        hits[docs] += 1
    with np.errstate(divide="ignore"):
        scores -= weights.sum() * np.log(index.doc_len.astype(float))
    scores[hits < len(terms)] = -np.inf
    return scores


def rank_scores(index: Index, scores: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Top-``k`` non-empty documents, score descending, ties by ascending doc id."""
    live = np.flatnonzero(index.doc_len > 0)
    if not len(live):
        return []
    order = np.lexsort((index.id_rank[live], -scores[live]))
    top = live[order[:k]]
    return [(int(d), float(scores[d])) for d in top]


def retrieve(index: Index, qlm: QueryLM, k: int, mu: float = DEFAULT_MU, query_id: str = "") -> ScoredList:
    if k < 1:
        raise ValueError("k must be >= 1")
    if index.n_docs == 0 or index.total_tokens == 0:
        return ScoredList(query_id, [])
    return ScoredList(query_id, rank_scores(index, score_all(index, qlm, mu), k))


def interpolate_query(feedback: QueryLM, original: QueryLM, alpha_interp: float) -> QueryLM:
    """``(1 - alpha) * feedback + alpha * original`` over the union of supports."""
    if not 0.0 <= alpha_interp <= 1.0:
        raise ValueError(f"interpolation coefficient {alpha_interp} outside [0, 1]")
    if alpha_interp == 1.0:
        return QueryLM(dict(original.weights), original.method)
    if alpha_interp == 0.0:
        return QueryLM(dict(feedback.weights), feedback.method)
    mixed: dict[int, float] = {}
    for t, w in feedback.weights.items():
        mixed[t] = (1.0 - alpha_interp) * w
    for t, w in original.weights.items():
        mixed[t] = mixed.get(t, 0.0) + alpha_interp * w
    total = math.fsum(mixed.values())
    return QueryLM({t: w / total for t, w in mixed.items()}, feedback.method)


def format_run(lists: Iterable[ScoredList], index: Index, tag: str) -> str:
    """TREC run lines ``topic Q0 docid rank score tag``."""
    out = []
    for sl in lists:
        for rank, (d, s) in enumerate(sl.entries, 1):
            out.append(f"{sl.query_id} Q0 {index.doc_ids[d]} {rank} {s:.6f} {tag}\n")
    return "".join(out)


def write_run(fh: TextIO, lists: Iterable[ScoredList], index: Index, tag: str) -> None:
    fh.write(format_run(lists, index, tag))
