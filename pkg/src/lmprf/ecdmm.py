"""Embedded-coefficient query projection (ECDMM).

Per query: draw positive and negative terms from the feedback documents, learn
an ``n x n`` coefficient matrix ``W`` by gradient descent so that ``W^T v_q``
moves toward the positives and away from the negatives, then score the
feedback terms by (weighted) softmax of their similarity to the projected
query vector.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .embeddings import EmbeddingTable, QueryVector, cosine_sims, query_vector, sigmoid_sims
from .index import FeedbackSet, Index
from .retrieval import QueryLM

logger = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """The projection objective became non-finite; ``trace`` holds what was recorded."""

    def __init__(self, message: str, trace: "ProjectionMatrix"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class EcdmmParams:
    alpha_pos: float = 0.8
    lambda_neg: float = 0.05
    beta: float = 0.01
    n_pos: int = 40
    n_neg: int = 100
    lambda_mix: float = 0.9
    eta0: float = 0.01
    eta_decay: float = 0.01
    max_iter: int = 1000
    conv_tol: float = 1e-6
    rng_seed: int = 0
    sim: str = "cosine"
    weighted: bool = True
    # "feedback": p_ml over F; "collection": p(w|C) restricted to F's terms
    negative_source: str = "feedback"

    def __post_init__(self):
        if min(self.alpha_pos, self.lambda_neg, self.beta) < 0:
            raise ValueError("alpha_pos, lambda_neg and beta must be nonnegative")
        if self.n_pos < 1 or self.n_neg < 1:
            raise ValueError("n_pos and n_neg must be >= 1")
        if not 0.0 <= self.lambda_mix < 1.0:
            raise ValueError("lambda_mix must be in [0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.eta0 <= 0 or self.eta_decay < 0:
            raise ValueError("eta0 must be positive and eta_decay nonnegative")
        if self.sim not in ("cosine", "sigmoid"):
            raise ValueError(f"unknown similarity {self.sim!r}")
        if self.negative_source not in ("feedback", "collection"):
            raise ValueError(f"unknown negative source {self.negative_source!r}")

    def with_seed_for(self, topic_id: str) -> "EcdmmParams":
        """Copy with a per-topic seed derived from the global seed."""
        return replace(self, rng_seed=topic_seed(self.rng_seed, topic_id))


def topic_seed(seed: int, topic_id: str) -> int:
    return (seed * 1_000_003 + zlib.crc32(topic_id.encode("utf-8"))) % (2**32)


@dataclass
class SampleSets:
    positives: list[tuple[int, np.ndarray]]
    negatives: list[tuple[int, np.ndarray]]

    def matrices(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        pos = np.array([v for _, v in self.positives], dtype=float).reshape(-1, dim)
        neg = np.array([v for _, v in self.negatives], dtype=float).reshape(-1, dim)
        return pos, neg


@dataclass
class ProjectionMatrix:
    W: np.ndarray
    objectives: list[float] = field(default_factory=list)
    step_norms: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.objectives)

    def trace_csv(self) -> str:
        lines = ["iteration,objective,step_norm\n"]
        for i, (f, s) in enumerate(zip(self.objectives, self.step_norms), 1):
            lines.append(f"{i},{f!r},{s!r}\n")
        return "".join(lines)


# -- sampling -----------------------------------------------------------------

def _eligible(F: FeedbackSet, candidates) -> np.ndarray:
    if candidates is None:
        return np.ones(len(F.term_ids), dtype=bool)
    return np.isin(F.term_ids, np.asarray(list(candidates), dtype=np.int64))


def positive_weights(F: FeedbackSet, index: Index, lambda_mix: float) -> np.ndarray:
    """Normalized topicality ``(1-λ)p_F / ((1-λ)p_F + λ p_C)`` over ``F.term_ids``."""
    p_f = F.p_ml()
    p_c = index.coll_freq[F.term_ids] / index.total_tokens
    w = (1.0 - lambda_mix) * p_f / ((1.0 - lambda_mix) * p_f + lambda_mix * p_c)
    return w / w.sum()


def negative_weights(F: FeedbackSet, index: Index | None = None, source: str = "feedback") -> np.ndarray:
    """Unigram model raised to the 3/4 power, normalized, over ``F.term_ids``."""
    if source == "feedback":
        base = F.p_ml()
    else:
        if index is None:
            raise ValueError("collection-sourced negatives need the index")
        base = index.coll_freq[F.term_ids] / index.total_tokens
    w = base ** 0.75
    return w / w.sum()


def _draw(term_ids, weights, mask, k, rng, what):
    ids = term_ids[mask]
    w = weights[mask]
    if not len(ids) or w.sum() <= 0:
        raise ValueError(f"no {what} candidates in the feedback documents")
    k = min(k, int(np.count_nonzero(w)))
    picks = rng.choice(len(ids), size=k, replace=False, p=w / w.sum())
    return [int(t) for t in ids[picks]]


def sample_positive(F: FeedbackSet, index: Index, params: EcdmmParams, rng: np.random.Generator,
                    candidates=None) -> list[int]:
    """Distinct positive terms drawn by topicality, at most ``params.n_pos``.

    ``candidates`` restricts the draw (e.g. to terms that have vectors).
    """
    w = positive_weights(F, index, params.lambda_mix)
    return _draw(F.term_ids, w, _eligible(F, candidates), params.n_pos, rng, "positive")


def sample_negative(F: FeedbackSet, params: EcdmmParams, rng: np.random.Generator,
                    candidates=None, index: Index | None = None) -> list[int]:
    w = negative_weights(F, index, params.negative_source)
    return _draw(F.term_ids, w, _eligible(F, candidates), params.n_neg, rng, "negative")


def build_samples(pos_ids: Sequence[int], neg_ids: Sequence[int], index: Index,
                  table: EmbeddingTable) -> SampleSets:
    def vecs(ids):
        return [(t, table[index.vocab[t]]) for t in ids if index.vocab[t] in table]

    pos, neg = vecs(pos_ids), vecs(neg_ids)
    overlap = set(pos_ids) & set(neg_ids)
    if overlap:
        logger.debug("%d terms drawn as both positive and negative", len(overlap))
    return SampleSets(pos, neg)


# -- objective ------------------------------------------------------------------

def _vq(vq) -> np.ndarray:
    return np.asarray(vq.values if isinstance(vq, QueryVector) else vq, dtype=float)


def _check_dims(W, v, samples):
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] != v.shape[0]:
        raise ValueError(f"W of shape {W.shape} does not match query vector of length {v.shape[0]}")
    for _, u in samples.positives + samples.negatives:
        if len(u) != len(v):
            raise ValueError("sample vector length differs from query vector length")


def ecdmm_objective(W, vq, samples: SampleSets, params: EcdmmParams) -> float:
    """``Σ+ α/2 ||W^T v - v+||² - Σ- λ/2 ||W^T v - v-||² - β/2 ||W||_F²``."""
    W = np.asarray(W, dtype=float)
    v = _vq(vq)
    _check_dims(W, v, samples)
    p = W.T @ v
    f = 0.0
    for _, u in samples.positives:
        f += 0.5 * params.alpha_pos * float(np.sum((p - u) ** 2))
    for _, u in samples.negatives:
        f -= 0.5 * params.lambda_neg * float(np.sum((p - u) ** 2))
    return f - 0.5 * params.beta * float(np.sum(W * W))


def ecdmm_gradient(W, vq, samples: SampleSets, params: EcdmmParams) -> np.ndarray:
    """Gradient of :func:`ecdmm_objective` in ``W``'s layout: ``v_q`` indexes rows."""
    W = np.asarray(W, dtype=float)
    v = _vq(vq)
    _check_dims(W, v, samples)
    p = W.T @ v
    r = np.zeros_like(p)
    for _, u in samples.positives:
        r += params.alpha_pos * (p - u)
    for _, u in samples.negatives:
        r -= params.lambda_neg * (p - u)
    return np.outer(v, r) - params.beta * W


def learn_projection(vq, samples: SampleSets, params: EcdmmParams, backend=None) -> ProjectionMatrix:
    """Gradient descent from a seeded uniform ``[-1, 1]`` start.

    Step ``t`` uses ``eta0 / (1 + eta_decay * t)``; stops once the update norm
    drops below ``conv_tol`` or after ``max_iter`` steps.
    """
    v = _vq(vq)
    n = len(v)
    if not samples.positives and not samples.negatives:
        raise ValueError("no positive or negative samples")
    pos, neg = samples.matrices(n)
    rng = np.random.default_rng(params.rng_seed)
    W = np.ascontiguousarray(rng.uniform(-1.0, 1.0, size=(n, n)))
    kern = backend or _kernels
    objectives, steps, converged, diverged = kern.sgd_project(
        W, np.ascontiguousarray(v), np.ascontiguousarray(pos), np.ascontiguousarray(neg),
        params.alpha_pos, params.lambda_neg, params.beta,
        params.eta0, params.eta_decay, params.max_iter, params.conv_tol,
    )
    proj = ProjectionMatrix(W, objectives.tolist(), steps.tolist(), bool(converged))
    if diverged:
        raise DivergenceError(f"objective diverged after {proj.iterations} iterations", proj)
    return proj


def project_query(W, vq) -> QueryVector:
    Wm = np.asarray(W.W if isinstance(W, ProjectionMatrix) else W, dtype=float)
    v = _vq(vq)
    if Wm.shape != (len(v), len(v)):
        raise ValueError(f"W of shape {Wm.shape} does not match query vector of length {len(v)}")
    terms = vq.source_terms if isinstance(vq, QueryVector) else ()
    return QueryVector(Wm.T @ v, terms)


# -- feedback model ---------------------------------------------------------------

def softmax_weights(sims: np.ndarray, counts: np.ndarray | None = None) -> np.ndarray:
    """``a_w e^{s_w} / Σ a e^{s}``; plain softmax when ``counts`` is None."""
    z = np.exp(sims - np.max(sims))
    if counts is not None:
        z = z * counts
    return z / math.fsum(z)


def ecdmm_feedback_lm(vq_hat, F: FeedbackSet, table: EmbeddingTable, index: Index,
                      sim: str = "cosine", weighted: bool = True) -> QueryLM:
    """Softmax over similarity between the projected query and each feedback term with a vector."""
    has = np.array([index.vocab[t] in table for t in F.term_ids], dtype=bool)
    if not has.any():
        raise KeyError("no feedback term has an embedding")
    ids = F.term_ids[has]
    M = table.matrix[[table.row[index.vocab[t]] for t in ids]]
    q = _vq(vq_hat)
    if sim == "cosine":
        s = cosine_sims(q, M)
    elif sim == "sigmoid":
        s = sigmoid_sims(q, M)
    else:
        raise ValueError(f"unknown similarity {sim!r}")
    p = softmax_weights(s, F.counts[has].astype(float) if weighted else None)
    return QueryLM.from_scores(ids, p, "ecdmm")


@dataclass
class EcdmmResult:
    model: QueryLM
    projection: ProjectionMatrix
    samples: SampleSets
    query_vector: QueryVector
    projected: QueryVector


def ecdmm_expand(index: Index, table: EmbeddingTable, F: FeedbackSet, query_terms: Sequence[str],
                 params: EcdmmParams) -> EcdmmResult:
    """Full per-query pipeline: query vector, sampling, learning, projection, feedback model."""
    vq = query_vector(table, query_terms)
    # sampling stream kept apart from the one that initializes W
    rng = np.random.default_rng(np.random.SeedSequence(params.rng_seed, spawn_key=(1,)))
    with_vec = [t for t in F.term_ids.tolist() if index.vocab[t] in table]
    pos_ids = sample_positive(F, index, params, rng, candidates=with_vec)
    neg_ids = sample_negative(F, params, rng, candidates=with_vec, index=index)
    samples = build_samples(pos_ids, neg_ids, index, table)
    proj = learn_projection(vq, samples, params)
    vq_hat = project_query(proj, vq)
    model = ecdmm_feedback_lm(vq_hat, F, table, index, params.sim, params.weighted)
    return EcdmmResult(model, proj, samples, vq, vq_hat)

