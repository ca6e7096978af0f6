"""Baseline feedback models estimated from the top-ranked documents.

Relevance models (RM1/RM2), the two-component mixture fitted by EM, divergence
minimization (DMM), its maximum-entropy generalization (MEDMM) and
matrix-factorization query re-weighting (RFMF).  Every model is supported on
the terms occurring in the feedback documents; document models are
Dirichlet-smoothed with the retrieval ``mu``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .index import FeedbackSet, Index
from .retrieval import DEFAULT_MU, QueryLM

logger = logging.getLogger(__name__)

FeedbackLM = QueryLM


class DegenerateFeedbackError(ValueError):
    """The feedback documents assign no probability to the query."""


@dataclass
class MixtureTrace:
    iterations: int = 0
    loglik: list[float] = field(default_factory=list)
    converged: bool = False


@dataclass
class NmfFactors:
    U: np.ndarray
    V: np.ndarray
    residuals: list[float]
    columns: np.ndarray  # term id of each column of V


def doc_count_matrix(index: Index, doc_ords: Sequence[int], term_ids: np.ndarray) -> np.ndarray:
    """``C[i, j] = c(term_ids[j], doc_ords[i])`` for sorted ``term_ids``."""
    C = np.zeros((len(doc_ords), len(term_ids)))
    for i, d in enumerate(doc_ords):
        terms, counts = index.doc_vector(d)
        pos = np.searchsorted(term_ids, terms)
        ok = pos < len(term_ids)
        ok[ok] = term_ids[pos[ok]] == terms[ok]
        C[i, pos[ok]] = counts[ok]
    return C


def smoothed_doc_models(index: Index, doc_ords: Sequence[int], term_ids: np.ndarray,
                        mu: float = DEFAULT_MU) -> np.ndarray:
    """Dirichlet document models restricted to ``term_ids``: shape ``(len(doc_ords), len(term_ids))``."""
    C = doc_count_matrix(index, doc_ords, term_ids)
    p_c = index.coll_freq[term_ids] / index.total_tokens
    dl = index.doc_len[list(doc_ords)].astype(float)
    return (C + mu * p_c) / (dl + mu)[:, None]


def _normalize_log(term_ids: np.ndarray, log_scores: np.ndarray, method: str) -> QueryLM:
    if not np.any(np.isfinite(log_scores)):
        raise DegenerateFeedbackError(f"{method}: every candidate term has zero score")
    w = np.exp(log_scores - np.max(log_scores))
    return QueryLM.from_scores(term_ids, w, method)


def _uniform_prior(F: FeedbackSet, prior):
    if prior is None:
        return np.full(F.size, 1.0 / F.size)
    prior = np.asarray(prior, dtype=float)
    if prior.shape != (F.size,) or np.any(prior < 0):
        raise ValueError("document prior must be a nonnegative vector of length |F|")
    return prior


def _query_likelihoods(index, F, query_terms, mu):
    q = np.asarray(sorted(set(query_terms)), dtype=np.int64)
    reps = np.array([list(query_terms).count(t) for t in q], dtype=float)
    Pq = smoothed_doc_models(index, F.doc_ords, q, mu)  # |F| x |unique q|
    return Pq, reps


def rm1(index: Index, F: FeedbackSet, query_terms: Sequence[int], mu: float = DEFAULT_MU,
        prior=None) -> QueryLM:
    """Relevance model 1: query-likelihood weighted average of document models."""
    if not len(query_terms):
        raise DegenerateFeedbackError("rm1: empty query")
    prior = _uniform_prior(F, prior)
    Pq, reps = _query_likelihoods(index, F, query_terms, mu)
    with np.errstate(divide="ignore"):
        log_ql = np.log(Pq) @ reps + np.log(prior)
    if not np.any(np.isfinite(log_ql)):
        raise DegenerateFeedbackError("rm1: all query likelihoods are zero")
    doc_w = np.exp(log_ql - np.max(log_ql))
    P = smoothed_doc_models(index, F.doc_ords, F.term_ids, mu)
    return QueryLM.from_scores(F.term_ids, doc_w @ P, "rm1")


def rm2(index: Index, F: FeedbackSet, query_terms: Sequence[int], mu: float = DEFAULT_MU,
        prior=None) -> QueryLM:
    """Relevance model 2: terms drawn first, query terms conditionally independent given the term.

    The term marginal p(w) is the collection model.
    """
    if not len(query_terms):
        raise DegenerateFeedbackError("rm2: empty query")
    prior = _uniform_prior(F, prior)
    Pq, reps = _query_likelihoods(index, F, query_terms, mu)
    P = smoothed_doc_models(index, F.doc_ords, F.term_ids, mu)
    p_w = index.coll_freq[F.term_ids] / index.total_tokens
    inner = Pq.T @ (prior[:, None] * P)  # |unique q| x |terms|
    m = reps.sum()
    with np.errstate(divide="ignore"):
        log_s = (1.0 - m) * np.log(p_w) + reps @ np.log(inner)
    return _normalize_log(F.term_ids, log_s, "rm2")


def _mixture_loglik(counts, p, p_c, lam):
    return math.fsum(counts * np.log((1.0 - lam) * p + lam * p_c))


def mixture_em(index: Index, F: FeedbackSet, lambda_mix: float = 0.9, tol: float = 1e-9,
               max_iter: int = 500) -> tuple[QueryLM, MixtureTrace]:
    """Two-component mixture (topic + collection background) fitted by EM.

    Starts from the maximum-likelihood feedback model; stops when no term
    probability moves by ``tol`` or more.
    """
    if not 0.0 <= lambda_mix < 1.0:
        raise ValueError("lambda_mix must be in [0, 1)")
    c = F.counts.astype(float)
    p_c = index.coll_freq[F.term_ids] / index.total_tokens
    p = F.p_ml()
    trace = MixtureTrace(loglik=[_mixture_loglik(c, p, p_c, lambda_mix)])
    for _ in range(max_iter):
        topical = (1.0 - lambda_mix) * p
        t = topical / (topical + lambda_mix * p_c)
        ct = c * t
        p_new = ct / ct.sum()
        ll = _mixture_loglik(c, p_new, p_c, lambda_mix)
        if ll < trace.loglik[-1]:
            # only rounding is left to change; keep the better iterate
            trace.converged = True
            break
        change = float(np.max(np.abs(p_new - p)))
        p = p_new
        trace.iterations += 1
        trace.loglik.append(ll)
        if change < tol:
            trace.converged = True
            break
    if not trace.converged:
        logger.info("mixture EM stopped after %d iterations without converging", trace.iterations)
    return QueryLM.from_scores(F.term_ids, p, "mixture"), trace


def dmm(index: Index, F: FeedbackSet, lam: float = 0.5, mu: float = DEFAULT_MU) -> QueryLM:
    """Divergence minimization: close to every feedback document, far from the collection."""
    if not 0.0 <= lam < 1.0:
        raise ValueError("dmm lambda must be in [0, 1)")
    P = smoothed_doc_models(index, F.doc_ords, F.term_ids, mu)
    p_c = index.coll_freq[F.term_ids] / index.total_tokens
    log_s = np.log(P).mean(axis=0) / (1.0 - lam) - lam / (1.0 - lam) * np.log(p_c)
    return _normalize_log(F.term_ids, log_s, "dmm")


def _doc_weights(F, doc_weights):
    if doc_weights is None:
        return np.full(F.size, 1.0 / F.size)
    a = np.asarray(doc_weights, dtype=float)
    if a.shape != (F.size,):
        raise ValueError("one weight per feedback document required")
    return a


def medmm(index: Index, F: FeedbackSet, lam: float = 0.1, beta: float = 1.2, mu: float = DEFAULT_MU,
          doc_weights=None) -> QueryLM:
    """Maximum-entropy divergence minimization, via its closed-form minimizer

    ``p(w) ∝ exp((Σ_d a_d log p(w|d) - lam log p(w|C)) / beta)``.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    a = _doc_weights(F, doc_weights)
    P = smoothed_doc_models(index, F.doc_ords, F.term_ids, mu)
    p_c = index.coll_freq[F.term_ids] / index.total_tokens
    log_s = (a @ np.log(P) - lam * np.log(p_c)) / beta
    return _normalize_log(F.term_ids, log_s, "medmm")


def medmm_objective(theta: np.ndarray, index: Index, F: FeedbackSet, lam: float, beta: float,
                    mu: float = DEFAULT_MU, doc_weights=None) -> float:
    """``Σ_d a_d H(θ, θ_d) - lam H(θ, θ_C) - beta H(θ)`` for ``theta`` over ``F.term_ids``."""
    a = _doc_weights(F, doc_weights)
    theta = np.asarray(theta, dtype=float)
    P = smoothed_doc_models(index, F.doc_ords, F.term_ids, mu)
    p_c = index.coll_freq[F.term_ids] / index.total_tokens
    cross_docs = -(np.log(P) @ theta)
    cross_coll = -float(theta @ np.log(p_c))
    nz = theta > 0
    entropy = -float(theta[nz] @ np.log(theta[nz]))
    return float(a @ cross_docs) - lam * cross_coll - beta * entropy


def nmf_multiplicative(A: np.ndarray, rank: int, iters: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lee-Seung multiplicative updates for ``min ||A - UV||_F`` with ``U, V >= 0``.

    Returns ``(U, V, residuals)`` with one Frobenius residual per iteration.
    Stops early once an update fails to lower the residual, which only
    happens at the floating-point floor; the previous factors are kept.
    """
    m, n = A.shape
    scale = math.sqrt(A.mean() / rank)
    U = rng.random((m, rank)) * scale
    V = rng.random((rank, n)) * scale
    tiny = np.finfo(float).tiny
    residuals = []
    for _ in range(iters):
        V_new = V * (U.T @ A) / np.maximum(U.T @ U @ V, tiny)
        U_new = U * (A @ V_new.T) / np.maximum(U @ (V_new @ V_new.T), tiny)
        r = float(np.linalg.norm(A - U_new @ V_new))
        if residuals and r > residuals[-1]:
            break
        U, V = U_new, V_new
        residuals.append(r)
    return U, V, residuals


def rfmf_factorize(index: Index, F: FeedbackSet, original: QueryLM, rank: int = 5, iters: int = 200,
                   rng_seed: int = 0) -> NmfFactors:
    """Factorize the feedback-document/query count matrix.

    Rows are the feedback documents followed by the query; the query row is
    the query model scaled to the mean feedback-document length.
    """
    columns = np.union1d(F.term_ids, np.fromiter(original.weights, dtype=np.int64))
    n_rows = F.size + 1
    if not 1 <= rank <= min(n_rows, len(columns)):
        raise ValueError(f"rank {rank} outside [1, {min(n_rows, len(columns))}]")
    A = np.zeros((n_rows, len(columns)))
    A[:-1] = doc_count_matrix(index, F.doc_ords, columns)
    mean_len = float(index.doc_len[list(F.doc_ords)].mean())
    pos = np.searchsorted(columns, list(original.weights))
    A[-1, pos] = np.array(list(original.weights.values())) * mean_len
    if not A.any():
        raise ValueError("rfmf: all-zero term matrix")
    U, V, residuals = nmf_multiplicative(A, rank, iters, np.random.default_rng(rng_seed))
    return NmfFactors(U, V, residuals, columns)


def rfmf(index: Index, F: FeedbackSet, original: QueryLM, rank: int = 5, iters: int = 200,
         rng_seed: int = 0) -> QueryLM:
    """Re-weighted query model: the query row of the rank-``rank`` reconstruction."""
    fac = rfmf_factorize(index, F, original, rank, iters, rng_seed)
    row = np.clip(fac.U[-1] @ fac.V, 0.0, None)
    return QueryLM.from_scores(fac.columns, row, "rfmf")


def truncate_terms(lm: QueryLM, top_k: int, vocab: Sequence[str] | None = None) -> QueryLM:
    """Keep the ``top_k`` heaviest terms (ties by term string) and renormalize."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if len(lm) <= top_k:
        return lm
    kept = lm.items_sorted(vocab)[:top_k]
    total = math.fsum(w for _, w in kept)
    return QueryLM({t: w / total for t, w in kept}, lm.method)
