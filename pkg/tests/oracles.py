"""Exhaustive-loop reference implementations, written from the model definitions
with plain floats and no shared helpers from the package."""

import math


from lmprf.embeddings import EmbeddingTable
from lmprf.index import feedback_counts
from lmprf.retrieval import QueryLM


def p_doc(idx, w, d, mu):
    p_c = idx.coll_freq[w] / idx.total_tokens
    return (idx.count(w, d) + mu * p_c) / (int(idx.doc_len[d]) + mu)


def p_coll(idx, w):
    return idx.coll_freq[w] / idx.total_tokens


def support(idx, docs):
    return sorted({w for w in range(idx.n_terms) for d in docs if idx.count(w, d) > 0})


def normalize(scores):
    z = math.fsum(scores.values())
    return {w: s / z for w, s in scores.items()}


def rm1(idx, docs, query, mu):
    prior = 1.0 / len(docs)
    out = {}
    for w in support(idx, docs):
        total = 0.0
        for d in docs:
            ql = 1.0
            for q in query:
                ql *= p_doc(idx, q, d, mu)
            total += prior * p_doc(idx, w, d, mu) * ql
        out[w] = total
    return normalize(out)


def rm2(idx, docs, query, mu):
    prior = 1.0 / len(docs)
    out = {}
    for w in support(idx, docs):
        pw = p_coll(idx, w)
        prod = pw
        for q in query:
            s = 0.0
            for d in docs:
                # p(theta_d | w) by Bayes with marginal p(w)
                s += p_doc(idx, q, d, mu) * p_doc(idx, w, d, mu) * prior / pw
            prod *= s
        out[w] = prod
    return normalize(out)


def dmm(idx, docs, lam, mu):
    out = {}
    for w in support(idx, docs):
        avg = sum(math.log(p_doc(idx, w, d, mu)) for d in docs) / len(docs)
        out[w] = math.exp(avg / (1 - lam) - lam / (1 - lam) * math.log(p_coll(idx, w)))
    return normalize(out)


def medmm(idx, docs, lam, beta, mu, weights=None):
    weights = weights or [1.0 / len(docs)] * len(docs)
    out = {}
    for w in support(idx, docs):
        s = sum(a * math.log(p_doc(idx, w, d, mu)) for a, d in zip(weights, docs))
        out[w] = math.exp((s - lam * math.log(p_coll(idx, w))) / beta)
    return normalize(out)


def max_abs_diff(lm: QueryLM, ref: dict):
    assert set(lm.weights) == set(ref)
    return max(abs(lm.weights[w] - ref[w]) for w in ref)


def random_table(rng, index, dim=8, coverage=0.8):
    """Random vectors for a random subset (at least one) of the vocabulary."""
    keep = [t for t in index.vocab if rng.random() < coverage] or [index.vocab[0]]
    return EmbeddingTable(keep, rng.standard_normal((len(keep), dim)))


def random_feedback(rng, index, max_docs=4):
    k = int(rng.integers(1, min(max_docs, index.n_docs) + 1))
    return feedback_counts(index, sorted(rng.choice(index.n_docs, size=k, replace=False).tolist()))
