"""Pure-numpy versions of the compiled kernels in ``_core.pyx``.

Signatures and results match the Cython module; only summation order differs.
"""

from __future__ import annotations

import numpy as np


def accumulate_scores(term_ptr, post_docs, post_counts, q_terms, q_weights, q_coef, out):
    """Add ``w * log1p(c(t,d) / coef_t)`` into ``out[d]`` for every posting of every query term."""
    for t, w, coef in zip(q_terms, q_weights, q_coef):
        lo, hi = term_ptr[t], term_ptr[t + 1]
        if lo == hi:
            continue
        docs = post_docs[lo:hi]
        out[docs] += w * np.log1p(post_counts[lo:hi] / coef)
    return out


def sgd_project(W, vq, pos, neg, alpha, lam, beta, eta0, decay, max_iter, tol):
    """Gradient descent on the projection objective, updating ``W`` in place.

    Returns ``(objectives, step_norms, converged, diverged)``; ``objectives[t]``
    is the objective after update ``t``.
    """
    # overflow only happens on the way to a non-finite objective, which is reported
    with np.errstate(over="ignore", invalid="ignore"):
        return _sgd(W, vq, pos, neg, alpha, lam, beta, eta0, decay, max_iter, tol)


def _sgd(W, vq, pos, neg, alpha, lam, beta, eta0, decay, max_iter, tol):
    n_pos = pos.shape[0]
    n_neg = neg.shape[0]
    s_pos = pos.sum(axis=0)
    s_neg = neg.sum(axis=0)
    q_pos = float(np.einsum("ij,ij->", pos, pos))
    q_neg = float(np.einsum("ij,ij->", neg, neg))
    c = alpha * n_pos - lam * n_neg
    s = alpha * s_pos - lam * s_neg

    objectives = np.empty(max_iter)
    steps = np.empty(max_iter)
    converged = diverged = False
    t = 0
    while t < max_iter:
        p = W.T @ vq
        grad = np.outer(vq, c * p - s)
        grad -= beta * W
        eta = eta0 / (1.0 + decay * t)
        W -= eta * grad
        steps[t] = eta * np.sqrt(np.einsum("ij,ij->", grad, grad))

        p = W.T @ vq
        pp = p @ p
        obj = (
            0.5 * alpha * (n_pos * pp - 2.0 * (p @ s_pos) + q_pos)
            - 0.5 * lam * (n_neg * pp - 2.0 * (p @ s_neg) + q_neg)
            - 0.5 * beta * np.einsum("ij,ij->", W, W)
        )
        objectives[t] = obj
        t += 1
        if not np.isfinite(obj):
            diverged = True
            break
        if steps[t - 1] < tol:
            converged = True
            break
    return objectives[:t].copy(), steps[:t].copy(), converged, diverged
