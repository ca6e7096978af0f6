# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: sparse Dirichlet score accumulation and the projection SGD loop."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log1p, sqrt, isfinite

cnp.import_array()


def accumulate_scores(const cnp.int64_t[:] term_ptr,
                      const cnp.int32_t[:] post_docs,
                      const cnp.int32_t[:] post_counts,
                      const cnp.int64_t[:] q_terms,
                      const double[:] q_weights,
                      const double[:] q_coef,
                      double[:] out):
    cdef Py_ssize_t qi, j, t
    cdef double w, coef
    with nogil:
        for qi in range(q_terms.shape[0]):
            t = q_terms[qi]
            w = q_weights[qi]
            coef = q_coef[qi]
            for j in range(term_ptr[t], term_ptr[t + 1]):
                out[post_docs[j]] += w * log1p(post_counts[j] / coef)
    return np.asarray(out)


def sgd_project(double[:, ::1] W, const double[:] vq,
                const double[:, :] pos, const double[:, :] neg,
                double alpha, double lam, double beta,
                double eta0, double decay, Py_ssize_t max_iter, double tol):
    cdef Py_ssize_t n = W.shape[0]
    cdef Py_ssize_t n_pos = pos.shape[0], n_neg = neg.shape[0]
    cdef Py_ssize_t i, j, k, t = 0
    cdef double c = alpha * n_pos - lam * n_neg
    cdef double q_pos = 0.0, q_neg = 0.0, eta, g, gnorm, pp, ps_pos, ps_neg, ww, obj
    cdef bint converged = False, diverged = False

    s_pos_a = np.zeros(n)
    s_neg_a = np.zeros(n)
    p_a = np.zeros(n)
    r_a = np.zeros(n)
    obj_a = np.empty(max_iter)
    step_a = np.empty(max_iter)
    cdef double[:] s_pos = s_pos_a, s_neg = s_neg_a, p = p_a, r = r_a
    cdef double[:] objectives = obj_a, steps = step_a

    for k in range(n_pos):
        for j in range(n):
            s_pos[j] += pos[k, j]
            q_pos += pos[k, j] * pos[k, j]
    for k in range(n_neg):
        for j in range(n):
            s_neg[j] += neg[k, j]
            q_neg += neg[k, j] * neg[k, j]

    with nogil:
        while t < max_iter:
            # p = W^T vq
            for j in range(n):
                p[j] = 0.0
            for i in range(n):
                for j in range(n):
                    p[j] += W[i, j] * vq[i]
            for j in range(n):
                r[j] = c * p[j] - (alpha * s_pos[j] - lam * s_neg[j])
            eta = eta0 / (1.0 + decay * t)
            gnorm = 0.0
            for i in range(n):
                for j in range(n):
                    g = vq[i] * r[j] - beta * W[i, j]
                    gnorm += g * g
                    W[i, j] -= eta * g
            steps[t] = eta * sqrt(gnorm)

            for j in range(n):
                p[j] = 0.0
            ww = 0.0
            for i in range(n):
                for j in range(n):
                    p[j] += W[i, j] * vq[i]
                    ww += W[i, j] * W[i, j]
            pp = 0.0
            ps_pos = 0.0
            ps_neg = 0.0
            for j in range(n):
                pp += p[j] * p[j]
                ps_pos += p[j] * s_pos[j]
                ps_neg += p[j] * s_neg[j]
            obj = (0.5 * alpha * (n_pos * pp - 2.0 * ps_pos + q_pos)
                   - 0.5 * lam * (n_neg * pp - 2.0 * ps_neg + q_neg)
                   - 0.5 * beta * ww)
            objectives[t] = obj
            t += 1
            if not isfinite(obj):
                diverged = True
                break
            if steps[t - 1] < tol:
                converged = True
                break
    return obj_a[:t].copy(), step_a[:t].copy(), bool(converged), bool(diverged)
