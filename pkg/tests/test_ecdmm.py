import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import make_index, random_corpus
from lmprf import ecdmm as ec
from lmprf.embeddings import EmbeddingTable
from lmprf.index import feedback_counts


def _samples(pos, neg):
    return ec.SampleSets([(i, np.asarray(v, float)) for i, v in enumerate(pos)],
                         [(100 + i, np.asarray(v, float)) for i, v in enumerate(neg)])


def random_instance(rng, n=8, n_pos=3, n_neg=5):
    W = rng.uniform(-1, 1, (n, n))
    vq = rng.standard_normal(n)
    samples = _samples(rng.standard_normal((n_pos, n)), rng.standard_normal((n_neg, n)))
    params = ec.EcdmmParams(alpha_pos=float(rng.uniform(0, 2)), lambda_neg=float(rng.uniform(0, 1)),
                            beta=float(rng.uniform(0, 0.5)))
    return W, vq, samples, params


def fd_gradient(W, vq, samples, params, h=1e-5):
    G = np.zeros_like(W)
    for i in range(W.shape[0]):
        for j in range(W.shape[1]):
            E = np.zeros_like(W)
            E[i, j] = h
            G[i, j] = (ec.ecdmm_objective(W + E, vq, samples, params)
                       - ec.ecdmm_objective(W - E, vq, samples, params)) / (2 * h)
    return G


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        W, vq, s, p = random_instance(rng)
        g = ec.ecdmm_gradient(W, vq, s, p)
        fd = fd_gradient(W, vq, s, p)
        rel = np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12)
        assert rel <= 1e-4


def test_objective_examples():
    p = ec.EcdmmParams(alpha_pos=0.8, lambda_neg=0.05, beta=0.0)
    I = np.eye(2)
    assert ec.ecdmm_objective(I, [1, 0], _samples([[1, 0]], []), p) == 0.0
    rng = np.random.default_rng(0)
    assert ec.ecdmm_objective(rng.standard_normal((2, 2)), [1, 0], _samples([], []), p) == 0.0
    assert ec.ecdmm_objective(I, [1, 0], _samples([[0, 1]], [[1, 1]]), p) == pytest.approx(0.775, abs=1e-15)


def test_gradient_examples():
    p = ec.EcdmmParams(beta=0.0)
    assert not ec.ecdmm_gradient(np.eye(2), [1, 0], _samples([[1, 0]], [[1, 0]]), p).any()
    W = np.array([[1.0, 2.0], [3.0, -4.0]])
    pb = ec.EcdmmParams(beta=0.3)
    assert np.allclose(ec.ecdmm_gradient(W, [1, 2], _samples([], []), pb), -0.3 * W)


def test_dimension_mismatch():
    p = ec.EcdmmParams()
    with pytest.raises(ValueError):
        ec.ecdmm_objective(np.eye(3), [1, 0], _samples([], []), p)
    with pytest.raises(ValueError):
        ec.ecdmm_gradient(np.eye(2), [1, 0], _samples([[1, 0, 0]], []), p)
    with pytest.raises(ValueError):
        ec.project_query(np.eye(3), [1, 0])


def test_project_query_examples():
    v = np.array([1.0, 2.0])
    assert np.array_equal(ec.project_query(np.eye(2), v).values, v)
    assert np.array_equal(ec.project_query(3 * np.eye(2), v).values, 3 * v)
    assert np.array_equal(ec.project_query(np.array([[0, 1], [1, 0]]), v).values, [2, 1])


def _fast(**kw):
    base = dict(lambda_neg=0.0, beta=0.0, eta0=0.1, eta_decay=0.001, max_iter=5000, conv_tol=1e-12)
    base.update(kw)
    return ec.EcdmmParams(**base)


def test_positive_only_single_target():
    rng = np.random.default_rng(1)
    vq = rng.standard_normal(6)
    target = rng.standard_normal(6)
    proj = ec.learn_projection(vq, _samples([target], []), _fast())
    assert np.linalg.norm(proj.W.T @ vq - target) <= 1e-3


def test_positive_only_converges_to_mean():
    rng = np.random.default_rng(2)
    vq = rng.standard_normal(10) / 3
    pos = rng.standard_normal((7, 10))
    proj = ec.learn_projection(vq, _samples(pos, []), _fast(alpha_pos=0.8))
    assert np.max(np.abs(ec.project_query(proj, vq).values - pos.mean(axis=0))) <= 1e-3


def test_positive_only_trace_settles_downhill():
    rng = np.random.default_rng(3)
    vq = rng.standard_normal(5) / 2
    params = ec.EcdmmParams(lambda_neg=0.0, beta=0.0, eta0=0.05, max_iter=400, conv_tol=0.0)
    proj = ec.learn_projection(vq, _samples(rng.standard_normal((4, 5)), []), params)
    tail = proj.objectives[len(proj.objectives) // 10:]
    assert all(b <= a for a, b in zip(tail, tail[1:]))
    assert proj.iterations == 400 and len(proj.step_norms) == 400


def test_learning_is_deterministic():
    rng = np.random.default_rng(4)
    W, vq, s, _ = random_instance(rng)
    p = ec.EcdmmParams(rng_seed=9, max_iter=50)
    a, b = ec.learn_projection(vq, s, p), ec.learn_projection(vq, s, p)
    assert np.array_equal(a.W, b.W) and a.objectives == b.objectives
    c = ec.learn_projection(vq, s, ec.EcdmmParams(rng_seed=10, max_iter=50))
    assert not np.array_equal(a.W, c.W)


def test_divergence_raises_with_trace():
    vq = np.full(4, 50.0)
    params = ec.EcdmmParams(lambda_neg=0.0, beta=0.0, eta0=10.0, eta_decay=0.0, max_iter=1000)
    with pytest.raises(ec.DivergenceError) as e:
        ec.learn_projection(vq, _samples([np.ones(4)], []), params)
    assert e.value.trace.iterations >= 1


def test_no_samples():
    with pytest.raises(ValueError):
        ec.learn_projection(np.ones(2), _samples([], []), ec.EcdmmParams())


def test_trace_csv():
    proj = ec.ProjectionMatrix(np.eye(1), [3.0, 2.0], [0.5, 0.25])
    assert proj.trace_csv() == "iteration,objective,step_norm\n1,3.0,0.5\n2,2.0,0.25\n"


def test_params_validation():
    for bad in [dict(alpha_pos=-1), dict(n_pos=0), dict(lambda_mix=1.0), dict(max_iter=0), dict(sim="dot")]:
        with pytest.raises(ValueError):
            ec.EcdmmParams(**bad)


def test_softmax_examples():
    assert np.allclose(ec.softmax_weights(np.array([0.3, 0.3])), [0.5, 0.5])
    assert np.allclose(ec.softmax_weights(np.array([0.0, math.log(3)])), [0.25, 0.75], atol=1e-15)
    assert np.allclose(ec.softmax_weights(np.array([1.0, 1.0]), np.array([1.0, 3.0])), [0.25, 0.75])


@settings(max_examples=60)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=8), st.floats(-100, 100))
def test_softmax_shift_invariance(sims, c):
    s = np.array(sims)
    assert np.allclose(ec.softmax_weights(s), ec.softmax_weights(s + c), rtol=0, atol=1e-12)
    assert math.fsum(ec.softmax_weights(s)) == pytest.approx(1, abs=1e-9)


def test_weighted_equals_unweighted_for_equal_counts():
    idx = make_index({"a": "x y z", "b": "x y z w"})
    F = feedback_counts(idx, [0])
    table = EmbeddingTable(["x", "y", "z"], np.random.default_rng(0).standard_normal((3, 4)))
    q = np.ones(4)
    for sim in ("cosine", "sigmoid"):
        w = ec.ecdmm_feedback_lm(q, F, table, idx, sim, True).weights
        u = ec.ecdmm_feedback_lm(q, F, table, idx, sim, False).weights
        assert w.keys() == u.keys() and all(abs(w[k] - u[k]) < 1e-15 for k in w)


def test_feedback_lm_without_vectors():
    idx = make_index({"a": "x y"})
    with pytest.raises(KeyError):
        ec.ecdmm_feedback_lm(np.ones(2), feedback_counts(idx, [0]), EmbeddingTable(["q"], np.ones((1, 2))),
                             idx)


def test_negative_weights_power():
    idx = make_index({"a": "r r r r s", "b": "u v"})
    F = feedback_counts(idx, [0])
    w = ec.negative_weights(F)
    assert w[list(F.term_ids).index(idx.term_id("r"))] == pytest.approx(0.8 ** 0.75 / (0.8 ** 0.75 + 0.2 ** 0.75))
    assert np.allclose(w, [0.7388, 0.2612], atol=1e-4)
    uni = feedback_counts(make_index({"a": "p q r"}), [0])
    assert np.allclose(ec.negative_weights(uni), 1 / 3)


def test_positive_weights():
    # equal p_ml in F, collection probability 0.1 vs 0.001: the rarer term wins
    common = " ".join(["c"] * 99 + ["r"] + ["o"] * 900)
    idx = make_index({"f": "c r", "bg": common})
    assert idx.coll_freq[idx.term_id("c")] / idx.total_tokens == pytest.approx(0.1, abs=1e-3)
    F = feedback_counts(idx, [0])
    w = ec.positive_weights(F, idx, 0.9)
    assert w[list(F.term_ids).index(idx.term_id("r"))] > w[list(F.term_ids).index(idx.term_id("c"))]
    assert np.allclose(ec.positive_weights(F, idx, 0.0), F.p_ml())


def test_sampling_is_distinct_capped_and_seeded():
    rng = np.random.default_rng(0)
    idx = random_corpus(rng, n_docs=5, n_terms=20)
    F = feedback_counts(idx, [0, 1])
    p = ec.EcdmmParams(n_pos=5, n_neg=100)
    a = ec.sample_positive(F, idx, p, np.random.default_rng(1))
    b = ec.sample_positive(F, idx, p, np.random.default_rng(1))
    assert a == b and len(a) == 5 == len(set(a))
    neg = ec.sample_negative(F, p, np.random.default_rng(2))
    assert sorted(neg) == sorted(F.term_ids.tolist())
    only = ec.sample_positive(F, idx, p, np.random.default_rng(1), candidates=[int(F.term_ids[0])])
    assert only == [int(F.term_ids[0])]
    with pytest.raises(ValueError):
        ec.sample_negative(F, p, np.random.default_rng(1), candidates=[])


def test_expand_end_to_end_is_deterministic():
    rng = np.random.default_rng(5)
    idx = random_corpus(rng, n_docs=5, n_terms=20)
    table = oracles.random_table(rng, idx)
    F = feedback_counts(idx, [0, 2, 3])
    q = [t for t in idx.vocab if t in table][:2]
    p = ec.EcdmmParams(rng_seed=3, max_iter=100)
    a, b = ec.ecdmm_expand(idx, table, F, q, p), ec.ecdmm_expand(idx, table, F, q, p)
    assert a.model.weights == b.model.weights
    assert all(idx.vocab[t] in table for t in a.model.weights)
    assert len(a.samples.positives) <= p.n_pos and len(a.samples.negatives) <= p.n_neg


def test_topic_seed_depends_on_topic():
    assert ec.topic_seed(0, "51") != ec.topic_seed(0, "52")
    assert ec.topic_seed(1, "51") == ec.topic_seed(1, "51")
    assert ec.EcdmmParams(rng_seed=4).with_seed_for("9").rng_seed == ec.topic_seed(4, "9")
