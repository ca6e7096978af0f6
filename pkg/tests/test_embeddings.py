import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lmprf.corpus_io import ParseError
from lmprf.embeddings import (EmbeddingTable, collapse_to_stems, cosine_sim, cosine_sims, load_embeddings,
                              query_vector, save_embeddings, sigmoid_sim, sigmoid_sims)


def test_glove_row(tmp_path):
    (tmp_path / "v.txt").write_text("cat 0.1 0.2\n")
    t = load_embeddings(tmp_path / "v.txt")
    assert t.dim == 2 and np.array_equal(t["cat"], [0.1, 0.2])


def test_word2vec_header(tmp_path):
    (tmp_path / "v.txt").write_text("2 3\na 1 2 3\nb 4 5 6\n")
    t = load_embeddings(tmp_path / "v.txt")
    assert len(t) == 2 and t.dim == 3


def test_ragged_row(tmp_path):
    (tmp_path / "v.txt").write_text("a 1 2 3\nb 1 2\n")
    with pytest.raises(ParseError, match=":2:"):
        load_embeddings(tmp_path / "v.txt")


def test_duplicate_last_wins(tmp_path, caplog):
    (tmp_path / "v.txt").write_text("a 1 2\na 3 4\n")
    t = load_embeddings(tmp_path / "v.txt")
    assert np.array_equal(t["a"], [3, 4]) and len(t) == 1
    assert "duplicate" in caplog.text


@pytest.mark.parametrize("fmt", ["word2vec", "glove"])
def test_round_trip(tmp_path, fmt):
    t = EmbeddingTable(["x", "y"], np.array([[0.5, -1.25], [1e-3, 7.0]]))
    save_embeddings(t, tmp_path / "v", fmt)
    back = load_embeddings(tmp_path / "v", fmt)
    assert back.terms == t.terms and np.array_equal(back.matrix, t.matrix)


def test_query_vector_examples():
    t = EmbeddingTable(["a", "b", "c"], np.array([[2.0, 0.0], [-1.0, 3.0], [0.0, 1.0]]))
    assert np.array_equal(query_vector(t, ["c"]).values, [0, 1])
    u = EmbeddingTable(["p", "q"], np.eye(2))
    assert np.allclose(query_vector(u, ["p", "q"]).values, [0.5, 0.5])
    assert np.allclose(query_vector(t, ["a", "a", "b"]).values, [1, 1])
    assert np.allclose(query_vector(t, ["c", "missing"]).values, [0, 1])
    with pytest.raises(KeyError):
        query_vector(t, ["missing"])


def test_sigmoid_examples():
    assert sigmoid_sim([1, 0], [0, 1]) == 0.5
    assert sigmoid_sim([6, 0], [6, 0]) >= 1 - 1e-9
    assert sigmoid_sim([1, 1], [1, 0]) == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-15)
    assert sigmoid_sim([-800.0], [1.0]) == 0.0
    with pytest.raises(ValueError):
        sigmoid_sim([1, 2], [1])


def test_cosine_examples():
    assert cosine_sim([3, 4], [3, 4]) == pytest.approx(1.0)
    assert cosine_sim([1, 0], [0, 2]) == 0.0
    assert cosine_sim([1, 0], [1, 1]) == pytest.approx(math.sqrt(0.5), abs=1e-15)
    with pytest.raises(ValueError):
        cosine_sim([0, 0], [1, 1])


vecs = arrays(np.float64, 4, elements=st.floats(-5, 5, allow_nan=False))


@settings(max_examples=60)
@given(vecs, st.lists(vecs, min_size=1, max_size=5))
def test_vectorized_matches_scalar(q, rows):
    M = np.array(rows)
    assert np.allclose(sigmoid_sims(q, M), [sigmoid_sim(q, r) for r in rows], atol=1e-12)
    if np.linalg.norm(q) > 1e-3 and all(np.linalg.norm(r) > 1e-3 for r in rows):
        c = cosine_sims(q, M)
        assert np.allclose(c, [cosine_sim(q, r) for r in rows], atol=1e-12)
        assert np.all(np.abs(c) <= 1 + 1e-12)


def test_collapse_to_stems():
    t = EmbeddingTable(["running", "runs", "cat"], np.array([[1.0, 0.0], [3.0, 2.0], [5.0, 5.0]]))
    c = collapse_to_stems(t, lambda w: "run" if w.startswith("run") else w)
    assert set(c.terms) == {"run", "cat"}
    assert np.allclose(c["run"], [2.0, 1.0])
