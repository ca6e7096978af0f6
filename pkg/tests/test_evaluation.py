import math

import pytest
from hypothesis import given, settings, strategies as st

from lmprf.corpus_io import Qrels
from lmprf.evaluation import (EvalResult, QueryMetrics, average_precision, compare_runs, cross_validate_alpha,
                              evaluate, format_per_query, format_report, paired_t_test, precision_at_k,
                              read_run, sort_topics)


def test_average_precision_fixtures():
    assert average_precision(["a", "b"], {"a"}) == 1.0
    assert average_precision(["a", "x", "b"], {"a", "b"}) == (1 + 2 / 3) / 2
    assert average_precision(["x", "y"], {"a"}) == 0.0
    assert average_precision(["a"], {"a", "b"}) == 0.5
    with pytest.raises(ValueError):
        average_precision(["a"], set())


def test_precision_fixtures():
    assert precision_at_k(list("abcde"), set("abcde"), 5) == 1.0
    ranked = list("abcdefghij")
    assert precision_at_k(ranked, {"a", "e", "j", "z"}, 10) == 0.3
    assert precision_at_k(["a", "b"], {"a"}, 5) == 0.2
    with pytest.raises(ValueError):
        precision_at_k(ranked, {"a"}, 0)


def test_t_test_table_oracle():
    assert paired_t_test([2, 3, 4], [1, 1, 1]) == pytest.approx(0.0742, abs=5e-4)
    assert paired_t_test([0.1, 0.5], [0.1, 0.5]) == 1.0
    assert paired_t_test([6, 7, 8, 9], [1, 2, 3, 4]) < 1e-12
    with pytest.raises(ValueError):
        paired_t_test([1, 2], [1])


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=2, max_size=20))
def test_t_test_symmetric(pairs):
    a, b = [x for x, _ in pairs], [y for _, y in pairs]
    p = paired_t_test(a, b)
    assert 0.0 <= p <= 1.0
    assert p == pytest.approx(paired_t_test(b, a), abs=1e-12)


@settings(max_examples=50)
@given(st.lists(st.booleans(), min_size=1, max_size=30), st.integers(1, 5))
def test_metrics_depend_only_on_order(flags, extra_rel):
    ranked = [f"d{i}" for i in range(len(flags))]
    relevant = {d for d, f in zip(ranked, flags) if f} | {f"missing{i}" for i in range(extra_rel)}
    ap = average_precision(ranked, relevant)
    assert 0.0 <= ap <= 1.0
    hits, total = 0, 0.0
    for k, f in enumerate(flags, 1):
        if f:
            hits += 1
            total += hits / k
    assert ap == pytest.approx(total / len(relevant), abs=1e-15)


def _qrels(rows):
    q = Qrels()
    for t, d, g in rows:
        q.add(t, d, g)
    return q


def test_evaluate_excludes_topics_without_relevant():
    q = _qrels([("1", "a", 1), ("2", "b", 0)])
    r = evaluate({"1": ["a"], "2": ["b"]}, q)
    assert list(r.per_query) == ["1"] and r.map == 1.0


def test_map_is_mean_ap():
    q = _qrels([("1", "a", 1), ("2", "b", 2), ("2", "c", 1)])
    run = {"1": ["x", "a"], "2": ["b", "y", "c"]}
    r = evaluate(run, q)
    assert r.map == pytest.approx((0.5 + (1 + 2 / 3) / 2) / 2, abs=1e-12)


def test_read_run_and_reports(tmp_path):
    (tmp_path / "r").write_text("1 Q0 b 2 0.5 t\n1 Q0 a 1 0.9 t\n")
    run = read_run(tmp_path / "r")
    assert run.tag == "t" and run.ranked("1") == ["a", "b"]
    res = evaluate(run, _qrels([("1", "b", 1)]))
    assert format_report({"t": res}) == "method\tMAP\tP@5\tP@10\nt\t0.5000\t0.2000\t0.1000\n"
    assert format_per_query(res).splitlines()[1] == "1,0.500000,0.200000,0.100000"


def test_natural_topic_sort():
    assert sort_topics(["100", "9", "51", "a2", "a10"]) == ["9", "51", "100", "a2", "a10"]


def _fake(table):
    """evaluate_fn over per-alpha AP tables."""
    def fn(alpha, topics):
        return {t: QueryMetrics(table[alpha][t], 0.0, 0.0) for t in topics}
    return fn


def test_cv_single_point_grid():
    topics = ["1", "2", "3", "4"]
    cv = cross_validate_alpha(topics, [0.4], _fake({0.4: dict.fromkeys(topics, 0.5)}))
    assert cv.fold_alphas == [0.4, 0.4]
    assert cv.folds == [["1", "3"], ["2", "4"]]


def test_cv_selection_and_pooling():
    topics = ["1", "2", "3", "4"]
    table = {0.0: {"1": 0.2, "2": 0.9, "3": 0.3, "4": 0.1},
             1.0: {"1": 0.8, "2": 0.2, "3": 0.6, "4": 0.7}}
    cv = cross_validate_alpha(topics, [0.0, 1.0], _fake(table))
    # fold 0 = {1,3} trained on {2,4}: 0.0 -> .5, 1.0 -> .45 ; fold 1 trained on {1,3}: 1.0 wins
    assert cv.fold_alphas == [0.0, 1.0]
    pooled = [table[0.0]["1"], table[1.0]["2"], table[0.0]["3"], table[1.0]["4"]]
    assert cv.result.map == pytest.approx(math.fsum(pooled) / 4, abs=1e-15)


def test_cv_ties_pick_smaller_alpha():
    topics = ["1", "2"]
    cv = cross_validate_alpha(topics, [0.7, 0.2], _fake({a: {"1": 0.5, "2": 0.5} for a in (0.2, 0.7)}))
    assert cv.fold_alphas == [0.2, 0.2]


def test_cv_errors():
    with pytest.raises(ValueError):
        cross_validate_alpha(["1"], [0.5], _fake({}))
    with pytest.raises(ValueError):
        cross_validate_alpha(["1", "2"], [], _fake({}))


def test_compare_marks_significant_gains():
    base = EvalResult({str(i): QueryMetrics(0.1 + 0.01 * i, 0, 0) for i in range(10)})
    better = EvalResult({str(i): QueryMetrics(0.5 + 0.011 * i, 0, 0) for i in range(10)})
    table = compare_runs({"base": base, "new": better}, ["base"])
    rows = dict(line.split("\t", 1) for line in table.splitlines()[1:])
    assert rows["new"].endswith("\t1") and rows["base"].endswith("\t-")
