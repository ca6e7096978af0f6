"""Run scoring (AP, P@k), paired t-tests and cross-validation of the interpolation weight."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from scipy import stats

from .corpus_io import ParseError, Qrels

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryMetrics:
    ap: float
    p5: float
    p10: float


@dataclass
class EvalResult:
    per_query: dict[str, QueryMetrics]

    @property
    def map(self) -> float:
        return _mean(m.ap for m in self.per_query.values())

    @property
    def p5(self) -> float:
        return _mean(m.p5 for m in self.per_query.values())

    @property
    def p10(self) -> float:
        return _mean(m.p10 for m in self.per_query.values())

    def aggregate(self) -> dict[str, float]:
        return {"MAP": self.map, "P@5": self.p5, "P@10": self.p10}


def _mean(xs: Iterable[float]) -> float:
    xs = list(xs)
    return math.fsum(xs) / len(xs) if xs else 0.0


@dataclass
class RunFile:
    """Ranked ``(doc_id, score)`` lists per topic."""

    tag: str
    runs: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def ranked(self, topic_id: str) -> list[str]:
        return [d for d, _ in self.runs.get(topic_id, [])]


def read_run(path: str | Path) -> RunFile:
    """Read a TREC run; lines are re-sorted by rank within each topic."""
    rows: dict[str, list[tuple[int, str, float]]] = {}
    tag = ""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ParseError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            try:
                rank, score = int(parts[3]), float(parts[4])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad rank or score") from None
            rows.setdefault(parts[0], []).append((rank, parts[2], score))
            tag = parts[5]
    run = RunFile(tag)
    for t, entries in rows.items():
        entries.sort()
        run.runs[t] = [(d, s) for _, d, s in entries]
    return run


def average_precision(ranked: Sequence[str], relevant: set[str]) -> float:
    if not relevant:
        raise ValueError("average precision undefined without relevant documents")
    hits = 0
    total = 0.0
    seen = set()
    for k, d in enumerate(ranked, 1):
        if d in relevant and d not in seen:
            hits += 1
            total += hits / k
        seen.add(d)
    return total / len(relevant)


def precision_at_k(ranked: Sequence[str], relevant: set[str], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for d in ranked[:k] if d in relevant) / k


def evaluate_topic(ranked: Sequence[str], relevant: set[str]) -> QueryMetrics:
    return QueryMetrics(
        average_precision(ranked, relevant),
        precision_at_k(ranked, relevant, 5),
        precision_at_k(ranked, relevant, 10),
    )


def evaluate(run: RunFile | Mapping[str, Sequence[str]], qrels: Qrels,
             topics: Iterable[str] | None = None) -> EvalResult:
    """Score every topic that has at least one relevant document.

    ``topics`` defaults to the topics present in the run; a listed topic with
    no retrieved documents scores zero.
    """
    ranked_of = run.ranked if isinstance(run, RunFile) else (lambda t: list(run.get(t, [])))
    if topics is None:
        topics = run.runs if isinstance(run, RunFile) else run
    rel = qrels.relevant_by_topic()
    per_query = {}
    for t in topics:
        relevant = rel.get(t, set())
        if not relevant:
            logger.info("topic %s has no relevant documents; excluded", t)
            continue
        per_query[t] = evaluate_topic(ranked_of(t), relevant)
    return EvalResult(per_query)


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-tailed paired Student t-test p-value.

    All-zero differences give 1.0; zero variance with a nonzero mean gives 0.0.
    """
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    if len(a) < 2:
        raise ValueError("need at least two pairs")
    diffs = [x - y for x, y in zip(a, b)]
    n = len(diffs)
    mean = math.fsum(diffs) / n
    var = math.fsum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / math.sqrt(var / n)
    return float(2.0 * stats.t.sf(abs(t), n - 1))


def _topic_key(t: str):
    return [(0, int(p), "") if p.isdigit() else (1, 0, p) for p in re.split(r"(\d+)", t) if p]


def sort_topics(topic_ids: Iterable[str]) -> list[str]:
    """Natural order: numeric runs compare as numbers (``"9" < "51" < "100"``)."""
    return sorted(topic_ids, key=_topic_key)


@dataclass
class CVResult:
    fold_alphas: list[float]
    folds: list[list[str]]
    result: EvalResult


def cross_validate_alpha(topics: Sequence[str], grid: Sequence[float],
                         evaluate_fn: Callable[[float, Sequence[str]], Mapping[str, QueryMetrics]],
                         folds: int = 2) -> CVResult:
    """Pick the interpolation weight on one fold, apply it to the other.

    Topics are split by position in natural sort order (even / odd).
    ``evaluate_fn(alpha, topic_ids)`` returns per-topic metrics for the
    topics it could evaluate.  MAP ties go to the smaller alpha.
    """
    if folds != 2:
        raise ValueError("only 2-fold cross-validation is supported")
    if len(topics) < 2:
        raise ValueError("need at least two topics")
    if not grid:
        raise ValueError("empty alpha grid")
    ordered = sort_topics(topics)
    split = [ordered[0::2], ordered[1::2]]
    grid = sorted(grid)
    cache: dict[float, Mapping[str, QueryMetrics]] = {}

    def metrics(alpha):
        if alpha not in cache:
            cache[alpha] = evaluate_fn(alpha, ordered)
        return cache[alpha]

    chosen = []
    pooled: dict[str, QueryMetrics] = {}
    for i in range(2):
        train, test = split[1 - i], split[i]
        best, best_map = grid[0], -1.0
        for alpha in grid:
            m = metrics(alpha)
            score = _mean(m[t].ap for t in train if t in m)
            if score > best_map:
                best, best_map = alpha, score
        chosen.append(best)
        m = metrics(best)
        for t in test:
            if t in m:
                pooled[t] = m[t]
    per_query = {t: pooled[t] for t in ordered if t in pooled}
    return CVResult(chosen, split, EvalResult(per_query))


def format_report(results: Mapping[str, EvalResult]) -> str:
    """TSV with one row per method: ``method MAP P@5 P@10``."""
    lines = ["method\tMAP\tP@5\tP@10\n"]
    for name, r in results.items():
        lines.append(f"{name}\t{r.map:.4f}\t{r.p5:.4f}\t{r.p10:.4f}\n")
    return "".join(lines)


def format_per_query(result: EvalResult) -> str:
    lines = ["topic,AP,P@5,P@10\n"]
    for t in sort_topics(result.per_query):
        m = result.per_query[t]
        lines.append(f"{t},{m.ap:.6f},{m.p5:.6f},{m.p10:.6f}\n")
    return "".join(lines)


def compare_runs(results: Mapping[str, EvalResult], baselines: Sequence[str] | None = None,
                 threshold: float = 0.05) -> str:
    """Table of MAP/P@5/P@10 with superscript-style markers for significant AP gains.

    A run gets marker ``i`` when its AP beats baseline ``i`` (1-based, in
    ``baselines`` order) with a two-tailed paired t-test p <= ``threshold``
    over the topics both runs evaluated.
    """
    names = list(results)
    baselines = list(baselines) if baselines is not None else names
    lines = ["method\tMAP\tP@5\tP@10\tsig\n"]
    for name in names:
        r = results[name]
        marks = []
        for i, base in enumerate(baselines, 1):
            if base == name:
                continue
            b = results[base]
            common = [t for t in sort_topics(r.per_query) if t in b.per_query]
            if len(common) < 2:
                continue
            x = [r.per_query[t].ap for t in common]
            y = [b.per_query[t].ap for t in common]
            if _mean(x) > _mean(y) and paired_t_test(x, y) <= threshold:
                marks.append(str(i))
        lines.append(f"{name}\t{r.map:.4f}\t{r.p5:.4f}\t{r.p10:.4f}\t{''.join(marks) or '-'}\n")
    return "".join(lines)
