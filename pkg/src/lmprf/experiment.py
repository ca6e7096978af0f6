"""Batch experiments: initial retrieval, feedback model, interpolation, final run, evaluation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import feedback_classic as fc
from .corpus_io import TokenPipeline, Topic, load_stopwords, parse_documents, parse_qrels, parse_topics, tokenize, Qrels
from .ecdmm import EcdmmParams, ecdmm_expand, topic_seed
from .embeddings import EmbeddingTable, collapse_to_stems, load_embeddings
from .evaluation import (EvalResult, QueryMetrics, cross_validate_alpha, evaluate, format_per_query,
                         format_report, sort_topics)
from .index import FeedbackSet, Index, build_index, feedback_counts
from .porter import porter_stem
from .retrieval import EmptyQueryError, QueryLM, ScoredList, format_run, interpolate_query, mle_query, retrieve

logger = logging.getLogger(__name__)

METHODS = ("mle", "rm3", "rm4", "mixture", "dmm", "medmm", "rfmf", "ecdmm")
DEFAULT_GRID = tuple(round(0.1 * i, 1) for i in range(11))
CACHE_ENV = "LMPRF_CACHE_DIR"


@dataclass
class ExperimentConfig:
    docs: str | None = None
    topics: str | None = None
    qrels: str | None = None
    embeddings: str | None = None
    index: str | None = None
    doc_format: str | None = None
    embedding_format: str | None = None
    stopwords: str | None = None
    lowercase: bool = True
    stem: bool = True
    collapse_stems: bool | None = None
    mu: float = 1000.0
    fb_docs: int = 10
    fb_terms: int = 50
    depth: int = 1000
    method: str = "mle"
    alpha_interp: float | None = None
    alpha_grid: list[float] | None = None
    mixture_lambda: float = 0.9
    dmm_lambda: float = 0.5
    medmm_lambda: float = 0.1
    medmm_beta: float = 1.2
    rfmf_rank: int = 5
    rfmf_iters: int = 200
    ecdmm: EcdmmParams = field(default_factory=EcdmmParams)
    seed: int = 0
    output_dir: str | None = None
    tag: str | None = None
    workers: int = 1
    verbose: bool = False

    def __post_init__(self):
        if isinstance(self.ecdmm, dict):
            self.ecdmm = EcdmmParams(**self.ecdmm)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.alpha_interp is not None and not 0.0 <= self.alpha_interp <= 1.0:
            raise ValueError("alpha_interp must be in [0, 1]")
        if self.fb_docs < 1 or self.fb_terms < 1 or self.depth < 1:
            raise ValueError("fb_docs, fb_terms and depth must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        """JSON object whose keys are field names; ``ecdmm`` is a nested object."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        return d

    @property
    def run_tag(self) -> str:
        return self.tag or self.method

    def pipeline(self) -> TokenPipeline:
        sw = load_stopwords(self.stopwords) if self.stopwords else frozenset()
        return TokenPipeline(self.lowercase, sw, self.stem)

    def model_key(self) -> tuple:
        """Everything a feedback model depends on beyond the shared resources."""
        m = self.method
        if m == "mixture":
            extra = (self.mixture_lambda,)
        elif m == "dmm":
            extra = (self.dmm_lambda,)
        elif m == "medmm":
            extra = (self.medmm_lambda, self.medmm_beta)
        elif m == "rfmf":
            extra = (self.rfmf_rank, self.rfmf_iters, self.seed)
        elif m == "ecdmm":
            extra = (dataclasses.astuple(self.ecdmm), self.seed)
        else:
            extra = ()
        return (m, self.fb_terms) + extra


def cache_dir() -> Path | None:
    d = os.environ.get(CACHE_ENV)
    return Path(d) if d else None


def _file_fingerprint(path: str) -> str:
    st = os.stat(path)
    h = hashlib.sha1(f"{os.path.abspath(path)}|{st.st_size}|{st.st_mtime_ns}".encode())
    return h.hexdigest()[:16]


class Resources:
    """Index, vectors, topics, qrels and initial-retrieval results shared across runs."""

    def __init__(self, config: ExperimentConfig):
        self.mu = config.mu
        self.fb_docs = config.fb_docs
        self.pipeline = config.pipeline()
        self.index = self._load_index(config)
        self.table = self._load_table(config)
        if config.topics is None:
            raise ValueError("a topics file is required")
        self.topics: list[Topic] = parse_topics(config.topics)
        order = {t: i for i, t in enumerate(sort_topics(t.topic_id for t in self.topics))}
        self.topics.sort(key=lambda t: order[t.topic_id])
        self.qrels: Qrels | None = parse_qrels(config.qrels) if config.qrels else None
        self.query_terms = {t.topic_id: tokenize(t.title, self.pipeline) for t in self.topics}
        self._initial: dict[str, tuple[QueryLM, FeedbackSet | None]] = {}
        self.stats = {"feedback_hits": 0, "feedback_misses": 0}

    def _load_index(self, config: ExperimentConfig) -> Index:
        if config.index and Path(config.index).exists():
            return Index.load(config.index)
        if not config.docs:
            raise ValueError("either an existing index or a document collection is required")
        cached = None
        cdir = cache_dir()
        if cdir is not None:
            key = f"{_file_fingerprint(config.docs)}-{self.pipeline.key()}"
            cached = cdir / f"index-{key}.bin"
            if cached.exists():
                logger.info("loading cached index %s", cached)
                return Index.load(cached)
        index = build_index(parse_documents(config.docs, config.doc_format), self.pipeline)
        for target in (config.index, cached):
            if target:
                Path(target).parent.mkdir(parents=True, exist_ok=True)
                index.save(target)
        return index

    def _load_table(self, config: ExperimentConfig) -> EmbeddingTable | None:
        if not config.embeddings:
            return None
        table = load_embeddings(config.embeddings, config.embedding_format)
        collapse = config.stem if config.collapse_stems is None else config.collapse_stems
        if collapse:
            table = collapse_to_stems(table, porter_stem)
        return table

    def initial(self, topic_id: str) -> tuple[QueryLM, FeedbackSet | None]:
        """MLE query model and its top-``fb_docs`` feedback set (cached)."""
        hit = self._initial.get(topic_id)
        if hit is not None:
            self.stats["feedback_hits"] += 1
            logger.debug("feedback set cache hit for topic %s", topic_id)
            return hit
        self.stats["feedback_misses"] += 1
        qlm = mle_query(self.index, self.query_terms[topic_id])
        top = retrieve(self.index, qlm, self.fb_docs, self.mu, topic_id)
        fb = feedback_counts(self.index, top.doc_ords()) if top.entries else None
        self._initial[topic_id] = (qlm, fb)
        return qlm, fb


@dataclass
class ExperimentOutput:
    lists: list[ScoredList]
    result: EvalResult | None
    fold_alphas: list[float] | None
    files: dict[str, Path]
    failures: dict[str, str]
    models: dict[str, QueryLM]


class Experiment:
    def __init__(self, config: ExperimentConfig, resources: Resources | None = None):
        self.config = config
        self.res = resources or Resources(config)
        self._models: dict[tuple, dict[str, QueryLM | None]] = {}
        self.failures: dict[str, str] = {}
        self.traces: dict[str, str] = {}

    @property
    def index(self) -> Index:
        return self.res.index

    def feedback_model(self, topic_id: str) -> QueryLM | None:
        """Truncated feedback model for ``topic_id``; ``None`` for the no-feedback baseline."""
        cfg = self.config
        qlm, F = self.res.initial(topic_id)
        if cfg.method == "mle":
            return None
        if F is None:
            raise EmptyQueryError("initial retrieval returned no documents")
        idx = self.index
        q_ids = [idx.term_ids[t] for t in self.res.query_terms[topic_id] if t in idx.term_ids]
        m = cfg.method
        if m == "rm3":
            lm = fc.rm1(idx, F, q_ids, cfg.mu)
        elif m == "rm4":
            lm = fc.rm2(idx, F, q_ids, cfg.mu)
        elif m == "mixture":
            lm, _ = fc.mixture_em(idx, F, cfg.mixture_lambda)
        elif m == "dmm":
            lm = fc.dmm(idx, F, cfg.dmm_lambda, cfg.mu)
        elif m == "medmm":
            lm = fc.medmm(idx, F, cfg.medmm_lambda, cfg.medmm_beta, cfg.mu)
        elif m == "rfmf":
            rank = min(cfg.rfmf_rank, F.size + 1)
            lm = fc.rfmf(idx, F, qlm, rank, cfg.rfmf_iters, topic_seed(cfg.seed, topic_id))
        elif m == "ecdmm":
            if self.res.table is None:
                raise KeyError("ecdmm needs an embeddings file")
            params = dataclasses.replace(cfg.ecdmm, rng_seed=cfg.seed).with_seed_for(topic_id)
            out = ecdmm_expand(idx, self.res.table, F, self.res.query_terms[topic_id], params)
            lm = out.model
            if cfg.verbose:
                self.traces[topic_id] = out.projection.trace_csv()
        else:  # pragma: no cover - guarded by ExperimentConfig
            raise ValueError(m)
        return fc.truncate_terms(lm, cfg.fb_terms, idx.vocab)

    def _topic_models(self) -> dict[str, QueryLM | None]:
        key = self.config.model_key()
        if key in self._models:
            return self._models[key]
        topic_ids = [t.topic_id for t in self.res.topics]
        # fill the shared initial-retrieval cache up front so workers only read it
        for t in topic_ids:
            try:
                self.res.initial(t)
            except EmptyQueryError:
                pass

        def one(topic_id):
            try:
                return topic_id, self.feedback_model(topic_id), None
            except Exception as exc:  # per-topic isolation: fall back to the unexpanded query
                logger.warning("topic %s: %s: %s; using unexpanded query", topic_id, type(exc).__name__, exc)
                return topic_id, None, f"{type(exc).__name__}: {exc}"

        if self.config.workers > 1:
            with ThreadPoolExecutor(self.config.workers) as pool:
                results = list(pool.map(one, topic_ids))
        else:
            results = [one(t) for t in topic_ids]
        models = {}
        for topic_id, lm, err in results:
            models[topic_id] = lm
            if err and self.config.method != "mle":
                self.failures[topic_id] = err
        self._models[key] = models
        return models

    def final_query(self, topic_id: str, alpha: float) -> QueryLM | None:
        try:
            qlm, _ = self.res.initial(topic_id)
        except EmptyQueryError:
            return None
        fb = self._topic_models()[topic_id]
        if fb is None:
            return qlm
        return interpolate_query(fb, qlm, alpha)

    def run_lists(self, alpha: float) -> dict[str, ScoredList]:
        out = {}
        for t in self.res.topics:
            q = self.final_query(t.topic_id, alpha)
            if q is None:
                out[t.topic_id] = ScoredList(t.topic_id, [])
            else:
                out[t.topic_id] = retrieve(self.index, q, self.config.depth, self.config.mu, t.topic_id)
        return out

    def _metrics(self, lists: dict[str, ScoredList]) -> dict[str, QueryMetrics]:
        ranked = {t: [self.index.doc_ids[d] for d in sl.doc_ords()] for t, sl in lists.items()}
        return evaluate(ranked, self.res.qrels, topics=list(lists)).per_query

    def run(self) -> ExperimentOutput:
        cfg = self.config
        topics = [t.topic_id for t in self.res.topics]
        fold_alphas = None
        if cfg.method == "mle":
            lists = self.run_lists(1.0)
        elif cfg.alpha_interp is not None:
            lists = self.run_lists(cfg.alpha_interp)
        else:
            if self.res.qrels is None:
                raise ValueError("cross-validating alpha needs qrels; set alpha_interp instead")
            grid = list(cfg.alpha_grid or DEFAULT_GRID)
            by_alpha: dict[float, dict[str, ScoredList]] = {}

            def evaluate_fn(alpha, _topics):
                by_alpha[alpha] = self.run_lists(alpha)
                return self._metrics(by_alpha[alpha])

            cv = cross_validate_alpha(topics, grid, evaluate_fn)
            fold_alphas = cv.fold_alphas
            lists = {}
            for fold, alpha in zip(cv.folds, cv.fold_alphas):
                for t in fold:
                    lists[t] = by_alpha[alpha][t]
        ordered = [lists[t] for t in topics]
        result = None
        if self.res.qrels is not None:
            result = EvalResult(self._metrics({t: lists[t] for t in topics}))
        models = {t: m for t, m in self._topic_models().items() if m is not None}
        files = self._write(ordered, result, fold_alphas, models) if cfg.output_dir else {}
        return ExperimentOutput(ordered, result, fold_alphas, files, dict(self.failures), models)

    def _write(self, lists, result, fold_alphas, models) -> dict[str, Path]:
        cfg = self.config
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        tag = cfg.run_tag
        files = {"run": out / f"{tag}.run"}
        files["run"].write_text(format_run(lists, self.index, tag), encoding="utf-8")
        if result is not None:
            files["report"] = out / f"{tag}.report.tsv"
            files["report"].write_text(format_report({tag: result}), encoding="utf-8")
            files["per_query"] = out / f"{tag}.per_query.csv"
            files["per_query"].write_text(format_per_query(result), encoding="utf-8")
        if fold_alphas is not None:
            files["cv"] = out / f"{tag}.cv.json"
            files["cv"].write_text(json.dumps({"fold_alphas": fold_alphas}) + "\n", encoding="utf-8")
        if self.failures:
            files["failures"] = out / f"{tag}.failures.tsv"
            files["failures"].write_text(
                "".join(f"{t}\t{e}\n" for t, e in sorted(self.failures.items())), encoding="utf-8")
        if cfg.verbose and models:
            files["expansion"] = out / f"{tag}.expansion.tsv"
            files["expansion"].write_text(format_expansion(models, self.index, 10), encoding="utf-8")
            if self.traces:
                tdir = out / f"{tag}.traces"
                tdir.mkdir(exist_ok=True)
                for t, csv in sorted(self.traces.items()):
                    (tdir / f"{t}.csv").write_text(csv, encoding="utf-8")
                files["traces"] = tdir
        return files


def format_expansion(models: dict[str, QueryLM], index: Index, top: int = 10) -> str:
    """``topic \\t term \\t weight`` rows, heaviest first (top ``top`` per topic)."""
    lines = []
    for t in sort_topics(models):
        for tid, w in models[t].items_sorted(index.vocab)[:top]:
            lines.append(f"{t}\t{index.vocab[tid]}\t{w:.4f}\n")
    return "".join(lines)


def run_experiment(config: ExperimentConfig, resources: Resources | None = None) -> ExperimentOutput:
    return Experiment(config, resources).run()


SWEEP_PARAMS = ("n_pos", "n_neg", "alpha_interp")


def sweep(config: ExperimentConfig, param: str, values: Sequence[float],
          resources: Resources | None = None) -> str:
    """One experiment per value, sharing index, vectors and feedback sets.

    Returns CSV ``value,MAP,P@5,P@10,status``.
    """
    if param not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    if not values:
        raise ValueError("no sweep values")
    res = resources or Resources(config)
    lines = ["value,MAP,P@5,P@10,status\n"]
    for v in values:
        try:
            if param == "alpha_interp":
                cfg = dataclasses.replace(config, alpha_interp=float(v), output_dir=None)
            else:
                ecfg = dataclasses.replace(config.ecdmm, **{param: int(v)})
                cfg = dataclasses.replace(config, ecdmm=ecfg, output_dir=None)
            out = run_experiment(cfg, res)
            if out.result is None:
                raise ValueError("sweeps need qrels")
            r = out.result
            lines.append(f"{v:g},{r.map:.6f},{r.p5:.6f},{r.p10:.6f},ok\n")
        except Exception as exc:
            logger.warning("sweep %s=%s failed: %s", param, v, exc)
            msg = str(exc).replace(",", ";").replace("\n", " ")
            lines.append(f"{v:g},,,,failed: {type(exc).__name__}: {msg}\n")
    logger.info("sweep reused feedback sets %d times (%d computed)",
                res.stats["feedback_hits"], res.stats["feedback_misses"])
    return "".join(lines)
