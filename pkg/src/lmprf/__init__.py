"""Language-model retrieval with pseudo-relevance feedback, including
embedding-based feedback through a learned per-query projection."""

from ._kernels import BACKEND
from .corpus_io import Qrels, RawDocument, Topic, TokenPipeline, parse_documents, parse_qrels, parse_topics
from .ecdmm import EcdmmParams, ecdmm_expand
from .embeddings import EmbeddingTable, load_embeddings
from .evaluation import evaluate, paired_t_test
from .experiment import ExperimentConfig, run_experiment, sweep
from .index import FeedbackSet, Index, build_index, feedback_counts
from .retrieval import QueryLM, interpolate_query, mle_query, retrieve

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "EcdmmParams", "EmbeddingTable", "ExperimentConfig", "FeedbackSet", "Index", "QueryLM",
    "Qrels", "RawDocument", "TokenPipeline", "Topic", "build_index", "ecdmm_expand", "evaluate",
    "feedback_counts", "interpolate_query", "load_embeddings", "mle_query", "paired_t_test",
    "parse_documents", "parse_qrels", "parse_topics", "retrieve", "run_experiment", "sweep",
]
