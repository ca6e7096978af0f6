"""Seeded synthetic test collection with planted topics and matching word vectors.

Each topic owns a cluster of interchangeable terms; a relevant document uses
only a random subset of its cluster, so many relevant documents miss one or
both query terms.  Documents also carry Zipfian background text, stray
mentions of other topics' terms, and rare words.  Vectors place a topic's
terms around a shared centroid; background words are isotropic noise and
rare words sit near an arbitrary centroid, unrelated to the documents they
occur in (poorly estimated vectors).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus_io import Qrels, RawDocument, Topic, write_documents, write_qrels, write_topics
from .embeddings import EmbeddingTable, save_embeddings
from .porter import porter_stem

_CONS = "bdfgklmnprstvz"
_VOWS = "aeiou"
STOPWORDS = ("the", "of", "and", "in", "to", "a", "is", "for", "on", "with")


@dataclass
class SyntheticCollection:
    docs: list[RawDocument]
    topics: list[Topic]
    qrels: Qrels
    table: EmbeddingTable
    stopwords: tuple[str, ...] = STOPWORDS

    def write(self, directory: str | Path) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "docs": d / "docs.jsonl",
            "topics": d / "topics.tsv",
            "qrels": d / "qrels.txt",
            "embeddings": d / "vectors.txt",
            "stopwords": d / "stopwords.txt",
        }
        write_documents(self.docs, paths["docs"])
        write_topics(self.topics, paths["topics"])
        write_qrels(self.qrels, paths["qrels"])
        save_embeddings(self.table, paths["embeddings"], "word2vec")
        paths["stopwords"].write_text("\n".join(self.stopwords) + "\n", encoding="utf-8")
        return paths


def _words(rng: np.random.Generator, count: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < count:
        n_syl = int(rng.integers(2, 4))
        w = "".join(rng.choice(list(_CONS)) + rng.choice(list(_VOWS)) for _ in range(n_syl))
        w += rng.choice(list(_CONS))
        # stem-stable words keep index terms and vector keys identical
        if w in taken or porter_stem(w) != w:
            continue
        taken.add(w)
        out.append(w)
    return out


def _unit(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def generate(seed: int = 0, n_docs: int = 200, n_topics: int = 10, dim: int = 100,
             cluster_size: int = 10, n_background: int = 400, n_rare: int = 300,
             topic_share: float = 0.1, noise: float = 0.6,
             doc_length: tuple[int, int] = (250, 500)) -> SyntheticCollection:
    rng = np.random.default_rng(seed)
    taken = set(STOPWORDS)
    clusters = [_words(rng, cluster_size, taken) for _ in range(n_topics)]
    background = _words(rng, n_background, taken)
    rare = _words(rng, n_rare, taken)

    zipf = 1.0 / np.arange(2, n_background + 2)
    zipf /= zipf.sum()

    topic_of = np.arange(n_docs) % n_topics
    rng.shuffle(topic_of)
    tokens: list[list[str]] = []
    for k in topic_of:
        length = int(rng.integers(doc_length[0], doc_length[1] + 1))
        n_topic = int(rng.binomial(length, topic_share))
        subset = rng.choice(cluster_size, size=int(rng.integers(3, 7)), replace=False)
        words = [clusters[k][i] for i in rng.choice(subset, size=max(n_topic, 1))]
        words += list(rng.choice(background, size=length - len(words), p=zipf))
        words += list(rng.choice(STOPWORDS, size=length // 5))
        if rng.random() < 0.35:
            other = int(rng.integers(n_topics - 1))
            other += other >= k
            words += list(rng.choice(clusters[other][:3], size=int(rng.integers(1, 4)) * length // 100))
        tokens.append(words)
    for w in rare:
        for d in rng.choice(n_docs, size=int(rng.integers(2, 5)), replace=False):
            tokens[d].append(w)

    docs = []
    for i, words in enumerate(tokens):
        rng.shuffle(words)
        docs.append(RawDocument(f"SYN-{i:04d}", " ".join(words)))

    topics = [Topic(str(101 + k), f"the {clusters[k][0]} of {clusters[k][1]}") for k in range(n_topics)]
    qrels = Qrels()
    for i, k in enumerate(topic_of):
        qrels.add(str(101 + int(k)), docs[i].doc_id, 1)

    centroids = _unit(rng.standard_normal((n_topics, dim)))
    rows, names = [], []
    for k, cluster in enumerate(clusters):
        e = _unit(rng.standard_normal((len(cluster), dim)))
        rows.append(centroids[k] + noise * e)
        names += cluster
    rows.append(_unit(rng.standard_normal((n_background, dim))))
    names += background
    near = rng.integers(n_topics, size=n_rare)
    rows.append(centroids[near] + noise * _unit(rng.standard_normal((n_rare, dim))))
    names += rare
    table = EmbeddingTable(names, np.vstack(rows))
    return SyntheticCollection(docs, topics, qrels, table)
