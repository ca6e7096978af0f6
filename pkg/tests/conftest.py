import numpy as np
import pytest

from lmprf.corpus_io import RawDocument, TokenPipeline
from lmprf.index import build_index

RAW = TokenPipeline(lowercase=True, stem=False)


def make_index(texts):
    """Index over ``{doc_id: text}`` with no stemming or stopwords."""
    return build_index([RawDocument(k, v) for k, v in texts.items()], RAW)


def random_corpus(rng, n_docs=5, n_terms=20, max_count=4, min_len=1):
    """Random bag-of-words docs over terms ``t00..``; every doc is nonempty."""
    texts = {}
    for i in range(n_docs):
        counts = rng.integers(0, max_count + 1, size=n_terms)
        if counts.sum() < min_len:
            counts[rng.integers(n_terms)] = 1
        words = [f"t{j:02d}" for j in range(n_terms) for _ in range(counts[j])]
        rng.shuffle(words)
        texts[f"d{i}"] = " ".join(words)
    return make_index(texts)


@pytest.fixture
def toy_index():
    return make_index({
        "d1": "apple banana apple cherry",
        "d2": "banana banana date",
        "d3": "apple date elder fig fig",
        "d4": "grape",
    })


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria register one line each; printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
