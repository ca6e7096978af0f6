from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from lmprf.porter import porter_stem

REFERENCE = [
    tuple(line.split("\t"))
    for line in (Path(__file__).parent / "data" / "porter_reference.tsv").read_text().splitlines()
]


@pytest.mark.parametrize("word,stem", REFERENCE)
def test_reference_vocabulary(word, stem):
    assert porter_stem(word) == stem


def test_reference_list_is_large_enough():
    assert len(REFERENCE) >= 100


@pytest.mark.parametrize("word,stem", [
    ("caresses", "caress"), ("sky", "sky"), ("subsidy", "subsidi"), ("airbus", "airbu"),
    ("generalizations", "gener"), ("ponies", "poni"), ("hopping", "hop"), ("relational", "relat"),
])
def test_known_stems(word, stem):
    assert porter_stem(word) == stem


def test_short_words_untouched():
    for w in ["a", "is", "as", "us", "s"]:
        assert porter_stem(w) == w


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", max_size=15))
def test_stem_is_a_prefix_like_shortening(word):
    s = porter_stem(word)
    assert len(s) <= len(word)
    assert porter_stem(word) == s
