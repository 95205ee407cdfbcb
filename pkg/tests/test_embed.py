import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperdisc.embed import (
    EmbeddingParseError,
    EmbeddingTable,
    UnrepresentableTermError,
    load_sense_embeddings,
    load_word_embeddings,
    lookup_term,
    write_embeddings,
)


def test_parse_two_tokens():
    t = load_word_embeddings("a 1.0 0.0\nb 0.0 1.0")
    assert t.dim == 2
    assert list(t["a"]) == [1.0, 0.0]
    assert list(t["b"]) == [0.0, 1.0]


def test_width_mismatch_reports_line():
    with pytest.raises(EmbeddingParseError) as exc:
        load_word_embeddings("a 1 2\nb 3")
    assert exc.value.lineno == 2
    assert "line 2" in str(exc.value)


def test_non_numeric_field():
    with pytest.raises(EmbeddingParseError, match="non-numeric"):
        load_word_embeddings("a 1 x")


@pytest.mark.parametrize("text", ["", "\n\n", "   \n"])
def test_empty_stream(text):
    with pytest.raises(EmbeddingParseError, match="no embeddings"):
        load_word_embeddings(text)


def test_expected_dim_enforced():
    with pytest.raises(EmbeddingParseError):
        load_word_embeddings("a 1 2 3", expected_dim=2)
    assert load_word_embeddings("a 1 2", expected_dim=2).dim == 2


def test_duplicate_tokens_last_wins_and_tabs():
    t = load_word_embeddings(io.StringIO("a\t1 2\na  3\t4\n"))
    assert list(t["a"]) == [3.0, 4.0]
    assert len(t) == 1


def test_round_trip_1000_by_300():
    rng = np.random.default_rng(5)
    vecs = rng.normal(size=(1000, 300))
    table = EmbeddingTable(300, {f"w{i}": v for i, v in enumerate(vecs)})
    buf = io.StringIO()
    write_embeddings(table, buf)
    back = load_word_embeddings(io.StringIO(buf.getvalue()))
    assert len(back) == 1000
    for i in range(1000):
        assert np.array_equal(back[f"w{i}"], vecs[i])
    buf2 = io.StringIO()
    write_embeddings(back, buf2)
    assert buf2.getvalue() == buf.getvalue()


def test_sense_mean_of_unit_vectors():
    t = load_sense_embeddings("bank#0 1 0\nbank#1 0 1")
    assert list(t["bank"]) == [0.5, 0.5]


def test_single_sense_identity():
    assert list(load_sense_embeddings("cat#0 2 4")["cat"]) == [2.0, 4.0]


def test_token_without_hash_is_its_own_sense():
    t = load_sense_embeddings("dog 1 1\ncat#3 0 2")
    assert list(t["dog"]) == [1.0, 1.0]


def test_empty_base_word():
    with pytest.raises(EmbeddingParseError, match="empty base word"):
        load_sense_embeddings("#1 1 2")


def test_sense_average_matches_summation_oracle():
    rng = np.random.default_rng(11)
    lines, raw = [], {}
    for w in range(50):
        k = int(rng.integers(1, 8))
        raw[f"w{w}"] = rng.normal(size=(k, 20))
        for s, v in enumerate(raw[f"w{w}"]):
            lines.append(f"w{w}#{s} " + " ".join(repr(float(x)) for x in v))
    table = load_sense_embeddings("\n".join(lines))
    for word, senses in raw.items():
        oracle = np.array([math.fsum(senses[:, j]) / len(senses) for j in range(senses.shape[1])])
        assert np.max(np.abs(table[word] - oracle)) <= 1e-12


words = st.text(alphabet="abcdefgh", min_size=1, max_size=6)
floats = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(words, st.lists(floats, min_size=3, max_size=3), min_size=1, max_size=8),
       st.lists(st.integers(0, 9), min_size=8, max_size=8))
def test_one_sense_per_word_equals_word_loader(entries, ids):
    plain = "\n".join(f"{w} " + " ".join(repr(x) for x in v) for w, v in entries.items())
    sensed = "\n".join(f"{w}#{i} " + " ".join(repr(x) for x in v) for (w, v), i in zip(entries.items(), ids))
    a = load_word_embeddings(plain)
    b = load_sense_embeddings(sensed)
    assert a.dim == b.dim and set(a.entries) == set(b.entries)
    for w in entries:
        assert np.array_equal(a[w], b[w])


@pytest.fixture
def table():
    return load_word_embeddings("dog 1 0 0\nvideo 0 1 0\ngame 0 0 1")


def test_lookup_single_word(table):
    seq = lookup_term(table, "dog")
    assert seq.tokens == ("dog",)
    assert np.array_equal(seq.vectors, [[1.0, 0.0, 0.0]])
    assert list(seq.oov_mask) == [False]


@pytest.mark.parametrize("term", ["video_game", "Video Game", "  video \t game ", "video__game"])
def test_lookup_phrase(table, term):
    seq = lookup_term(table, term)
    assert seq.tokens == ("video", "game")
    assert len(seq) == 2


def test_lookup_partial_oov(table):
    seq = lookup_term(table, "red dog")
    assert list(seq.oov_mask) == [True, False]
    assert np.array_equal(seq.vectors[0], np.zeros(3))
    assert seq.known == 1


def test_lookup_all_oov(table):
    with pytest.raises(UnrepresentableTermError):
        lookup_term(table, "qzx qzy")


def test_lookup_blank(table):
    with pytest.raises(ValueError):
        lookup_term(table, "  _ ")


def test_lookup_is_pure(table):
    a = lookup_term(table, "video game dog")
    b = lookup_term(table, "video game dog")
    assert a.tokens == b.tokens
    assert np.array_equal(a.vectors, b.vectors)
    assert all(len(v) == table.dim for v in a.vectors)


def test_table_is_immutable(table):
    with pytest.raises((TypeError, ValueError)):
        table.entries["cat"] = np.zeros(3)
    with pytest.raises(ValueError):
        table["dog"][0] = 5.0
