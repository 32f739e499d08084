import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurosem.embedder import (
    EMBED_DIM,
    HashEmbedder,
    cosine,
    embed,
    hash64,
    normalize_text,
    token_features,
)
from neurosem.errors import EmptyTextError, InvalidArgumentError

words = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=8)
sentences = st.lists(words, min_size=1, max_size=6).map(" ".join)


@pytest.mark.parametrize(
    "text, tokens",
    [("The dog, ran!", ["the", "dog", "ran"]), ("", []), ("A  b", ["a", "b"]), ("--x9--Y", ["x9", "y"])],
)
def test_normalize_text(text, tokens):
    assert normalize_text(text) == tokens


def test_trigram_features_use_boundary_markers():
    assert token_features("dog") == ["w:dog", "c:#do", "c:dog", "c:og#"]


def test_hash_is_pinned():
    # frozen from the reference hasher; any change alters every embedding
    assert hash64("w:dog") == 16736587620598496988
    assert hash64("") == 871858657011481128
    assert hash64("w:dog", seed=1) != hash64("w:dog")


def test_single_word_embedding_by_hand():
    # 'dog' has 4 features landing in 4 distinct buckets, so every entry is +-1/2
    raw = HashEmbedder().raw_tokens(["dog"])
    assert np.flatnonzero(raw).tolist() == [0, 28, 39, 53]
    assert raw[[0, 28, 39, 53]].tolist() == [-1, -1, 1, 1]
    e = embed("dog")
    np.testing.assert_array_equal(e[[0, 28, 39, 53]], [-0.5, -0.5, 0.5, 0.5])


def test_repeated_word_is_same_direction():
    assert cosine(embed("dog dog"), embed("dog")) == pytest.approx(1.0, abs=1e-15)


def test_pinned_similarity_ordering():
    near = cosine(embed("the dog ran"), embed("the dog ran home"))
    far = cosine(embed("the dog ran"), embed("the cat ran"))
    assert far == pytest.approx(0.639009650422694, abs=1e-12)
    assert near == pytest.approx(0.894427190999916, abs=1e-12)
    assert far < near


def test_bag_property_exact():
    assert cosine(embed("a b"), embed("b a")) == 1.0
    np.testing.assert_array_equal(embed("red fox jumps"), embed("jumps red fox"))


def test_cosine_special_cases():
    e = embed("hello world")
    assert cosine(e, e) == pytest.approx(1.0, abs=1e-15)
    assert cosine(e, -e) == pytest.approx(-1.0, abs=1e-15)
    a = np.zeros(EMBED_DIM)
    b = np.zeros(EMBED_DIM)
    a[0], b[1] = 1.0, 1.0
    assert cosine(a, b) == 0.0


def test_empty_text_rejected():
    with pytest.raises(EmptyTextError):
        embed("")
    with pytest.raises(EmptyTextError):
        embed(" ,, !")


def test_bad_dim_rejected():
    with pytest.raises(InvalidArgumentError):
        HashEmbedder(dim=0)


def test_json_round_trip_is_exact():
    e = embed("json round trip")
    back = np.asarray(json.loads(json.dumps(e.tolist())))
    np.testing.assert_array_equal(back, e)


def test_embed_many_matches_embed():
    texts = ["one two", "three", "four five six"]
    np.testing.assert_array_equal(HashEmbedder().embed_many(texts), np.stack([embed(t) for t in texts]))


def test_other_dimension():
    e = HashEmbedder(dim=8).embed("small space")
    assert e.shape == (8,)
    assert np.linalg.norm(e) == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(sentences)
def test_unit_norm(text):
    assert np.linalg.norm(embed(text)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(sentences, st.randoms(use_true_random=False))
def test_permutation_invariance(text, r):
    toks = text.split()
    r.shuffle(toks)
    np.testing.assert_array_equal(embed(text), embed(" ".join(toks)))


@settings(max_examples=40, deadline=None)
@given(sentences, sentences)
def test_cosine_symmetric_and_bounded(a, b):
    ea, eb = embed(a), embed(b)
    assert cosine(ea, eb) == cosine(eb, ea)
    assert -1 - 1e-12 <= cosine(ea, eb) <= 1 + 1e-12
