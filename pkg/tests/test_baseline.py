import itertools

import numpy as np
import pytest

from neurosem import metrics
from neurosem.baseline import (
    END,
    VARIANCE_FLOOR,
    EncodingModel,
    NgramLM,
    beam_decode,
    build_design,
    fit_encoding,
    log_likelihood,
    predict_span,
    sentence_design,
)
from neurosem.embedder import EMBED_DIM, embed
from neurosem.errors import InvalidArgumentError, OutOfRangeError, SingularMatrixError
from neurosem.synthdata import OBJECTS

VOCAB12 = list(OBJECTS)
LAGS = (0, 1, 2, 3)


def planted_model(seed, channels=8, lags=LAGS, dim=EMBED_DIM):
    rng = np.random.default_rng(seed)
    W = rng.normal(0, 0.5, (len(lags) * dim, channels))
    return EncodingModel(W, rng.normal(size=channels), np.full(channels, 0.1), list(lags), 1.0)


# -- design ------------------------------------------------------------------

def test_single_lag_rows_are_active_embedding():
    e = np.arange(1.0, 4.0)
    X = build_design([(e, 2, 5)], lags=[0], num_frames=7)
    np.testing.assert_array_equal(X[2:5], np.tile(e, (3, 1)))
    assert np.all(X[:2] == 0) and np.all(X[5:] == 0)


def test_lagged_slots():
    e = np.array([1.0, -2.0])
    X = build_design([(e, 5, 6)], lags=[0, 1], num_frames=9)
    np.testing.assert_array_equal(X[5], [1, -2, 0, 0])
    np.testing.assert_array_equal(X[6], [0, 0, 1, -2])
    assert np.count_nonzero(X) == 4


@pytest.mark.parametrize("lags", [[-1, 0], [], [0, 0]])
def test_bad_lags(lags):
    with pytest.raises(InvalidArgumentError):
        build_design([(np.ones(2), 0, 2)], lags=lags)


def test_sentence_design_spans():
    E = np.eye(3)
    X, spans = sentence_design(E, [2, 4, 1], lags=LAGS)
    assert spans == [(0, 2), (5, 9), (12, 13)]
    assert X.shape == (16, 12)


# -- encoding fit --------------------------------------------------------------

def planted_design(seed, n=40, dim=8, lags=LAGS):
    rng = np.random.default_rng(seed)
    E = rng.normal(size=(n, dim))
    return sentence_design(E, rng.integers(2, 8, n), lags)[0]


def test_planted_weights_recovered():
    rng = np.random.default_rng(0)
    X = planted_design(0)
    W = rng.normal(size=(X.shape[1], 5))
    m = fit_encoding(X, X @ W, lam=1e-9, lags=LAGS)
    assert np.linalg.norm(m.weights - W) / np.linalg.norm(W) < 1e-6


def test_zero_responses():
    X = planted_design(1)
    m = fit_encoding(X, np.zeros((X.shape[0], 3)), lam=1.0, lags=LAGS)
    assert np.max(np.abs(m.weights)) < 1e-12
    np.testing.assert_array_equal(m.variance, VARIANCE_FLOOR)


def test_huge_ridge_shrinks_to_mean_model():
    X = planted_design(2)
    Y = np.random.default_rng(2).normal(size=(X.shape[0], 3)) + X[:, :3]
    m = fit_encoding(X, Y, lam=1e12, lags=LAGS)
    assert np.linalg.norm(m.weights) < 1e-3
    np.testing.assert_allclose(m.variance, Y.var(axis=0), rtol=1e-6)


def test_singular_without_ridge():
    X = planted_design(3)
    X = np.hstack([X, X[:, :1]])  # duplicated column
    with pytest.raises(SingularMatrixError):
        fit_encoding(X, np.ones((X.shape[0], 2)), lam=0.0, lags=[0])


# -- likelihood ----------------------------------------------------------------

def test_planted_stimulus_dominates():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        m = planted_model(seed)
        cands = [" ".join(rng.choice(VOCAB12, 3)) for _ in range(20)]
        truth = cands[0]
        R = predict_span(m, embed(truth)[None], 15)[0]
        ll = [log_likelihood(m, R, c, (0, 15)) for c in cands]
        assert max(ll) == ll[0]


def test_equal_embeddings_equal_likelihood():
    m = planted_model(0)
    R = np.random.default_rng(0).normal(size=(10, 8))
    assert log_likelihood(m, R, "river garden", (0, 10)) == log_likelihood(m, R, "garden river", (0, 10))


def test_variance_floor_keeps_likelihood_finite():
    m = planted_model(1)
    m.variance[:] = VARIANCE_FLOOR
    R = predict_span(m, embed("bridge")[None], 6)[0]
    assert np.isfinite(log_likelihood(m, R, "bridge", (0, 6)))


def test_span_out_of_range():
    m = planted_model(2)
    with pytest.raises(OutOfRangeError):
        log_likelihood(m, np.zeros((5, 8)), "bridge", (2, 9))


# -- language model --------------------------------------------------------------

def test_bigram_distribution_sums_to_one():
    lm = NgramLM(["a b c", "a c"], k=0.1)
    for ctx in ["<s>", "a", "b", "zzz"]:
        assert lm.distribution(ctx).sum() == pytest.approx(1.0)
    assert lm.propose("a", 2) == ["b", "c"]
    assert lm.propose("c", 1) == [END]


def test_lm_smoothing_positive():
    with pytest.raises(InvalidArgumentError):
        NgramLM(["a"], k=0.0)


def test_empty_lm_rejected():
    with pytest.raises(InvalidArgumentError):
        beam_decode(planted_model(0), np.zeros((5, 8)), (0, 5), NgramLM([]))


# -- beam decoding ---------------------------------------------------------------

def enumerate_best(m, R, span, max_len=3):
    best = -np.inf
    for L in range(1, max_len + 1):
        for seq in itertools.product(VOCAB12, repeat=L):
            best = max(best, log_likelihood(m, R, " ".join(seq), span))
    return best


@pytest.fixture(scope="module")
def lm12():
    rng = np.random.default_rng(7)
    return NgramLM([" ".join(rng.choice(VOCAB12, 3)) for _ in range(30)])


def planted_trial(seed):
    rng = np.random.default_rng(seed)
    m = planted_model(seed)
    truth = " ".join(rng.choice(VOCAB12, 3))
    return m, predict_span(m, embed(truth)[None], 12)[0], truth


def test_beam_matches_exhaustive_argmax(lm12):
    hits = 0
    for seed in range(100):
        m, R, truth = planted_trial(seed)
        hyp = beam_decode(m, R, (0, 12), lm12, beam_width=16, max_len=3, proposals=13)
        # the planted sentence attains the maximum (zero residual)
        best = log_likelihood(m, R, truth, (0, 12))
        hits += hyp.log_likelihood >= best - 1e-9
    assert hits >= 90


def test_exhaustive_beam_equals_enumeration(lm12):
    for seed in range(3):
        m, R, _ = planted_trial(100 + seed)
        R = R + np.random.default_rng(seed).normal(0, 0.3, R.shape)
        hyp = beam_decode(m, R, (0, 12), lm12, beam_width=1884, max_len=3, proposals=13)
        assert hyp.log_likelihood == pytest.approx(enumerate_best(m, R, (0, 12)), abs=1e-9)


def test_wider_beam_never_worse(lm12):
    for seed in range(5):
        m, R, _ = planted_trial(200 + seed)
        R = R + np.random.default_rng(seed).normal(0, 0.5, R.shape)
        lls = [beam_decode(m, R, (0, 12), lm12, beam_width=w, max_len=3, proposals=13).log_likelihood
               for w in (1, 2, 4, 8, 16)]
        assert all(b >= a - 1e-9 for a, b in zip(lls, lls[1:]))


def test_pure_noise_output_is_uninformative(lm12):
    # decoded text should match its own (absent) stimulus no better than a shuffled one
    rng = np.random.default_rng(0)
    decoded, truths = [], []
    for seed in range(40):
        m = planted_model(300 + seed)
        truths.append(" ".join(rng.choice(VOCAB12, 3)))
        R = m.intercept + rng.normal(0, np.sqrt(m.variance), (12, 8))
        decoded.append(beam_decode(m, R, (0, 12), lm12, beam_width=8, max_len=3).text)
    own = [metrics.semantic_score(d, t) for d, t in zip(decoded, truths)]
    perm = rng.permutation(len(decoded))
    shuffled = [metrics.semantic_score(decoded[j], t) for j, t in zip(perm, truths)]
    assert metrics.paired_t_test(own, shuffled) > 0.01


def test_beam_decode_deterministic(lm12):
    m, R, _ = planted_trial(5)
    a = beam_decode(m, R, (0, 12), lm12)
    b = beam_decode(m, R, (0, 12), lm12)
    assert a == b
