"""Bayesian encoding-model decoder used as the comparison baseline.

A ridge encoding model with FIR delays predicts every channel's envelope from
the stimulus embedding. Candidate transcripts are scored by the diagonal
Gaussian likelihood of the observed responses, and candidates are grown
left-to-right with a bigram proposal model under beam search.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from neurosem.embedder import HashEmbedder, default_embedder, normalize_text
from neurosem.errors import InvalidArgumentError, OutOfRangeError, ShapeError, SingularMatrixError

DEFAULT_LAGS = (0, 1, 2, 3)
VARIANCE_FLOOR = 1e-6
BOS = "<s>"
END = "</s>"


def _check_lags(lags: Sequence[int]) -> list[int]:
    lags = [int(l) for l in lags]
    if not lags:
        raise InvalidArgumentError("at least one lag is required")
    if min(lags) < 0:
        raise InvalidArgumentError(f"lags must be non-negative, got {lags}")
    if len(set(lags)) != len(lags):
        raise InvalidArgumentError("lags must be distinct")
    return lags


def build_design(stimuli: Sequence[tuple[np.ndarray, int, int]], lags: Sequence[int] = DEFAULT_LAGS,
                 num_frames: int | None = None) -> np.ndarray:
    """Lagged stimulus matrix of shape (frames, len(lags) * D).

    ``stimuli`` holds ``(embedding, start_frame, end_frame)`` triples with an
    exclusive end. Row ``t`` concatenates, for each lag, the embedding active at
    frame ``t - lag`` or zeros when no sentence is active there.
    """
    lags = _check_lags(lags)
    if not stimuli:
        raise InvalidArgumentError("no stimuli given")
    dim = len(stimuli[0][0])
    if num_frames is None:
        num_frames = max(end for _, _, end in stimuli) + max(lags)
    active = np.zeros((num_frames, dim))
    for emb, lo, hi in stimuli:
        if lo < 0 or hi > num_frames or hi <= lo:
            raise OutOfRangeError(f"stimulus span [{lo}, {hi}) outside {num_frames} frames")
        active[lo:hi] = emb
    X = np.zeros((num_frames, len(lags) * dim))
    for k, lag in enumerate(lags):
        if lag < num_frames:
            X[lag:, k * dim:(k + 1) * dim] = active[: num_frames - lag]
    return X


@dataclass
class EncodingModel:
    weights: np.ndarray  # (len(lags) * D, C)
    intercept: np.ndarray  # (C,)
    variance: np.ndarray  # (C,)
    lags: list[int]
    lam: float

    @property
    def dim(self) -> int:
        return self.weights.shape[0] // len(self.lags)

    @property
    def channels(self) -> int:
        return self.weights.shape[1]

    def predict(self, design: np.ndarray) -> np.ndarray:
        return design @ self.weights + self.intercept


def fit_encoding(design: np.ndarray, responses, lam: float = 1.0,
                 lags: Sequence[int] = DEFAULT_LAGS) -> EncodingModel:
    """Per-channel ridge regression with an unpenalized intercept.

    Residual variances are the per-channel mean squared residuals, floored at
    ``VARIANCE_FLOOR``.
    """
    lags = _check_lags(lags)
    X = np.asarray(design, dtype=np.float64)
    Y = np.asarray(getattr(responses, "data", responses), dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise ShapeError(f"design has {X.shape[0]} rows but responses have {Y.shape[0]} frames")
    if X.shape[1] % len(lags):
        raise ShapeError("design width is not a multiple of the lag count")
    if lam < 0:
        raise InvalidArgumentError("ridge strength must be non-negative")
    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    Xc = X - x_mean
    gram = Xc.T @ Xc
    if lam == 0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise SingularMatrixError("design is rank deficient and lambda is 0")
    gram[np.diag_indices_from(gram)] += lam
    try:
        W = np.linalg.solve(gram, Xc.T @ (Y - y_mean))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    b = y_mean - x_mean @ W
    resid = Y - (X @ W + b)
    var = np.maximum(np.mean(resid * resid, axis=0), VARIANCE_FLOOR)
    return EncodingModel(W, b, var, lags, float(lam))


def predict_span(model: EncodingModel, embeddings: np.ndarray, num_frames: int) -> np.ndarray:
    """Predicted responses (K, frames, C) for K candidate embeddings held over a span.

    Frames before the lag reaches the span start see no stimulus for that lag.
    """
    E = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    D = model.dim
    order = np.argsort(model.lags)
    sorted_lags = np.asarray(model.lags)[order]
    W = model.weights.reshape(len(model.lags), D, model.channels)[order]
    contrib = np.einsum("kd,ldc->klc", E, W)
    cum = np.cumsum(contrib, axis=1)
    n_active = np.searchsorted(sorted_lags, np.arange(num_frames), side="right")
    mu = np.broadcast_to(model.intercept, (E.shape[0], num_frames, model.channels)).copy()
    has = n_active > 0
    mu[:, has] += cum[:, n_active[has] - 1]
    return mu


def _log_likelihoods(model: EncodingModel, observed: np.ndarray, embeddings: np.ndarray) -> np.ndarray:
    mu = predict_span(model, embeddings, observed.shape[0])
    resid = observed[None] - mu
    quad = np.sum(resid * resid / model.variance, axis=(1, 2))
    const = observed.shape[0] * np.sum(np.log(2 * np.pi * model.variance))
    return -0.5 * (quad + const)


def _span_slice(responses, span: tuple[int, int]) -> np.ndarray:
    R = np.asarray(getattr(responses, "data", responses), dtype=np.float64)
    lo, hi = span
    if lo < 0 or hi > R.shape[0] or hi <= lo:
        raise OutOfRangeError(f"span [{lo}, {hi}) outside responses of {R.shape[0]} frames")
    return R[lo:hi]


def log_likelihood(model: EncodingModel, responses, candidate: str, span: tuple[int, int],
                   embedder: HashEmbedder | None = None) -> float:
    """Diagonal-Gaussian log p(responses[span] | candidate)."""
    emb = (embedder or default_embedder()).embed(candidate)
    observed = _span_slice(responses, span)
    if observed.shape[1] != model.channels:
        raise ShapeError("responses and model disagree on channel count")
    return float(_log_likelihoods(model, observed, emb[None])[0])


class NgramLM:
    """Bigram model with add-k smoothing over the vocabulary plus an end token."""

    def __init__(self, sentences: Sequence[str], k: float = 0.1):
        if k <= 0:
            raise InvalidArgumentError("add-k smoothing constant must be positive")
        self.k = float(k)
        counts: dict[str, Counter] = defaultdict(Counter)
        vocab = set()
        for s in sentences:
            toks = normalize_text(s)
            if not toks:
                continue
            vocab.update(toks)
            for prev, nxt in zip([BOS] + toks, toks + [END]):
                counts[prev][nxt] += 1
        self.vocab = sorted(vocab)
        self.counts = dict(counts)
        self._outcomes = self.vocab + [END]

    @property
    def outcomes(self) -> list[str]:
        return self._outcomes

    def distribution(self, context: str) -> np.ndarray:
        """P(next | context) over ``outcomes``; sums to one."""
        c = self.counts.get(context, Counter())
        total = sum(c.values())
        num = np.array([c[w] for w in self._outcomes], dtype=np.float64) + self.k
        return num / (total + self.k * len(self._outcomes))

    def propose(self, context: str, n: int) -> list[str]:
        """Top ``n`` continuations, ties in lexicographic order."""
        p = self.distribution(context)
        order = sorted(range(len(p)), key=lambda i: (-p[i], self._outcomes[i]))
        return [self._outcomes[i] for i in order[:n]]


@dataclass
class BaselineHypothesis:
    tokens: tuple[str, ...]
    log_likelihood: float

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def beam_decode(model: EncodingModel, responses, span: tuple[int, int], lm: NgramLM,
                beam_width: int = 8, max_len: int = 8, proposals: int = 8,
                embedder: HashEmbedder | None = None) -> BaselineHypothesis:
    """Grow transcripts left to right, ranking partial candidates by likelihood.

    A hypothesis is complete when the LM proposes the end token for it or it
    reaches ``max_len`` tokens. The most likely complete hypothesis is returned.
    """
    if not lm.vocab:
        raise InvalidArgumentError("language model has an empty vocabulary")
    if beam_width < 1 or max_len < 1 or proposals < 1:
        raise InvalidArgumentError("beam_width, max_len and proposals must be >= 1")
    emb = embedder or default_embedder()
    observed = _span_slice(responses, span)
    beams: list[tuple[str, ...]] = [()]
    finished: list[tuple[float, tuple[str, ...]]] = []
    scores: dict[tuple[str, ...], float] = {}
    for _ in range(max_len):
        cands = []
        for hyp in beams:
            for w in lm.propose(hyp[-1] if hyp else BOS, proposals):
                if w == END:
                    if hyp:
                        finished.append((scores[hyp], hyp))
                else:
                    cands.append(hyp + (w,))
        if not cands:
            beams = []
            break
        E = np.stack([emb.embed_tokens(c) for c in cands])
        ll = _log_likelihoods(model, observed, E)
        for c, s in zip(cands, ll):
            scores[c] = float(s)
        ranked = sorted(zip(ll, cands), key=lambda x: (-x[0], x[1]))
        beams = [c for _, c in ranked[:beam_width]]
    finished.extend((scores[h], h) for h in beams)
    if not finished:
        raise InvalidArgumentError("beam search produced no complete hypothesis")
    best_ll, best = min(finished, key=lambda x: (-x[0], x[1]))
    return BaselineHypothesis(best, best_ll)


def sentence_design(embeddings: np.ndarray, lengths: Sequence[int], lags: Sequence[int] = DEFAULT_LAGS):
    """Design for independent sentences each padded with ``max(lags)`` silent frames.

    Returns the stacked design plus the (start, end) span of each sentence in it.
    """
    lags = _check_lags(lags)
    pad = max(lags)
    stimuli, spans = [], []
    cursor = 0
    for e, n in zip(embeddings, lengths):
        stimuli.append((e, cursor, cursor + n))
        spans.append((cursor, cursor + n))
        cursor += n + pad
    return build_design(stimuli, lags, cursor), spans

