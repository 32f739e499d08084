"""LSTM adapter mapping neural feature sequences to unit-norm embeddings.

Everything runs in float64 with hand-written backpropagation through time
(the two recurrences are compiled with numba), so gradients can be compared
against central differences.

Gate layout inside the stacked 4H rows is ``input, forget, cell, output``.
Sequences of different lengths are right-padded and masked; the state is frozen
once a sequence ends, so the "final hidden state" of every sample is the one at
its own last frame.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
from numba import njit

from neurosem.embedder import EMBED_DIM
from neurosem.errors import (
    ConfigError,
    DegenerateInputError,
    DivergedError,
    InvalidArgumentError,
    InvalidBatchError,
    ShapeError,
)

BLOCKS = ("w_input", "w_recurrent", "bias", "w_proj", "b_proj")


@dataclass(frozen=True)
class TrainingConfig:
    alpha: float = 0.25
    tau: float = 0.1
    margin: float = 1.0
    lr: float = 1.3e-3
    batch_size: int = 8
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: int = 32
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.margin < 0:
            raise ConfigError("margin must be non-negative")
        if self.lr < 0:
            raise ConfigError("lr must be non-negative")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2")
        if self.epochs < 0 or self.hidden < 1:
            raise ConfigError("epochs must be >= 0 and hidden >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigError("invalid Adam hyper-parameters")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown training option(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdapterParams:
    w_input: np.ndarray  # (4H, C)
    w_recurrent: np.ndarray  # (4H, H)
    bias: np.ndarray  # (4H,)
    w_proj: np.ndarray  # (D, H)
    b_proj: np.ndarray  # (D,)

    def __post_init__(self):
        for name in BLOCKS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        h4, c = self.w_input.shape
        hidden = h4 // 4
        d = self.w_proj.shape[0]
        expected = {
            "w_input": (4 * hidden, c),
            "w_recurrent": (4 * hidden, hidden),
            "bias": (4 * hidden,),
            "w_proj": (d, hidden),
            "b_proj": (d,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape or h4 % 4:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def channels(self) -> int:
        return self.w_input.shape[1]

    @property
    def hidden(self) -> int:
        return self.w_recurrent.shape[1]

    @property
    def dim(self) -> int:
        return self.w_proj.shape[0]

    def blocks(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in BLOCKS}

    def copy(self) -> "AdapterParams":
        return AdapterParams(**{k: v.copy() for k, v in self.blocks().items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.blocks().values())

    @classmethod
    def init(cls, channels: int, hidden: int = 32, dim: int = EMBED_DIM, seed: int = 0) -> "AdapterParams":
        """Uniform(+-1/sqrt(H)) weights and biases, forget-gate bias 1.0."""
        rng = np.random.default_rng(seed)
        k = 1.0 / math.sqrt(hidden)
        p = cls(
            w_input=rng.uniform(-k, k, (4 * hidden, channels)),
            w_recurrent=rng.uniform(-k, k, (4 * hidden, hidden)),
            bias=rng.uniform(-k, k, 4 * hidden),
            w_proj=rng.uniform(-k, k, (dim, hidden)),
            b_proj=rng.uniform(-k, k, dim),
        )
        p.bias[hidden:2 * hidden] = 1.0
        return p

    @classmethod
    def zeros(cls, channels: int, hidden: int, dim: int = EMBED_DIM) -> "AdapterParams":
        return cls(np.zeros((4 * hidden, channels)), np.zeros((4 * hidden, hidden)),
                   np.zeros(4 * hidden), np.zeros((dim, hidden)), np.zeros(dim))


# ---------------------------------------------------------------------------
# LSTM forward / backward


@njit(cache=True)
def _lstm_forward_kernel(XW, Wh, lengths, hs, cs, acts, tanh_c):  # pragma: no cover - compiled
    T, B, H4 = XW.shape
    H = H4 // 4
    for t in range(T):
        for b in range(B):
            if t >= lengths[b]:
                hs[t + 1, b] = hs[t, b]
                cs[t + 1, b] = cs[t, b]
                acts[t, b] = 0.0
                tanh_c[t, b] = 0.0
                continue
            for k in range(H4):
                z = XW[t, b, k]
                for j in range(H):
                    z += Wh[k, j] * hs[t, b, j]
                if 2 * H <= k < 3 * H:
                    acts[t, b, k] = np.tanh(z)
                else:
                    acts[t, b, k] = 1.0 / (1.0 + np.exp(-z))
            for j in range(H):
                c = acts[t, b, H + j] * cs[t, b, j] + acts[t, b, j] * acts[t, b, 2 * H + j]
                tc = np.tanh(c)
                tanh_c[t, b, j] = tc
                cs[t + 1, b, j] = c
                hs[t + 1, b, j] = acts[t, b, 3 * H + j] * tc


@njit(cache=True)
def _lstm_backward_kernel(Wh, lengths, cs, acts, tanh_c, dh, dZ):  # pragma: no cover - compiled
    T, B, H4 = acts.shape
    H = H4 // 4
    dc = np.zeros_like(dh)
    for t in range(T - 1, -1, -1):
        for b in range(B):
            if t >= lengths[b]:
                dZ[t, b] = 0.0
                continue
            for j in range(H):
                i = acts[t, b, j]
                f = acts[t, b, H + j]
                g = acts[t, b, 2 * H + j]
                o = acts[t, b, 3 * H + j]
                tc = tanh_c[t, b, j]
                dhn = dh[b, j]
                dcn = dc[b, j] + dhn * o * (1.0 - tc * tc)
                dZ[t, b, j] = dcn * g * i * (1.0 - i)
                dZ[t, b, H + j] = dcn * cs[t, b, j] * f * (1.0 - f)
                dZ[t, b, 2 * H + j] = dcn * i * (1.0 - g * g)
                dZ[t, b, 3 * H + j] = dhn * tc * o * (1.0 - o)
                dc[b, j] = dcn * f
            for j in range(H):
                s = 0.0
                for k in range(H4):
                    s += dZ[t, b, k] * Wh[k, j]
                dh[b, j] = s


def _as_frames(seg) -> np.ndarray:
    feats = getattr(seg, "features", seg)
    return np.asarray(feats, dtype=np.float64)


def pad_batch(segments: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad a list of (frames, C) arrays / segments into (B, T, C) plus lengths."""
    seqs = [_as_frames(s) for s in segments]
    if not seqs:
        raise InvalidBatchError("empty batch")
    lengths = np.array([s.shape[0] for s in seqs])
    if lengths.min() < 1:
        raise InvalidArgumentError("every segment needs at least one frame")
    chans = {s.shape[1] for s in seqs}
    if len(chans) != 1:
        raise ShapeError(f"segments disagree on channel count: {sorted(chans)}")
    X = np.zeros((len(seqs), int(lengths.max()), chans.pop()))
    for b, s in enumerate(seqs):
        X[b, : s.shape[0]] = s
    return X, lengths


@dataclass
class _Cache:
    X: np.ndarray  # (T, B, C) time-major inputs
    lengths: np.ndarray  # (B,)
    hs: np.ndarray  # (T+1, B, H) carried hidden states
    cs: np.ndarray  # (T+1, B, H) carried cell states
    acts: np.ndarray  # (T, B, 4H) activated gates
    tanh_c: np.ndarray  # (T, B, H) tanh of the fresh cell state
    y: np.ndarray  # (B, D) projection before normalization
    norm: np.ndarray  # (B, 1)


def _forward(params: AdapterParams, X: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, _Cache]:
    B, T, C = X.shape
    if C != params.channels:
        raise ShapeError(f"segment has {C} channels, adapter expects {params.channels}")
    H = params.hidden
    X_tb = np.ascontiguousarray(X.transpose(1, 0, 2))
    XW = (X_tb.reshape(T * B, C) @ params.w_input.T + params.bias).reshape(T, B, 4 * H)
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    hs = np.zeros((T + 1, B, H))
    cs = np.zeros((T + 1, B, H))
    acts = np.empty((T, B, 4 * H))
    tanh_c = np.empty((T, B, H))
    _lstm_forward_kernel(XW, np.ascontiguousarray(params.w_recurrent), lengths, hs, cs, acts, tanh_c)
    y = hs[T] @ params.w_proj.T + params.b_proj
    # scale before squaring so huge (but finite) projections do not overflow
    scale = np.max(np.abs(y), axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = scale * np.sqrt(np.sum((y / scale) ** 2, axis=1, keepdims=True))
    if np.any(scale == 0.0):
        raise DegenerateInputError("adapter projection is the zero vector; cannot normalize")
    return y / norm, _Cache(X_tb, lengths, hs, cs, acts, tanh_c, y, norm)


def _backward(params: AdapterParams, cache: _Cache, d_emb: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given its gradient w.r.t. the unit embeddings."""
    e = cache.y / cache.norm
    dy = (d_emb - e * np.sum(e * d_emb, axis=1, keepdims=True)) / cache.norm
    T = cache.acts.shape[0]
    grads = {"w_proj": dy.T @ cache.hs[T], "b_proj": dy.sum(axis=0)}
    dh = np.ascontiguousarray(dy @ params.w_proj)
    dZ = np.empty_like(cache.acts)
    _lstm_backward_kernel(np.ascontiguousarray(params.w_recurrent), cache.lengths, cache.cs,
                          cache.acts, cache.tanh_c, dh, dZ)
    dZ2 = dZ.reshape(-1, dZ.shape[2])
    grads["w_input"] = dZ2.T @ cache.X.reshape(dZ2.shape[0], -1)
    grads["w_recurrent"] = dZ2.T @ cache.hs[:T].reshape(dZ2.shape[0], -1)
    grads["bias"] = dZ.sum(axis=(0, 1))
    return grads


def forward_batch(params: AdapterParams, segments: Sequence) -> np.ndarray:
    """Unit embeddings (B, D) for a batch of segments."""
    X, lengths = pad_batch(segments)
    emb, _ = _forward(params, X, lengths)
    return emb


def forward(params: AdapterParams, segment) -> np.ndarray:
    """Unit embedding (D,) of one segment."""
    return forward_batch(params, [segment])[0]


def embed_segments(params: AdapterParams, segments: Sequence, batch_size: int = 64) -> np.ndarray:
    segments = list(segments)
    out = [forward_batch(params, segments[i:i + batch_size]) for i in range(0, len(segments), batch_size)]
    return np.concatenate(out) if out else np.zeros((0, params.dim))


# ---------------------------------------------------------------------------
# Losses. Inputs are unit embeddings; similarity is their dot product. Only the
# neural side receives a gradient, text embeddings are fixed targets.


def _check_batch(neural: np.ndarray, text: np.ndarray):
    neural = np.asarray(neural, dtype=np.float64)
    text = np.asarray(text, dtype=np.float64)
    if neural.ndim != 2 or neural.shape != text.shape:
        raise ShapeError(f"neural {neural.shape} and text {text.shape} batches must match")
    if neural.shape[0] < 2:
        raise InvalidBatchError("batch needs at least two pairs")
    return neural, text


def _logsumexp(S, axis):
    mx = S.max(axis=axis, keepdims=True)
    return mx + np.log(np.sum(np.exp(S - mx), axis=axis, keepdims=True))


def clip_loss(neural, text, tau: float = 0.1) -> tuple[float, np.ndarray]:
    """Symmetric InfoNCE: mean of row-wise and column-wise cross-entropy."""
    neural, text = _check_batch(neural, text)
    B = neural.shape[0]
    S = neural @ text.T / tau
    lse_r = _logsumexp(S, 1)
    lse_c = _logsumexp(S, 0)
    diag = np.diag(S)
    loss = 0.5 * (np.mean(lse_r[:, 0] - diag) + np.mean(lse_c[0] - diag))
    eye = np.eye(B)
    dS = 0.5 * ((np.exp(S - lse_r) - eye) + (np.exp(S - lse_c) - eye)) / B
    return float(loss), dS @ text / tau


def hardest_negatives(neural: np.ndarray, text: np.ndarray) -> np.ndarray:
    """Index of the closest non-matching text embedding for each anchor."""
    dist = np.sqrt(np.maximum(np.sum((neural[:, None, :] - text[None, :, :]) ** 2, axis=2), 0.0))
    np.fill_diagonal(dist, np.inf)
    return np.argmin(dist, axis=1)


def triplet_loss(neural, text, margin: float = 1.0) -> tuple[float, np.ndarray]:
    """Euclidean triplet hinge with the hardest in-batch negative."""
    neural, text = _check_batch(neural, text)
    B = neural.shape[0]
    neg = text[hardest_negatives(neural, text)]
    diff_p = neural - text
    diff_n = neural - neg
    d_p = np.sqrt(np.sum(diff_p * diff_p, axis=1))
    d_n = np.sqrt(np.sum(diff_n * diff_n, axis=1))
    hinge = d_p - d_n + margin
    active = hinge > 0
    loss = float(np.sum(np.where(active, hinge, 0.0)) / B)
    with np.errstate(invalid="ignore", divide="ignore"):
        g_p = np.where(d_p[:, None] > 0, diff_p / d_p[:, None], 0.0)
        g_n = np.where(d_n[:, None] > 0, diff_n / d_n[:, None], 0.0)
    grad = np.where(active[:, None], g_p - g_n, 0.0) / B
    return loss, grad


def alignment_loss(neural, text, config: TrainingConfig) -> tuple[float, np.ndarray]:
    """``alpha * clip + (1 - alpha) * triplet`` and the matching gradient."""
    lc, gc = clip_loss(neural, text, config.tau)
    lt, gt = triplet_loss(neural, text, config.margin)
    a = config.alpha
    return a * lc + (1.0 - a) * lt, a * gc + (1.0 - a) * gt


def loss_and_grads(params: AdapterParams, segments: Sequence, text: np.ndarray,
                   config: TrainingConfig) -> tuple[float, dict[str, np.ndarray]]:
    X, lengths = pad_batch(segments)
    emb, cache = _forward(params, X, lengths)
    loss, d_emb = alignment_loss(emb, text, config)
    return loss, _backward(params, cache, d_emb)


# ---------------------------------------------------------------------------
# Training


class Adam:
    def __init__(self, params: AdapterParams, lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.blocks().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.blocks().items()}
        self.t = 0

    def step(self, params: AdapterParams, grads: dict[str, np.ndarray]):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in BLOCKS:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            update = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            getattr(params, k)[...] -= update


@dataclass
class TrainResult:
    params: AdapterParams
    loss_curve: list[float]
    batch_log: list[list[str]] = field(default_factory=list)


def _batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    chunks = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks


def train_adapter(segments: Sequence, text: np.ndarray, config: TrainingConfig = TrainingConfig(),
                  ids: Sequence[str] | None = None, init: AdapterParams | None = None,
                  log_batches: bool = False, callback: Callable | None = None) -> TrainResult:
    """Adam on the alignment loss; shuffling and init are seeded by ``config.seed``.

    Returns the trained parameters and the per-epoch mean batch loss. With
    ``log_batches`` the sentence ids of every optimizer batch are recorded.
    """
    segments = list(segments)
    text = np.asarray(text, dtype=np.float64)
    n = len(segments)
    if n < 2:
        raise InvalidBatchError("training needs at least two (segment, text) pairs")
    if text.shape[0] != n:
        raise ShapeError("one text embedding per segment required")
    if ids is None:
        ids = [getattr(s, "sentence_id", str(k)) for k, s in enumerate(segments)]
    init_seed, shuffle_seed = np.random.SeedSequence(config.seed).generate_state(2)
    channels = _as_frames(segments[0]).shape[1]
    params = init.copy() if init is not None else AdapterParams.init(
        channels, config.hidden, text.shape[1], int(init_seed))
    # pad once; batches are gathered from the padded tensor and trimmed
    X_all, len_all = pad_batch(segments)
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.eps)
    rng = np.random.default_rng(int(shuffle_seed))
    curve: list[float] = []
    log: list[list[str]] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for idx in _batches(order, config.batch_size):
            lengths = len_all[idx]
            X = X_all[idx, : lengths.max()]
            emb, cache = _forward(params, X, lengths)
            loss, d_emb = alignment_loss(emb, text[idx], config)
            if not math.isfinite(loss):
                raise DivergedError(epoch, loss)
            opt.step(params, _backward(params, cache, d_emb))
            losses.append(loss)
            if log_batches:
                log.append([ids[i] for i in idx])
        epoch_loss = float(np.mean(losses))
        if not math.isfinite(epoch_loss) or not params.is_finite():
            raise DivergedError(epoch, epoch_loss)
        curve.append(epoch_loss)
        if callback is not None:
            callback(epoch, epoch_loss)
    return TrainResult(params, curve, log)


# ---------------------------------------------------------------------------
# Finite-difference verification


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def numeric_grad(fn: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``fn`` w.r.t. array ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        up = fn(x)
        flat[k] = old - h
        down = fn(x)
        flat[k] = old
        g[k] = (up - down) / (2 * h)
    return grad


def grad_check(params: AdapterParams, segments: Sequence, text: np.ndarray,
               config: TrainingConfig = TrainingConfig(), h: float = 1e-5) -> dict[str, float]:
    """Max relative error of every analytic parameter gradient vs central differences."""
    work = params.copy()
    _, analytic = loss_and_grads(work, segments, text, config)

    def objective(_):
        return loss_and_grads(work, segments, text, config)[0]

    return {name: relative_error(analytic[name], numeric_grad(objective, getattr(work, name), h))
            for name in BLOCKS}


def loss_grad_check(loss_fn: Callable, neural: np.ndarray, text: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error of a loss' gradient w.r.t. its neural input."""
    x = np.array(neural, dtype=np.float64)
    _, analytic = loss_fn(x, text)
    numeric = numeric_grad(lambda z: loss_fn(z, text)[0], x, h)
    return relative_error(analytic, numeric)

