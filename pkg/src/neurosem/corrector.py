"""Embedding recalibration and embedding-to-text inversion.

``invert`` searches token sequences for the one whose embedding has maximal
cosine similarity with a target. It starts from the best single word and
iteratively refines a beam of hypotheses by single-token edits
(substitute / insert / delete), keeping the best ``beam_width`` each step.

Candidates whose embeddings are bit-identical are interchangeable for the
objective, so each step keeps one representative per embedding (the
lexicographically smallest token sequence). With the bag-of-features embedder
this means word permutations of one hypothesis never crowd the beam.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from neurosem import adapter as adapter_mod
from neurosem.embedder import HashEmbedder, default_embedder, normalize_text
from neurosem.errors import InvalidArgumentError, ShapeError

IMPROVE_TOL = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    beam_width: int = 8
    max_steps: int = 16
    max_len: int = 12

    def __post_init__(self):
        if self.beam_width < 1 or self.max_len < 1 or self.max_steps < 0:
            raise InvalidArgumentError("beam_width, max_len must be >= 1 and max_steps >= 0")


@dataclass
class Hypothesis:
    tokens: tuple[str, ...]
    embedding: np.ndarray
    score: float

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


class Vocabulary:
    """Ordered, duplicate-free list of normalized tokens."""

    def __init__(self, words: Sequence[str]):
        out: list[str] = []
        seen = set()
        for w in words:
            if not w or w != w.lower() or normalize_text(w) != [w]:
                raise InvalidArgumentError(f"vocabulary entry {w!r} is not a normalized token")
            if w in seen:
                raise InvalidArgumentError(f"duplicate vocabulary entry {w!r}")
            seen.add(w)
            out.append(w)
        self.words = out

    @classmethod
    def from_texts(cls, texts: Sequence[str]) -> "Vocabulary":
        return cls(sorted({tok for t in texts for tok in normalize_text(t)}))

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(self.words)

    def __repr__(self):
        return f"Vocabulary({len(self.words)} words)"


# ---------------------------------------------------------------------------
# Calibration


@dataclass
class CalibrationMap:
    matrix: np.ndarray  # (D, D)
    bias: np.ndarray  # (D,)
    lam: float

    @classmethod
    def identity(cls, dim: int) -> "CalibrationMap":
        return cls(np.eye(dim), np.zeros(dim), 0.0)

    def apply(self, emb: np.ndarray) -> np.ndarray:
        """Affine map followed by renormalization; works on (D,) or (N, D)."""
        out = np.asarray(emb) @ self.matrix.T + self.bias
        norm = np.linalg.norm(out, axis=-1, keepdims=True)
        if np.any(norm == 0):
            raise InvalidArgumentError("calibrated embedding is the zero vector")
        return out / norm


def calibrate(neural: np.ndarray, text: np.ndarray, lam: float = 1.0) -> CalibrationMap:
    """Ridge fit of ``t ~ M n + b`` with an unpenalized bias.

    Minimizes ``sum_i ||M n_i + b - t_i||^2 + lam ||M||_F^2``.
    """
    if not lam > 0:
        raise InvalidArgumentError(f"ridge strength must be positive, got {lam}")
    N = np.asarray(neural, dtype=np.float64)
    T = np.asarray(text, dtype=np.float64)
    if N.ndim != 2 or N.shape != T.shape or N.shape[0] < 1:
        raise ShapeError("calibration needs matching (N, D) neural and text arrays")
    n_mean = N.mean(axis=0)
    t_mean = T.mean(axis=0)
    Nc = N - n_mean
    Tc = T - t_mean
    gram = Nc.T @ Nc + lam * np.eye(N.shape[1])
    M = np.linalg.solve(gram, Nc.T @ Tc).T
    return CalibrationMap(M, t_mean - M @ n_mean, float(lam))


# ---------------------------------------------------------------------------
# Inversion


def _unit_rows(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize integer count vectors; zero rows stay zero and are flagged."""
    R = raw.astype(np.float64)
    norms = np.sqrt(np.sum(R * R, axis=1))
    ok = norms > 0
    R[ok] /= norms[ok, None]
    return R, ok


def _score(emb: np.ndarray, target: np.ndarray) -> float:
    return float(np.dot(emb, target))


class _Beam:
    """Hypotheses as token-index tuples plus their raw (integer) feature vectors."""

    def __init__(self, seqs: list[tuple[int, ...]], raw: np.ndarray):
        self.seqs = seqs
        self.raw = raw


def _expand(beam: _Beam, tok_raw: np.ndarray, max_len: int):
    """All single-token edits of every beam entry.

    Returns (parent, kind, pos, word) index arrays and the raw vector of each
    candidate; kind 0 = substitute, 1 = insert, 2 = delete.
    """
    V = tok_raw.shape[0]
    parts_meta = []
    parts_raw = []
    words = np.arange(V)
    for p, seq in enumerate(beam.seqs):
        base = beam.raw[p]
        L = len(seq)
        for pos in range(L):
            parts_meta.append(np.stack([np.full(V, p), np.zeros(V, int), np.full(V, pos), words], 1))
            parts_raw.append(base - tok_raw[seq[pos]] + tok_raw)
        if L < max_len:
            ins = base + tok_raw
            for pos in range(L + 1):
                parts_meta.append(np.stack([np.full(V, p), np.ones(V, int), np.full(V, pos), words], 1))
                parts_raw.append(ins)
        if L > 1:
            for pos in range(L):
                parts_meta.append(np.array([[p, 2, pos, -1]]))
                parts_raw.append((base - tok_raw[seq[pos]])[None])
    return np.concatenate(parts_meta), np.concatenate(parts_raw)


def _apply_edit(seq: tuple[int, ...], kind: int, pos: int, word: int) -> tuple[int, ...]:
    if kind == 0:
        return seq[:pos] + (word,) + seq[pos + 1:]
    if kind == 1:
        return seq[:pos] + (word,) + seq[pos:]
    return seq[:pos] + seq[pos + 1:]


def _select(scores: np.ndarray, k: int, seq_of, key_of) -> list:
    """Top ``k`` candidate groups by score, ties broken by lexicographic token order.

    ``seq_of(i)`` lists the token sequences of group ``i``; the smallest one
    represents it. ``key_of(seq)`` maps index tuples to comparable strings.
    """
    order = np.argsort(-scores, kind="stable")
    chosen = []
    pos = 0
    while pos < len(order) and len(chosen) < k:
        s = scores[order[pos]]
        end = pos
        while end < len(order) and scores[order[end]] == s:
            end += 1
        group = []
        for i in order[pos:end]:
            rep = min(seq_of(int(i)), key=key_of)
            group.append((key_of(rep), rep, int(i)))
        group.sort()
        chosen.extend(group[: k - len(chosen)])
        pos = end
    return chosen


def invert(target: np.ndarray, vocab: Vocabulary | Sequence[str], max_len: int = 12,
           beam_width: int = 8, max_steps: int = 16, embedder: HashEmbedder | None = None) -> Hypothesis:
    """Token sequence (over ``vocab``) whose embedding best matches ``target``.

    Deterministic: ties are broken by lexicographic order of the token
    sequence. Returns the best hypothesis seen at any step.
    """
    words = list(vocab.words if isinstance(vocab, Vocabulary) else vocab)
    if not words:
        raise InvalidArgumentError("vocabulary is empty")
    if max_len < 1 or beam_width < 1 or max_steps < 0:
        raise InvalidArgumentError("max_len and beam_width must be >= 1, max_steps >= 0")
    emb = embedder or default_embedder()
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (emb.dim,):
        raise ShapeError(f"target has shape {target.shape}, expected ({emb.dim},)")
    tok_raw = emb.token_matrix(words)

    def key_of(seq):
        return tuple(words[i] for i in seq)

    # initial beam: best single words
    U, ok = _unit_rows(tok_raw)
    scores = np.where(ok, U @ target, -np.inf)
    picked = _select(scores, beam_width, lambda i: [(i,)], key_of)
    beam = _Beam([rep for _, rep, _ in picked], tok_raw[[i for _, _, i in picked]])
    best_seq = beam.seqs[0]
    best_score = scores[picked[0][2]]

    for _ in range(max_steps):
        meta, raw = _expand(beam, tok_raw, max_len)
        uniq, first, inverse = np.unique(raw, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        U, ok = _unit_rows(uniq)
        scores = np.where(ok, U @ target, -np.inf)

        def seqs_of(u):
            members = np.flatnonzero(inverse == u)
            return {_apply_edit(beam.seqs[meta[m, 0]], *meta[m, 1:]) for m in members}

        picked = _select(scores, beam_width, seqs_of, key_of)
        beam = _Beam([rep for _, rep, _ in picked], uniq[[u for _, _, u in picked]])
        step_best = scores[picked[0][2]]
        if step_best > best_score + IMPROVE_TOL:
            best_score = step_best
            best_seq = beam.seqs[0]
        else:
            break

    tokens = key_of(best_seq)
    e = emb.embed_tokens(tokens)
    return Hypothesis(tokens, e, _score(e, target))


def brute_force_invert(target: np.ndarray, vocab: Sequence[str], max_len: int,
                       embedder: HashEmbedder | None = None) -> Hypothesis:
    """Exhaustive argmax over every sequence of length 1..max_len (small vocabularies only).

    Ties go to the lexicographically smallest token sequence.
    """
    emb = embedder or default_embedder()
    words = list(vocab.words if isinstance(vocab, Vocabulary) else vocab)
    if not words:
        raise InvalidArgumentError("vocabulary is empty")
    target = np.asarray(target, dtype=np.float64)
    tok_raw = emb.token_matrix(words)
    V = len(words)
    best_key, best_score = None, -np.inf
    for L in range(1, max_len + 1):
        # rows of ``idx`` enumerate sequences in lexicographic index order
        idx = np.indices((V,) * L).reshape(L, -1).T
        U, ok = _unit_rows(tok_raw[idx].sum(axis=1))
        scores = np.where(ok, U @ target, -np.inf)
        top = scores.max()
        for i in np.flatnonzero(scores == top):
            key = tuple(words[j] for j in idx[i])
            if top > best_score or (top == best_score and key < best_key):
                best_key, best_score = key, top
    e = emb.embed_tokens(best_key)
    return Hypothesis(best_key, e, _score(e, target))


# ---------------------------------------------------------------------------
# Full decoding


def decode(params, cmap: CalibrationMap, segment, vocab: Vocabulary | Sequence[str],
           search: SearchConfig = SearchConfig(), embedder: HashEmbedder | None = None) -> tuple[str, float]:
    """Adapter forward, calibration, inversion. Returns (text, cosine score)."""
    target = cmap.apply(adapter_mod.forward(params, segment))
    hyp = invert(target, vocab, search.max_len, search.beam_width, search.max_steps, embedder)
    return hyp.text, hyp.score


def decode_many(params, cmap: CalibrationMap, segments, vocab, search: SearchConfig = SearchConfig(),
                embedder: HashEmbedder | None = None) -> list[Hypothesis]:
    targets = cmap.apply(adapter_mod.embed_segments(params, segments))
    return [invert(t, vocab, search.max_len, search.beam_width, search.max_steps, embedder) for t in targets]

