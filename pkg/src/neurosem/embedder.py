"""Signed feature-hashing sentence embedder.

Every sentence is mapped to a bag of features (word unigrams plus boundary
marked character trigrams of every token). Each feature is hashed to one of
``dim`` buckets with a +/-1 sign, the signed counts are summed and the result is
L2-normalized. The map is deterministic across runs and platforms for a fixed
seed, and it only depends on the multiset of tokens, so word order is ignored.

Because the raw (unnormalized) vector of a sentence is the integer sum of its
token vectors, :meth:`HashEmbedder.raw_tokens` lets search code build candidate
embeddings incrementally while staying bit-identical to :meth:`HashEmbedder.embed`.
"""
from __future__ import annotations

import re
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from neurosem.errors import EmptyTextError, InvalidArgumentError

#: Embedding dimension shared by every module.
EMBED_DIM = 64
#: Pinned default hash seed.
DEFAULT_SEED = 0x5EED_2025_0A11_9E37

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def normalize_text(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric run, dropping empties."""
    return [tok for tok in _TOKEN_RE.split(text.lower()) if tok]


def hash64(feature: str, seed: int = DEFAULT_SEED) -> int:
    """Seeded 64-bit FNV-1a followed by the splitmix64 finalizer."""
    h = (_FNV_OFFSET ^ seed) & _MASK64
    for byte in feature.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    h ^= h >> 30
    h = (h * 0xBF58476D1CE4E5B9) & _MASK64
    h ^= h >> 27
    h = (h * 0x94D049BB133111EB) & _MASK64
    h ^= h >> 31
    return h


def token_features(token: str) -> list[str]:
    """Unigram feature plus the trigrams of ``#token#``."""
    marked = f"#{token}#"
    grams = [marked[i:i + 3] for i in range(len(marked) - 2)]
    return [f"w:{token}"] + [f"c:{g}" for g in grams]


def unit(vec: np.ndarray) -> np.ndarray:
    """L2-normalize; raises on a zero vector."""
    norm = np.sqrt(np.dot(vec, vec))
    if norm == 0.0:
        raise EmptyTextError("embedding has zero norm")
    return vec / norm


class HashEmbedder:
    """Deterministic text -> unit vector map.

    Parameters
    ----------
    dim : int
        Number of hash buckets (embedding dimension).
    seed : int
        64-bit hash seed.
    """

    def __init__(self, dim: int = EMBED_DIM, seed: int = DEFAULT_SEED):
        if dim < 1:
            raise InvalidArgumentError("dim must be positive")
        self.dim = int(dim)
        self.seed = int(seed) & _MASK64
        self._token_vector = lru_cache(maxsize=None)(self._compute_token_vector)

    def __repr__(self):
        return f"HashEmbedder(dim={self.dim}, seed={self.seed:#x})"

    def __eq__(self, other):
        return isinstance(other, HashEmbedder) and (self.dim, self.seed) == (other.dim, other.seed)

    def __hash__(self):
        return hash((self.dim, self.seed))

    def _compute_token_vector(self, token: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.int64)
        for feat in token_features(token):
            h = hash64(feat, self.seed)
            sign = -1 if (h >> 63) & 1 else 1
            vec[h % self.dim] += sign
        vec.setflags(write=False)
        return vec

    def token_vector(self, token: str) -> np.ndarray:
        """Signed integer feature counts of one normalized token."""
        return self._token_vector(token)

    def raw_tokens(self, tokens: Iterable[str]) -> np.ndarray:
        raw = np.zeros(self.dim, dtype=np.int64)
        for tok in tokens:
            raw += self._token_vector(tok)
        return raw

    def token_matrix(self, vocab: Sequence[str]) -> np.ndarray:
        """Stack of token vectors, one row per vocabulary entry."""
        return np.stack([self._token_vector(w) for w in vocab]) if vocab else np.zeros((0, self.dim), np.int64)

    def embed_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            raise EmptyTextError("cannot embed an empty token list")
        return unit(self.raw_tokens(tokens).astype(np.float64))

    def embed(self, text: str) -> np.ndarray:
        """Unit-norm embedding of ``text``; raises EmptyTextError if it has no tokens."""
        tokens = normalize_text(text)
        if not tokens:
            raise EmptyTextError(f"text {text!r} has no tokens")
        return self.embed_tokens(tokens)

    def embed_many(self, texts: Iterable[str]) -> np.ndarray:
        return np.stack([self.embed(t) for t in texts])


_DEFAULT = HashEmbedder()


def default_embedder() -> HashEmbedder:
    return _DEFAULT


def embed(text: str) -> np.ndarray:
    return _DEFAULT.embed(text)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two unit vectors (their dot product)."""
    return float(np.dot(a, b))
