"""Decoding metrics: sentence BLEU, embedding-cosine semantic score, random
control and the paired t-test used for significance."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from neurosem.embedder import HashEmbedder, default_embedder, normalize_text
from neurosem.errors import DegenerateInputError, InvalidArgumentError

MAX_ORDER = 4


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str, max_order: int = MAX_ORDER) -> float:
    """Sentence-level BLEU with add-one smoothing on orders >= 2.

    Unigram precision is left unsmoothed so a candidate sharing no word with the
    reference scores exactly 0. Brevity penalty ``exp(1 - r/c)`` when ``c < r``.
    """
    ref = normalize_text(reference)
    if not ref:
        raise InvalidArgumentError("reference must contain at least one token")
    cand = normalize_text(candidate)
    if not cand:
        return 0.0
    log_p = 0.0
    for n in range(1, max_order + 1):
        c_counts = _ngrams(cand, n)
        r_counts = _ngrams(ref, n)
        matched = sum(min(c, r_counts[g]) for g, c in c_counts.items())
        total = sum(c_counts.values())
        if n == 1:
            if matched == 0:
                return 0.0
            p = matched / total
        else:
            p = (matched + 1) / (total + 1)
        log_p += math.log(p) / max_order
    c, r = len(cand), len(ref)
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return min(1.0, bp * math.exp(log_p))


def semantic_score(candidate: str, reference: str, embedder: HashEmbedder | None = None) -> float:
    emb = embedder or default_embedder()
    return float(np.dot(emb.embed(candidate), emb.embed(reference)))


# ---------------------------------------------------------------------------
# Student t distribution


def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom.

    Uses ``I_{df/(df+t^2)}(df/2, 1/2)``; the continued fraction converges to
    ~1e-14, well inside the 1e-6 accuracy the tests demand.
    """
    if math.isinf(t):
        return 0.0
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


@dataclass
class TTestResult:
    t: float
    df: int
    p: float


def paired_t(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidArgumentError("paired samples must be 1-D and equally long")
    n = a.size
    if n < 3:
        raise InvalidArgumentError("paired t-test needs at least 3 pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if not sd > 0.0:
        raise DegenerateInputError("differences have zero variance")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    return TTestResult(t, n - 1, t_sf_two_sided(t, n - 1))


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided p-value of the paired t-test."""
    return paired_t(a, b).p


# ---------------------------------------------------------------------------
# Reports


@dataclass
class ScoreReport:
    """Per-sentence scores plus aggregates recomputed from them."""

    sentence_ids: list[str]
    candidates: list[str]
    references: list[str]
    bleu: list[float]
    semantic: list[float]
    label: str = ""
    p_value: float | None = None
    compared_to: str | None = None
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.bleu)

    @staticmethod
    def _agg(values):
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            return float("nan"), float("nan")
        sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        return float(np.mean(v)), sd

    @property
    def bleu_mean(self) -> float:
        return self._agg(self.bleu)[0]

    @property
    def bleu_sd(self) -> float:
        return self._agg(self.bleu)[1]

    @property
    def semantic_mean(self) -> float:
        return self._agg(self.semantic)[0]

    @property
    def semantic_sd(self) -> float:
        return self._agg(self.semantic)[1]

    def compare(self, other: "ScoreReport", metric: str = "semantic") -> float:
        """Paired t-test of this report against ``other`` (same sentences); stores the p-value."""
        if self.sentence_ids != other.sentence_ids:
            raise InvalidArgumentError("reports cover different sentences")
        self.p_value = paired_t_test(getattr(self, metric), getattr(other, metric))
        self.compared_to = other.label
        return self.p_value

    def summary(self) -> dict:
        out = {
            "label": self.label,
            "n": len(self),
            "bleu_mean": self.bleu_mean,
            "bleu_sd": self.bleu_sd,
            "semantic_mean": self.semantic_mean,
            "semantic_sd": self.semantic_sd,
        }
        if self.p_value is not None:
            out["p_value"] = self.p_value
            out["compared_to"] = self.compared_to
        out.update(self.extra)
        return out

    def rows(self):
        for i in range(len(self)):
            yield {
                "label": self.label,
                "sentence_id": self.sentence_ids[i],
                "reference": self.references[i],
                "candidate": self.candidates[i],
                "bleu": repr(float(self.bleu[i])),
                "semantic": repr(float(self.semantic[i])),
            }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


CSV_FIELDS = ["label", "sentence_id", "reference", "candidate", "bleu", "semantic"]


def score_pairs(sentence_ids, candidates, references, label="", embedder=None) -> ScoreReport:
    emb = embedder or default_embedder()
    candidates = list(candidates)
    references = list(references)
    if len(candidates) != len(references):
        raise InvalidArgumentError("candidate and reference lists differ in length")
    b = [bleu(c, r) for c, r in zip(candidates, references)]
    s = [semantic_score(c, r, emb) if normalize_text(c) else 0.0 for c, r in zip(candidates, references)]
    return ScoreReport(list(sentence_ids), candidates, references, b, s, label=label)


def random_control(references: Sequence[str], corpus: Sequence[str], seed: int,
                   sentence_ids: Sequence[str] | None = None, embedder=None) -> ScoreReport:
    """Score each reference against a uniformly drawn corpus sentence that differs from it."""
    corpus = list(corpus)
    if len(corpus) < 2:
        raise InvalidArgumentError("random control needs a corpus of at least 2 sentences")
    rng = np.random.default_rng(seed)
    picks = []
    for ref in references:
        pool = [c for c in corpus if normalize_text(c) != normalize_text(ref)]
        if not pool:
            raise InvalidArgumentError(f"no corpus sentence differs from reference {ref!r}")
        picks.append(pool[int(rng.integers(len(pool)))])
    ids = list(sentence_ids) if sentence_ids is not None else [str(i) for i in range(len(picks))]
    return score_pairs(ids, picks, references, label="random", embedder=embedder)
