"""Seeded synthetic listening experiment with a known stimulus -> signal map.

Each channel carries an in-band (high-gamma) sinusoidal carrier whose amplitude
during a sentence is ``offset + mixing[channel] . embed(sentence)`` shaped by a
cosine-tapered bump over the sentence window. The preprocessing pipeline
therefore has to recover the envelope to see the stimulus. White Gaussian
noise is scaled so the clean/noise power ratio over speech windows equals the
configured SNR exactly.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from neurosem.embedder import EMBED_DIM, HashEmbedder, default_embedder
from neurosem.errors import ConfigError, GrammarExhaustedError, UnknownSentenceError
from neurosem.signal_preproc import RawRecording, Sentence, Story, TranscriptManifest, sentence_id

SUBJECTS = ("doctor", "teacher", "farmer", "pilot", "singer", "lawyer",
            "baker", "sailor", "painter", "driver", "writer", "hunter")
VERBS = ("visits", "paints", "builds", "watches", "carries", "finds",
         "cleans", "sells", "opens", "follows", "draws", "fixes")
OBJECTS = ("garden", "bridge", "window", "river", "castle", "engine",
           "basket", "ladder", "mirror", "piano", "tunnel", "harbor")
MODIFIERS = ("slowly", "quietly", "early", "daily", "gladly", "rarely",
             "boldly", "calmly", "twice", "again", "often", "nearby")


@dataclass(frozen=True)
class SynthConfig:
    num_stories: int = 6
    sentences_per_story: int = 20
    channels: int = 64
    sample_rate_hz: float = 1000.0
    snr_db: float = 10.0
    noiseless: bool = False
    seed: int = 0
    subjects: tuple = SUBJECTS
    verbs: tuple = VERBS
    objects: tuple = OBJECTS
    modifiers: tuple = MODIFIERS
    modifier_prob: float = 0.5
    word_duration_s: float = 0.25
    gap_s: float = 0.35
    lead_s: float = 0.5
    carrier_low_hz: float = 85.0
    carrier_high_hz: float = 135.0
    offset: float = 1.0
    modulation_sd: float = 0.35
    taper: float = 0.5
    dim: int = EMBED_DIM

    def __post_init__(self):
        for name in ("subjects", "verbs", "objects", "modifiers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.num_stories < 2:
            raise ConfigError("num_stories must be >= 2 for leave-one-story-out evaluation")
        if self.sentences_per_story < 1 or self.channels < 1:
            raise ConfigError("sentences_per_story and channels must be >= 1")
        if not self.noiseless and not math.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite unless noiseless is set")
        if not (0 <= self.modifier_prob <= 1) or not (0 < self.taper <= 1):
            raise ConfigError("modifier_prob must be in [0, 1] and taper in (0, 1]")
        if not (0 < self.carrier_low_hz < self.carrier_high_hz < self.sample_rate_hz / 2):
            raise ConfigError("carrier band must lie below Nyquist")
        if not (self.subjects and self.verbs and self.objects):
            raise ConfigError("grammar needs subjects, verbs and objects")

    @property
    def num_sentences(self) -> int:
        return self.num_stories * self.sentences_per_story

    def grammar_size(self) -> int:
        base = len(self.subjects) * len(self.verbs) * len(self.objects)
        if self.modifier_prob >= 1:
            return base * len(self.modifiers)
        if self.modifier_prob <= 0 or not self.modifiers:
            return base
        return base * (1 + len(self.modifiers))

    def lexicon(self) -> list[str]:
        return sorted(set(self.subjects + self.verbs + self.objects + self.modifiers))

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth option(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("subjects", "verbs", "objects", "modifiers"):
            d[k] = list(d[k])
        return d


@dataclass
class GroundTruth:
    sentence_ids: list[str]
    texts: list[str]
    embeddings: np.ndarray  # (N, D)
    mixing: np.ndarray  # (C, D)
    offsets: np.ndarray  # (C,)
    carrier_hz: np.ndarray  # (C,)
    carrier_phase: np.ndarray  # (C,)
    noise_seeds: list[int]
    config: dict = field(default_factory=dict)

    def index(self, sid: str) -> int:
        try:
            return self.sentence_ids.index(sid)
        except ValueError:
            raise UnknownSentenceError(sid) from None


def oracle_embedding(gt: GroundTruth, sid: str) -> np.ndarray:
    """The exact text embedding used to generate sentence ``sid``."""
    return gt.embeddings[gt.index(sid)].copy()


def tapered_bump(n: int, taper: float) -> np.ndarray:
    """Cosine-tapered window (Tukey): raised-cosine rise and fall around a flat top."""
    if n <= 1:
        return np.ones(n)
    x = np.arange(n) / (n - 1)
    w = np.ones(n)
    edge = taper / 2
    lo = x < edge
    w[lo] = 0.5 * (1 - np.cos(np.pi * x[lo] / edge))
    hi = x > 1 - edge
    w[hi] = 0.5 * (1 - np.cos(np.pi * (1 - x[hi]) / edge))
    return w


def sample_sentences(config: SynthConfig, rng: np.random.Generator) -> list[str]:
    n = config.num_sentences
    if config.grammar_size() < n:
        raise GrammarExhaustedError(
            f"grammar yields {config.grammar_size()} distinct sentences, {n} requested"
        )
    seen: set[str] = set()
    out: list[str] = []
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise GrammarExhaustedError("could not draw enough distinct sentences")
        words = [config.subjects[rng.integers(len(config.subjects))],
                 config.verbs[rng.integers(len(config.verbs))],
                 config.objects[rng.integers(len(config.objects))]]
        if config.modifiers and rng.random() < config.modifier_prob:
            words.append(config.modifiers[rng.integers(len(config.modifiers))])
        text = " ".join(words)
        if text not in seen:
            seen.add(text)
            out.append(text)
    return out


def speech_mask(num_samples: int, sentences, sample_rate_hz: float) -> np.ndarray:
    mask = np.zeros(num_samples, dtype=bool)
    for s in sentences:
        mask[int(round(s.start_s * sample_rate_hz)):int(round(s.end_s * sample_rate_hz))] = True
    return mask


def generate(config: SynthConfig = SynthConfig(), embedder: HashEmbedder | None = None):
    """Build recordings, manifest and ground truth.

    Returns ``(recordings, manifest, ground_truth)`` where ``recordings`` maps
    story id to :class:`RawRecording`.
    """
    emb = embedder or default_embedder()
    if emb.dim != config.dim:
        raise ConfigError(f"embedder dim {emb.dim} differs from config dim {config.dim}")
    master = np.random.SeedSequence(config.seed)
    grammar_ss, mix_ss, noise_ss = master.spawn(3)
    texts = sample_sentences(config, np.random.default_rng(grammar_ss))
    E = np.stack([emb.embed(t) for t in texts])

    mrng = np.random.default_rng(mix_ss)
    C = config.channels
    mixing = mrng.normal(0.0, config.modulation_sd, (C, config.dim))
    offsets = np.full(C, config.offset)
    carrier = mrng.uniform(config.carrier_low_hz, config.carrier_high_hz, C)
    phase = mrng.uniform(0.0, 2 * np.pi, C)
    amplitudes = np.maximum(offsets[None, :] + E @ mixing.T, 0.0)  # (N, C)

    story_seeds = noise_ss.spawn(config.num_stories)
    noise_seeds = [int(s.generate_state(1)[0]) for s in story_seeds]
    sr = config.sample_rate_hz
    channel_ids = [f"ch{c:03d}" for c in range(C)]
    recordings = {}
    stories = []
    ids = []
    k = 0
    for s in range(config.num_stories):
        story_id = f"story{s}"
        sents = []
        t = config.lead_s
        for j in range(config.sentences_per_story):
            dur = config.word_duration_s * len(texts[k + j].split())
            sents.append(Sentence(texts[k + j], round(t, 6), round(t + dur, 6)))
            t += dur + config.gap_s
        total = t - config.gap_s + config.lead_s
        n = int(math.ceil(total * sr))
        time_s = np.arange(n) / sr
        clean = np.zeros((n, C))
        for j, sent in enumerate(sents):
            lo = int(round(sent.start_s * sr))
            hi = int(round(sent.end_s * sr))
            bump = tapered_bump(hi - lo, config.taper)
            carrier_wave = np.cos(2 * np.pi * carrier[None, :] * time_s[lo:hi, None] + phase[None, :])
            clean[lo:hi] = bump[:, None] * amplitudes[k + j][None, :] * carrier_wave
            ids.append(sentence_id(story_id, j))
        data = clean
        if not config.noiseless:
            noise = np.random.default_rng(noise_seeds[s]).standard_normal((n, C))
            speech = speech_mask(n, sents, sr)
            p_clean = np.mean(clean[speech] ** 2)
            p_noise = np.mean(noise[speech] ** 2)
            scale = math.sqrt(p_clean / (10 ** (config.snr_db / 10) * p_noise))
            data = clean + scale * noise
        recordings[story_id] = RawRecording(sr, data, channel_ids)
        stories.append(Story(story_id, sents))
        k += config.sentences_per_story

    manifest = TranscriptManifest(stories)
    gt = GroundTruth(ids, texts, E, mixing, offsets, carrier, phase, noise_seeds, config.to_dict())
    return recordings, manifest, gt


def measured_snr_db(noisy: RawRecording, clean: RawRecording, sentences) -> float:
    """Clean-to-noise power ratio over speech windows, in dB."""
    speech = speech_mask(noisy.num_samples, sentences, noisy.sample_rate_hz)
    noise = noisy.data[speech] - clean.data[speech]
    p_noise = np.mean(noise ** 2)
    if p_noise == 0:
        return math.inf
    return 10 * math.log10(np.mean(clean.data[speech] ** 2) / p_noise)
