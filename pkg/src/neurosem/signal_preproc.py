"""High-gamma envelope extraction, frame averaging and sentence segmentation.

The band-pass is a zero-phase frequency-domain mask: unit gain inside
``[low_hz, high_hz]`` with raised-cosine skirts of ``TRANSITION_HZ`` outside each
edge. It is applied to the full-record FFT together with the analytic-signal
weighting (negative frequencies zeroed, positive doubled), so one inverse FFT
yields the band-limited analytic signal whose magnitude is the envelope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from neurosem.embedder import normalize_text
from neurosem.errors import InvalidArgumentError, OutOfRangeError, ShapeError, TooShortError

TRANSITION_HZ = 5.0
HIGH_GAMMA = (70.0, 150.0)
MIN_SAMPLES = 8


@dataclass
class RawRecording:
    """Multichannel time series, ``data`` is (samples, channels)."""

    sample_rate_hz: float
    data: np.ndarray
    channel_ids: list[str]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 1:
            self.data = self.data[:, None]
        if self.data.ndim != 2:
            raise ShapeError("recording data must be (samples, channels)")
        if self.sample_rate_hz <= 0:
            raise InvalidArgumentError("sample_rate_hz must be positive")
        if self.data.shape[0] < 1:
            raise TooShortError("recording has no samples")
        if len(self.channel_ids) != self.data.shape[1]:
            raise ShapeError(
                f"{len(self.channel_ids)} channel ids for {self.data.shape[1]} channels"
            )
        self.channel_ids = [str(c) for c in self.channel_ids]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def num_samples(self) -> int:
        return self.data.shape[0]


@dataclass
class EnvelopeFeatures:
    frame_rate_hz: float
    data: np.ndarray
    channel_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ShapeError("features must be (frames, channels)")
        if not self.channel_ids:
            self.channel_ids = [f"ch{i:03d}" for i in range(self.data.shape[1])]

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    def select_channels(self, idx) -> "EnvelopeFeatures":
        idx = list(idx)
        return EnvelopeFeatures(self.frame_rate_hz, self.data[:, idx], [self.channel_ids[i] for i in idx])


@dataclass(frozen=True)
class Sentence:
    text: str
    start_s: float
    end_s: float


@dataclass
class Story:
    story_id: str
    sentences: list[Sentence]


@dataclass
class TranscriptManifest:
    """Per-story sentence timing. Validated on construction."""

    stories: list[Story]

    def __post_init__(self):
        seen = set()
        for story in self.stories:
            if story.story_id in seen:
                raise InvalidArgumentError(f"duplicate story id {story.story_id!r}")
            seen.add(story.story_id)
            prev_end = -math.inf
            for k, sent in enumerate(story.sentences):
                where = f"story {story.story_id!r} sentence {k}"
                if not normalize_text(sent.text):
                    raise InvalidArgumentError(f"{where} has empty text")
                if not (0 <= sent.start_s < sent.end_s):
                    raise InvalidArgumentError(f"{where} has invalid window [{sent.start_s}, {sent.end_s})")
                if sent.start_s < prev_end:
                    raise InvalidArgumentError(f"{where} overlaps or precedes the previous sentence")
                prev_end = sent.end_s

    def story(self, story_id: str) -> Story:
        for s in self.stories:
            if s.story_id == story_id:
                return s
        raise KeyError(story_id)

    @property
    def story_ids(self) -> list[str]:
        return [s.story_id for s in self.stories]

    def to_dict(self) -> dict:
        return {
            "stories": [
                {
                    "story_id": s.story_id,
                    "sentences": [
                        {"text": x.text, "start_s": x.start_s, "end_s": x.end_s} for x in s.sentences
                    ],
                }
                for s in self.stories
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TranscriptManifest":
        try:
            stories = [
                Story(
                    str(s["story_id"]),
                    [Sentence(str(x["text"]), float(x["start_s"]), float(x["end_s"])) for x in s["sentences"]],
                )
                for s in d["stories"]
            ]
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"malformed manifest: {exc}") from exc
        return cls(stories)


@dataclass
class SentenceSegment:
    story_id: str
    text: str
    features: np.ndarray
    index: int = 0

    @property
    def sentence_id(self) -> str:
        return sentence_id(self.story_id, self.index)

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]


def sentence_id(story_id: str, index: int) -> str:
    return f"{story_id}:{index:03d}"


def band_mask(freqs: np.ndarray, low_hz: float, high_hz: float, transition_hz: float = TRANSITION_HZ) -> np.ndarray:
    """Gain of the band-pass at (non-negative) ``freqs``."""
    f = np.abs(freqs)
    gain = ((f >= low_hz) & (f <= high_hz)).astype(np.float64)
    lo = (f > low_hz - transition_hz) & (f < low_hz)
    gain[lo] = 0.5 * (1 - np.cos(np.pi * (f[lo] - (low_hz - transition_hz)) / transition_hz))
    hi = (f > high_hz) & (f < high_hz + transition_hz)
    gain[hi] = 0.5 * (1 + np.cos(np.pi * (f[hi] - high_hz) / transition_hz))
    return gain


def bandpass_hilbert_envelope(raw: RawRecording, low_hz: float = HIGH_GAMMA[0],
                              high_hz: float = HIGH_GAMMA[1]) -> RawRecording:
    """Magnitude of the band-limited analytic signal, per channel."""
    nyquist = raw.sample_rate_hz / 2
    if not (0 < low_hz < high_hz < nyquist):
        raise InvalidArgumentError(
            f"band [{low_hz}, {high_hz}] Hz must satisfy 0 < low < high < {nyquist} Hz"
        )
    n = raw.num_samples
    if n < MIN_SAMPLES:
        raise TooShortError(f"need at least {MIN_SAMPLES} samples, got {n}")
    spec = np.fft.rfft(raw.data, axis=0)
    freqs = np.fft.rfftfreq(n, d=1.0 / raw.sample_rate_hz)
    weight = 2.0 * band_mask(freqs, low_hz, high_hz)
    # DC and (even-length) Nyquist bins are not doubled in the analytic signal
    weight[0] /= 2
    if n % 2 == 0:
        weight[-1] /= 2
    full = np.zeros((n, raw.channels), dtype=np.complex128)
    full[: len(freqs)] = spec * weight[:, None]
    env = np.abs(np.fft.ifft(full, axis=0))
    return RawRecording(raw.sample_rate_hz, env, list(raw.channel_ids))


def downsample(env: RawRecording, target_hz: float = 100.0) -> EnvelopeFeatures:
    """Average consecutive non-overlapping windows of ``sample_rate / target_hz`` samples."""
    if target_hz <= 0 or target_hz > env.sample_rate_hz:
        raise InvalidArgumentError(f"target rate {target_hz} Hz must be in (0, {env.sample_rate_hz}]")
    ratio = env.sample_rate_hz / target_hz
    step = int(round(ratio))
    if step < 1 or abs(ratio - step) > 1e-9:
        raise InvalidArgumentError(
            f"{env.sample_rate_hz} Hz is not an integer multiple of {target_hz} Hz"
        )
    frames = env.num_samples // step
    data = env.data[: frames * step].reshape(frames, step, env.channels).mean(axis=1)
    return EnvelopeFeatures(float(target_hz), data, list(env.channel_ids))


def frame_window(start_s: float, end_s: float, rate_hz: float) -> tuple[int, int]:
    """``[floor(start*rate), ceil(end*rate))``, guarded against float noise."""
    a = start_s * rate_hz
    b = end_s * rate_hz
    lo = math.floor(a + 1e-9)
    hi = math.ceil(b - 1e-9)
    return lo, max(hi, lo + 1)


def segment_by_sentence(features: EnvelopeFeatures, manifest: TranscriptManifest,
                        story_id: str) -> list[SentenceSegment]:
    story = manifest.story(story_id)
    out = []
    for k, sent in enumerate(story.sentences):
        lo, hi = frame_window(sent.start_s, sent.end_s, features.frame_rate_hz)
        if lo < 0 or hi > features.num_frames:
            raise OutOfRangeError(
                f"sentence {k} ({sent.text!r}) frames [{lo}, {hi}) outside recording "
                f"of {features.num_frames} frames"
            )
        out.append(SentenceSegment(story_id, sent.text, features.data[lo:hi], k))
    return out


def preprocess(raw: RawRecording, low_hz: float = HIGH_GAMMA[0], high_hz: float = HIGH_GAMMA[1],
               target_hz: float = 100.0) -> EnvelopeFeatures:
    return downsample(bandpass_hilbert_envelope(raw, low_hz, high_hz), target_hz)
