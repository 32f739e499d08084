"""Evaluation protocol: cross-validation, ablations, held-out stories and
scaling sweeps, plus report emission.

Every fold derives its seeds from ``(plan.seed, fold index)`` so results do
not depend on the order folds are executed in.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr

from neurosem import adapter as adapter_mod
from neurosem import baseline as baseline_mod
from neurosem import metrics, plots
from neurosem.adapter import AdapterParams, TrainingConfig, TrainResult
from neurosem.corrector import CalibrationMap, SearchConfig, Vocabulary, calibrate, invert
from neurosem.embedder import HashEmbedder, default_embedder
from neurosem.errors import ConfigError, InvalidArgumentError
from neurosem.metrics import ScoreReport
from neurosem.signal_preproc import (
    EnvelopeFeatures,
    SentenceSegment,
    TranscriptManifest,
    frame_window,
    preprocess,
    segment_by_sentence,
)
from neurosem.synthdata import SynthConfig, generate

MODES = ("cross_validation", "out_of_domain", "ablation", "data_scaling", "electrode_scaling")
ABLATIONS = ("full", "adapter_only", "corrector_only", "random")
MODEL_LABEL = "neuro2semantic"


def _from_dict(cls, d: dict, what: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{what} section must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown {what} option(s): {sorted(unknown)}")
    try:
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})
    except TypeError as exc:
        raise ConfigError(f"bad {what} options: {exc}") from exc


@dataclass(frozen=True)
class PreprocessConfig:
    low_hz: float = 70.0
    high_hz: float = 150.0
    frame_rate_hz: float = 100.0


@dataclass(frozen=True)
class BaselineConfig:
    lags: tuple = baseline_mod.DEFAULT_LAGS
    lam: float = 10.0
    beam_width: int = 8
    max_len: int = 8
    proposals: int = 8
    lm_k: float = 0.1


@dataclass(frozen=True)
class ExperimentPlan:
    mode: str = "cross_validation"
    fractions: tuple = (0.2, 0.4, 0.6, 0.8, 1.0)
    repeats: int = 5
    seed: int = 0
    test_fraction: float = 0.2
    calibration_lambda: float = 0.01
    run_baseline: bool = True
    synth: SynthConfig = SynthConfig()
    preprocess: PreprocessConfig = PreprocessConfig()
    training: TrainingConfig = TrainingConfig()
    search: SearchConfig = SearchConfig()
    baseline: BaselineConfig = BaselineConfig()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.fractions or any(not (0 < f <= 1) for f in self.fractions):
            raise ConfigError("fractions must lie in (0, 1]")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not (0 < self.test_fraction < 1):
            raise ConfigError("test_fraction must lie in (0, 1)")
        if not self.calibration_lambda > 0:
            raise ConfigError("calibration_lambda must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        """Build from a config mapping with optional nested sections.

        Top-level plan options may also be grouped under ``experiment``.
        """
        if not isinstance(d, dict):
            raise ConfigError("config must be an object")
        d = dict(d)
        d.update(d.pop("experiment", {}) or {})
        nested = {"synth": SynthConfig, "preprocess": PreprocessConfig, "training": TrainingConfig,
                  "search": SearchConfig, "baseline": BaselineConfig}
        kw = {name: _from_dict(kind, d.pop(name), name) for name, kind in nested.items() if name in d}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment option(s): {sorted(unknown)}")
        kw.update({k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                v = v.to_dict() if hasattr(v, "to_dict") else dataclasses.asdict(v)
                v = {k: list(x) if isinstance(x, tuple) else x for k, x in v.items()}
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def with_seed(self, seed: int) -> "ExperimentPlan":
        return replace(self, seed=seed, synth=replace(self.synth, seed=seed),
                       training=replace(self.training, seed=seed))


# ---------------------------------------------------------------------------
# Corpus


@dataclass
class Corpus:
    """Sentence segments with their text embeddings, ready for training."""

    segments: list[SentenceSegment]
    embeddings: np.ndarray
    tails: list[np.ndarray]  # frames right after each sentence (for FIR lags)
    lexicon: list[str]
    channel_ids: list[str]

    @property
    def ids(self) -> list[str]:
        return [s.sentence_id for s in self.segments]

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.segments]

    @property
    def story_ids(self) -> list[str]:
        return list(dict.fromkeys(s.story_id for s in self.segments))

    def story_indices(self, story_id: str) -> list[int]:
        return [i for i, s in enumerate(self.segments) if s.story_id == story_id]

    def select_channels(self, idx: Sequence[int]) -> "Corpus":
        idx = list(idx)
        segs = [SentenceSegment(s.story_id, s.text, s.features[:, idx], s.index) for s in self.segments]
        return Corpus(segs, self.embeddings, [t[:, idx] for t in self.tails], self.lexicon,
                      [self.channel_ids[i] for i in idx])


def build_corpus(features: dict[str, EnvelopeFeatures], manifest: TranscriptManifest,
                 lexicon: Sequence[str] | None = None, tail_frames: int = 3,
                 embedder: HashEmbedder | None = None) -> Corpus:
    emb = embedder or default_embedder()
    segs, tails = [], []
    for story in manifest.stories:
        feats = features[story.story_id]
        story_segs = segment_by_sentence(feats, manifest, story.story_id)
        for seg, sent in zip(story_segs, story.sentences):
            _, hi = frame_window(sent.start_s, sent.end_s, feats.frame_rate_hz)
            tail = feats.data[hi:hi + tail_frames]
            if tail.shape[0] < tail_frames:
                edge = seg.features[-1:] if tail.shape[0] == 0 else tail[-1:]
                tail = np.concatenate([tail, np.repeat(edge, tail_frames - tail.shape[0], axis=0)])
            tails.append(tail)
        segs.extend(story_segs)
    if lexicon is None:
        lexicon = Vocabulary.from_texts([s.text for s in segs]).words
    E = np.stack([emb.embed(s.text) for s in segs])
    channel_ids = list(next(iter(features.values())).channel_ids)
    return Corpus(segs, E, tails, sorted(lexicon), channel_ids)


def synthetic_corpus(plan: ExperimentPlan, embedder: HashEmbedder | None = None):
    """Generate, preprocess and segment the synthetic experiment of ``plan``."""
    recs, manifest, gt = generate(plan.synth, embedder)
    pre = plan.preprocess
    feats = {sid: preprocess(rec, pre.low_hz, pre.high_hz, pre.frame_rate_hz) for sid, rec in recs.items()}
    lags = plan.baseline.lags
    corpus = build_corpus(feats, manifest, plan.synth.lexicon(), max(lags) if lags else 0, embedder)
    return corpus, manifest, gt


def load_corpus(data_dir, plan: ExperimentPlan, embedder: HashEmbedder | None = None) -> Corpus:
    """Corpus from a dataset directory written by ``storage.write_dataset``."""
    from neurosem import storage

    kind, arrays, manifest, gt = storage.read_dataset(data_dir)
    pre = plan.preprocess
    if kind == "raw":
        arrays = {sid: preprocess(rec, pre.low_hz, pre.high_hz, pre.frame_rate_hz) for sid, rec in arrays.items()}
    lexicon = SynthConfig.from_dict(gt.config).lexicon() if gt is not None and gt.config else None
    lags = plan.baseline.lags
    return build_corpus(arrays, manifest, lexicon, max(lags) if lags else 0, embedder)


def tail_split(corpus: Corpus, test_fraction: float, stories: Sequence[str] | None = None):
    """Hold out the final ``test_fraction`` of each story's sentences (at least one)."""
    stories = corpus.story_ids if stories is None else stories
    test = []
    for sid in stories:
        idx = corpus.story_indices(sid)
        n_test = max(1, int(round(test_fraction * len(idx))))
        test.extend(idx[-n_test:])
    test_set = set(test)
    return [i for i in range(len(corpus.segments)) if i not in test_set], test


# ---------------------------------------------------------------------------
# Pipeline pieces


def train_phase1(corpus: Corpus, idx: Sequence[int], config: TrainingConfig,
                 log_batches: bool = False) -> TrainResult:
    return adapter_mod.train_adapter([corpus.segments[i] for i in idx], corpus.embeddings[list(idx)],
                                     config, ids=[corpus.segments[i].sentence_id for i in idx],
                                     log_batches=log_batches)


def initial_params(corpus: Corpus, config: TrainingConfig) -> AdapterParams:
    """The seed-initialized (untrained) adapter that ``train_adapter`` would start from."""
    init_seed = int(np.random.SeedSequence(config.seed).generate_state(2)[0])
    return AdapterParams.init(len(corpus.channel_ids), config.hidden, corpus.embeddings.shape[1], init_seed)


def fit_phase2(params: AdapterParams, corpus: Corpus, idx: Sequence[int], lam: float) -> CalibrationMap:
    neural = adapter_mod.embed_segments(params, [corpus.segments[i] for i in idx])
    return calibrate(neural, corpus.embeddings[list(idx)], lam)


def decode_indices(params: AdapterParams, cmap: CalibrationMap, corpus: Corpus, idx: Sequence[int],
                   search: SearchConfig, embedder: HashEmbedder | None = None) -> list[str]:
    targets = cmap.apply(adapter_mod.embed_segments(params, [corpus.segments[i] for i in idx]))
    vocab = Vocabulary(corpus.lexicon)
    return [invert(t, vocab, search.max_len, search.beam_width, search.max_steps, embedder).text
            for t in targets]


def fit_baseline(corpus: Corpus, idx: Sequence[int], cfg: BaselineConfig):
    idx = list(idx)
    lengths = [corpus.segments[i].num_frames for i in idx]
    design, _ = baseline_mod.sentence_design(corpus.embeddings[idx], lengths, cfg.lags)
    pad = max(cfg.lags)
    responses = np.concatenate([np.concatenate([corpus.segments[i].features, corpus.tails[i][:pad]])
                                for i in idx])
    model = baseline_mod.fit_encoding(design, responses, cfg.lam, cfg.lags)
    lm = baseline_mod.NgramLM([corpus.segments[i].text for i in idx], cfg.lm_k)
    return model, lm


def decode_baseline(model, lm, corpus: Corpus, idx: Sequence[int], cfg: BaselineConfig,
                    embedder: HashEmbedder | None = None) -> list[str]:
    out = []
    for i in idx:
        seg = corpus.segments[i]
        hyp = baseline_mod.beam_decode(model, seg.features, (0, seg.num_frames), lm, cfg.beam_width,
                                       cfg.max_len, cfg.proposals, embedder)
        out.append(hyp.text)
    return out


def fold_seed(plan_seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([plan_seed, *keys]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Results


@dataclass
class FoldResult:
    fold_id: str
    train_ids: list[str]
    test_ids: list[str]
    reports: dict[str, ScoreReport]
    batch_log: list[list[str]] = field(default_factory=list)
    loss_curve: list[float] = field(default_factory=list)
    seed: int = 0
    info: dict = field(default_factory=dict)
    params: AdapterParams | None = field(default=None, repr=False)

    def summary(self) -> dict:
        out = {"fold": self.fold_id, "seed": self.seed, "n_train": len(self.train_ids),
               "n_test": len(self.test_ids), "reports": {k: r.summary() for k, r in self.reports.items()}}
        if self.loss_curve:
            out["final_loss"] = self.loss_curve[-1]
        out.update(self.info)
        return out


@dataclass
class ExperimentResult:
    mode: str
    folds: list[FoldResult]
    pooled: dict[str, ScoreReport] = field(default_factory=dict)
    scaling: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def label_scores(self, label: str, metric: str = "semantic") -> list[float]:
        return list(getattr(self.pooled[label], metric))

    def csv_rows(self):
        for fold in self.folds:
            for label, rep in fold.reports.items():
                for row in rep.rows():
                    yield {"fold": fold.fold_id, **row}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["fold"] + metrics.CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows())
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "pooled": {k: r.summary() for k, r in self.pooled.items()},
            "folds": [f.summary() for f in self.folds],
            "scaling": self.scaling,
            "metadata": self.metadata,
        }


def _pool(folds: Sequence[FoldResult], label: str) -> ScoreReport:
    reps = [f.reports[label] for f in folds]
    return ScoreReport(
        [s for r in reps for s in r.sentence_ids],
        [s for r in reps for s in r.candidates],
        [s for r in reps for s in r.references],
        [s for r in reps for s in r.bleu],
        [s for r in reps for s in r.semantic],
        label=label,
    )


def _pool_all(folds, labels, against="random") -> dict[str, ScoreReport]:
    pooled = {label: _pool(folds, label) for label in labels}
    for label, rep in pooled.items():
        if label != against and against in pooled and len(rep) >= 3:
            try:
                rep.compare(pooled[against])
            except InvalidArgumentError:
                rep.p_value = None
    return pooled


def _meta(plan: ExperimentPlan, started: float) -> dict:
    return {"plan": plan.to_dict(), "seed": plan.seed, "wall_time_s": round(time.time() - started, 3)}


def _evaluate_fold(plan: ExperimentPlan, corpus: Corpus, k: int, fold_id: str, train: list[int],
                   test: list[int], embedder=None) -> FoldResult:
    seed = fold_seed(plan.seed, k)
    res = train_phase1(corpus, train, plan.training, log_batches=True)
    cmap = fit_phase2(res.params, corpus, train, plan.calibration_lambda)
    ids = [corpus.ids[i] for i in test]
    refs = [corpus.texts[i] for i in test]
    reports = {MODEL_LABEL: metrics.score_pairs(
        ids, decode_indices(res.params, cmap, corpus, test, plan.search, embedder), refs,
        MODEL_LABEL, embedder)}
    if plan.run_baseline:
        model, lm = fit_baseline(corpus, train, plan.baseline)
        reports["baseline"] = metrics.score_pairs(
            ids, decode_baseline(model, lm, corpus, test, plan.baseline, embedder), refs, "baseline", embedder)
    reports["random"] = metrics.random_control(refs, corpus.texts, seed, ids, embedder)
    return FoldResult(fold_id, [corpus.ids[i] for i in train], ids, reports, res.batch_log,
                      res.loss_curve, seed, params=res.params)


def _check_stories(corpus: Corpus):
    if len(corpus.story_ids) < 2:
        raise InvalidArgumentError("at least two stories are required")


def run_cv(plan: ExperimentPlan, corpus: Corpus | None = None, embedder=None,
           folds: Sequence[int] | None = None) -> ExperimentResult:
    """One fold per story: its final block of sentences is the test set."""
    started = time.time()
    corpus = corpus if corpus is not None else synthetic_corpus(plan, embedder)[0]
    _check_stories(corpus)
    stories = corpus.story_ids
    out = []
    for k, sid in enumerate(stories):
        if folds is not None and k not in folds:
            continue
        _, test = tail_split(corpus, plan.test_fraction, [sid])
        train = [i for i in range(len(corpus.segments)) if i not in set(test)]
        out.append(_evaluate_fold(plan, corpus, k, sid, train, test, embedder))
    labels = list(out[0].reports)
    return ExperimentResult("cross_validation", out, _pool_all(out, labels), {}, _meta(plan, started))


def run_out_of_domain(plan: ExperimentPlan, corpus: Corpus | None = None, embedder=None,
                      folds: Sequence[int] | None = None) -> ExperimentResult:
    """One fold per story: the whole story is excluded from both training phases."""
    started = time.time()
    corpus = corpus if corpus is not None else synthetic_corpus(plan, embedder)[0]
    _check_stories(corpus)
    out = []
    for k, sid in enumerate(corpus.story_ids):
        if folds is not None and k not in folds:
            continue
        test = corpus.story_indices(sid)
        train = [i for i in range(len(corpus.segments)) if corpus.segments[i].story_id != sid]
        out.append(_evaluate_fold(plan, corpus, k, sid, train, test, embedder))
    labels = list(out[0].reports)
    return ExperimentResult("out_of_domain", out, _pool_all(out, labels), {}, _meta(plan, started))


def run_ablation(plan: ExperimentPlan, corpus: Corpus | None = None, embedder=None,
                 folds: Sequence[int] | None = None) -> ExperimentResult:
    """Full model vs. adapter only (identity calibration) vs. corrector only
    (untrained adapter + calibration) vs. random control, per CV fold."""
    started = time.time()
    corpus = corpus if corpus is not None else synthetic_corpus(plan, embedder)[0]
    _check_stories(corpus)
    out = []
    for k, sid in enumerate(corpus.story_ids):
        if folds is not None and k not in folds:
            continue
        _, test = tail_split(corpus, plan.test_fraction, [sid])
        train = [i for i in range(len(corpus.segments)) if i not in set(test)]
        seed = fold_seed(plan.seed, k)
        ids = [corpus.ids[i] for i in test]
        refs = [corpus.texts[i] for i in test]
        res = train_phase1(corpus, train, plan.training, log_batches=True)
        untrained = initial_params(corpus, plan.training)
        variants = {
            "full": (res.params, fit_phase2(res.params, corpus, train, plan.calibration_lambda)),
            "adapter_only": (res.params, CalibrationMap.identity(corpus.embeddings.shape[1])),
            "corrector_only": (untrained, fit_phase2(untrained, corpus, train, plan.calibration_lambda)),
        }
        reports = {
            name: metrics.score_pairs(ids, decode_indices(p, cm, corpus, test, plan.search, embedder),
                                      refs, name, embedder)
            for name, (p, cm) in variants.items()
        }
        reports["random"] = metrics.random_control(refs, corpus.texts, seed, ids, embedder)
        out.append(FoldResult(sid, [corpus.ids[i] for i in train], ids, reports, res.batch_log,
                              res.loss_curve, seed, params=res.params))
    return ExperimentResult("ablation", out, _pool_all(out, ABLATIONS), {}, _meta(plan, started))


def run_scaling(plan: ExperimentPlan, axis: str = "data", corpus: Corpus | None = None,
                embedder=None) -> ExperimentResult:
    """Retrain on random subsets of sentences (``data``) or channels (``electrodes``).

    The test split is fixed (the final block of every story). Subsets are drawn
    per repeat; the training seed stays ``plan.training.seed`` so a fraction of
    1.0 reproduces the same model in every repeat.
    """
    if axis not in ("data", "electrodes"):
        raise InvalidArgumentError(f"axis must be 'data' or 'electrodes', got {axis!r}")
    started = time.time()
    corpus = corpus if corpus is not None else synthetic_corpus(plan, embedder)[0]
    train, test = tail_split(corpus, plan.test_fraction)
    n_channels = len(corpus.channel_ids)
    axis_code = 0 if axis == "data" else 1
    ids = [corpus.ids[i] for i in test]
    refs = [corpus.texts[i] for i in test]
    cache: dict = {}
    folds = []
    rows = []
    for fi, frac in enumerate(plan.fractions):
        for r in range(plan.repeats):
            rng = np.random.default_rng(fold_seed(plan.seed, axis_code, fi, r))
            if axis == "data":
                n_sub = int(round(frac * len(train)))
                if n_sub < 2:
                    raise InvalidArgumentError(f"fraction {frac} leaves {n_sub} training sentences")
                sub = sorted(rng.choice(train, n_sub, replace=False).tolist())
                chans = list(range(n_channels))
            else:
                n_sub = int(math.floor(frac * n_channels))
                if n_sub < 1:
                    raise InvalidArgumentError(f"fraction {frac} leaves no electrodes")
                chans = sorted(rng.choice(n_channels, n_sub, replace=False).tolist())
                sub = list(train)
            key = (tuple(sub), tuple(chans))
            if key not in cache:
                view = corpus if len(chans) == n_channels else corpus.select_channels(chans)
                res = train_phase1(view, sub, plan.training)
                cmap = fit_phase2(res.params, view, sub, plan.calibration_lambda)
                texts = decode_indices(res.params, cmap, view, test, plan.search, embedder)
                cache[key] = (res, texts)
            res, texts = cache[key]
            rep = metrics.score_pairs(ids, texts, refs, MODEL_LABEL, embedder)
            fold_id = f"{axis}-{frac:g}-r{r}"
            folds.append(FoldResult(fold_id, [corpus.ids[i] for i in sub], ids, {MODEL_LABEL: rep},
                                    [], res.loss_curve, plan.training.seed,
                                    {"fraction": frac, "repeat": r, "channels": len(chans)}))
            rows.append({"fraction": frac, "repeat": r, "semantic_mean": rep.semantic_mean,
                         "bleu_mean": rep.bleu_mean, "n_train": len(sub), "n_channels": len(chans)})
    table = scaling_table(rows, plan.fractions)
    means = [t["semantic_mean"] for t in table]
    rho = spearmanr(list(plan.fractions), means).statistic if len(set(means)) > 1 else float("nan")
    scaling = {"axis": axis, "rows": rows, "table": table, "spearman_semantic": float(rho)}
    return ExperimentResult(f"{axis}_scaling" if axis == "data" else "electrode_scaling", folds, {},
                            scaling, _meta(plan, started))


def scaling_table(rows: list[dict], fractions: Sequence[float]) -> list[dict]:
    """Mean and sample sd across repeats of the per-repeat mean scores, per fraction."""
    table = []
    for frac in fractions:
        sel = [r for r in rows if r["fraction"] == frac]
        sem = np.array([r["semantic_mean"] for r in sel])
        ble = np.array([r["bleu_mean"] for r in sel])
        sd = (lambda v: float(np.std(v, ddof=1)) if v.size > 1 else 0.0)
        table.append({"fraction": frac, "repeats": len(sel),
                      "semantic_mean": float(sem.mean()), "semantic_sd": sd(sem),
                      "bleu_mean": float(ble.mean()), "bleu_sd": sd(ble)})
    return table


def run(plan: ExperimentPlan, corpus: Corpus | None = None, embedder=None) -> ExperimentResult:
    if plan.mode == "cross_validation":
        return run_cv(plan, corpus, embedder)
    if plan.mode == "out_of_domain":
        return run_out_of_domain(plan, corpus, embedder)
    if plan.mode == "ablation":
        return run_ablation(plan, corpus, embedder)
    return run_scaling(plan, "data" if plan.mode == "data_scaling" else "electrodes", corpus, embedder)


# ---------------------------------------------------------------------------
# Reports


def side_by_side(result: ExperimentResult) -> str:
    lines = []
    for fold in result.folds:
        labels = [l for l in fold.reports if l != "random"]
        for i, sid in enumerate(fold.test_ids):
            ref = next(iter(fold.reports.values())).references[i]
            lines.append(f"[{fold.fold_id}] {sid}")
            lines.append(f"  reference      : {ref}")
            for label in labels:
                lines.append(f"  {label:<15}: {fold.reports[label].candidates[i]}")
        lines.append("")
    return "\n".join(lines)


def emit_report(result: ExperimentResult, out_dir) -> dict[str, Path]:
    """Write per-sentence CSV, aggregate JSON, side-by-side transcripts and SVG plots."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / "sentences.csv",
        "json": out / "summary.json",
        "transcripts": out / "transcripts.txt",
    }
    paths["csv"].write_text(result.to_csv())
    paths["json"].write_text(json.dumps(result.summary(), indent=2, sort_keys=True, default=float) + "\n")
    paths["transcripts"].write_text(side_by_side(result))
    if result.pooled:
        paths["comparison_svg"] = out / "comparison.svg"
        paths["comparison_svg"].write_text(plots.box_plot(
            {k: r.semantic for k, r in result.pooled.items()},
            title=f"{result.mode}: semantic score", ylabel="semantic score"))
    if result.scaling:
        table = result.scaling["table"]
        paths["scaling_svg"] = out / f"scaling_{result.scaling['axis']}.svg"
        paths["scaling_svg"].write_text(plots.line_plot(
            [t["fraction"] for t in table],
            {"semantic": ([t["semantic_mean"] for t in table], [t["semantic_sd"] for t in table]),
             "bleu": ([t["bleu_mean"] for t in table], [t["bleu_sd"] for t in table])},
            title=f"{result.scaling['axis']} scaling", xlabel="fraction", ylabel="score"))
    return paths
