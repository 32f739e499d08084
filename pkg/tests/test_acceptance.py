"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the status lines are printed
even when output capture is on.
"""
import json
import math
import time

import numpy as np
import pytest

from neurosem import metrics
from neurosem.adapter import (
    AdapterParams,
    TrainingConfig,
    alignment_loss,
    clip_loss,
    grad_check,
    loss_grad_check,
    triplet_loss,
)
from neurosem.baseline import EncodingModel, fit_encoding, log_likelihood, predict_span, sentence_design
from neurosem.cli import main as cli_main
from neurosem.corrector import brute_force_invert, invert
from neurosem.embedder import embed
from neurosem.experiment import ExperimentPlan, run_ablation, run_cv, run_scaling, synthetic_corpus
from neurosem.signal_preproc import RawRecording, bandpass_hilbert_envelope
from neurosem.synthdata import SUBJECTS, SynthConfig


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        assert ok, detail

    return emit


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_criterion_1_gradient_correctness(verdict):
    start = time.time()
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        H, D, B, C = 8, 8, 4, 3
        cfg = TrainingConfig(hidden=H)
        neural = _unit_rows(rng.normal(size=(B, D)))
        text = _unit_rows(rng.normal(size=(B, D)))
        worst = max(worst,
                    loss_grad_check(lambda x, t: clip_loss(x, t, cfg.tau), neural, text),
                    loss_grad_check(lambda x, t: triplet_loss(x, t, cfg.margin), neural, text),
                    loss_grad_check(lambda x, t: alignment_loss(x, t, cfg), neural, text))
        params = AdapterParams.init(C, H, D, seed)
        params.bias += rng.normal(0, 0.2, params.bias.shape)
        segs = [rng.normal(size=(int(rng.integers(2, 8)), C)) for _ in range(B)]
        worst = max(worst, max(grad_check(params, segs, text, cfg).values()))
    elapsed = time.time() - start
    verdict(1, "gradient correctness", worst < 1e-4 and elapsed < 60,
            f"max relative error {worst:.2e} over 5 seeds in {elapsed:.1f}s")


def test_criterion_2_inversion_oracle(verdict):
    start = time.time()
    vocab = list(SUBJECTS)
    n_candidates = sum(len(vocab) ** L for L in range(1, 4))
    beam8 = exact = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        target = embed(" ".join(rng.choice(vocab, 3)))
        best = brute_force_invert(target, vocab, 3).score
        beam8 += invert(target, vocab, max_len=3, beam_width=8).score >= best - 1e-12
        full = invert(target, vocab, max_len=3, beam_width=n_candidates)
        exact += full.score == pytest.approx(best, abs=1e-12)
    elapsed = time.time() - start
    verdict(2, "inversion oracle equivalence",
            n_candidates == 1884 and beam8 >= 95 and exact == 100 and elapsed < 60,
            f"beam 8: {beam8}/100, beam {n_candidates}: {exact}/100, {elapsed:.1f}s")


def test_criterion_3_dsp(verdict):
    start = time.time()
    sr = 1000.0
    t = np.arange(2048) / sr
    interior = slice(300, -300)

    def envelope(x):
        return bandpass_hilbert_envelope(RawRecording(sr, x[:, None], ["c"])).data[:, 0]

    in_band = np.max(np.abs(envelope(np.cos(2 * np.pi * 110 * t))[interior] - 1.0))
    out_band = np.max(envelope(np.cos(2 * np.pi * 30 * t))[interior])
    rng = np.random.default_rng(0)
    non_negative = all(
        np.all(bandpass_hilbert_envelope(RawRecording(sr, rng.normal(size=(int(rng.integers(8, 3000)), 2)),
                                                      ["a", "b"])).data >= 0)
        for _ in range(100)
    )
    elapsed = time.time() - start
    verdict(3, "DSP correctness", in_band < 0.02 and out_band < 0.05 and non_negative and elapsed < 10,
            f"110 Hz deviation {in_band:.2e}, 30 Hz peak {out_band:.2e}, "
            f"non-negative on 100 signals: {non_negative}, {elapsed:.2f}s")


@pytest.mark.slow
def test_criterion_4_end_to_end_recovery(verdict):
    start = time.time()
    plan = ExperimentPlan(synth=SynthConfig(num_stories=6, sentences_per_story=20, channels=64, snr_db=10.0))
    res = run_cv(plan)
    model, control = res.pooled["neuro2semantic"], res.pooled["random"]
    gap = model.semantic_mean - control.semantic_mean
    elapsed = time.time() - start
    verdict(4, "end-to-end recovery", gap >= 0.3 and model.p_value < 0.05 and elapsed < 600,
            f"semantic {model.semantic_mean:.3f} vs random {control.semantic_mean:.3f} "
            f"(gap {gap:.3f}, p={model.p_value:.2e}), baseline {res.pooled['baseline'].semantic_mean:.3f}, "
            f"{elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_5_ablation_ordering(verdict):
    plan = ExperimentPlan(synth=SynthConfig(noiseless=True))
    res = run_ablation(plan)
    means = {k: r.semantic_mean for k, r in res.pooled.items()}
    p = {k: r.p_value for k, r in res.pooled.items() if k != "random"}
    ok = (means["full"] >= means["adapter_only"] and means["full"] >= means["corrector_only"]
          and all(v < 0.05 for v in p.values()))
    verdict(5, "ablation ordering", ok,
            ", ".join(f"{k} {v:.3f}" for k, v in means.items())
            + "; p vs random " + ", ".join(f"{k} {v:.1e}" for k, v in p.items()))


@pytest.mark.slow
def test_criterion_6_scaling_trend(verdict):
    start = time.time()
    plan = ExperimentPlan(fractions=(0.2, 0.4, 0.6, 0.8, 1.0), repeats=5,
                          synth=SynthConfig(snr_db=10.0))
    corpus = synthetic_corpus(plan)[0]
    rho = {axis: run_scaling(plan, axis, corpus).scaling for axis in ("data", "electrodes")}
    elapsed = time.time() - start
    detail = "; ".join(
        f"{axis} rho={s['spearman_semantic']:.2f} means="
        + "/".join(f"{row['semantic_mean']:.3f}" for row in s["table"])
        for axis, s in rho.items()
    )
    ok = all(s["spearman_semantic"] > 0 for s in rho.values()) and elapsed < 1800
    verdict(6, "scaling trend", ok, f"{detail}, {elapsed:.0f}s")


def test_criterion_7_baseline_encoding(verdict):
    rng = np.random.default_rng(0)
    lags = (0, 1, 2, 3)
    E = rng.normal(size=(40, 8))
    X, _ = sentence_design(E, rng.integers(2, 8, 40), lags)
    W = rng.normal(size=(X.shape[1], 6))
    model = fit_encoding(X, X @ W, lam=1e-9, lags=lags)
    rel = np.linalg.norm(model.weights - W) / np.linalg.norm(W)

    dominant = 0
    words = list(SUBJECTS)
    for seed in range(100):
        r = np.random.default_rng(seed)
        m = EncodingModel(r.normal(0, 0.5, (4 * 64, 8)), r.normal(size=8), np.full(8, 0.1), list(lags), 1.0)
        cands = list(dict.fromkeys(" ".join(r.choice(words, 3)) for _ in range(30)))
        truth = cands[0]
        R = predict_span(m, embed(truth)[None], 15)[0]
        scores = [log_likelihood(m, R, c, (0, 15)) for c in cands]
        dominant += max(scores) == scores[0]
    verdict(7, "baseline encoding recovery", rel < 1e-6 and dominant == 100,
            f"relative Frobenius error {rel:.2e}, planted stimulus dominant in {dominant}/100")


def test_criterion_8_metric_fixtures(verdict):
    identity = all(metrics.bleu(s, s) == 1.0 for s in ["the cat sat on the mat", "a", "x y z w v"])
    pinned = metrics.bleu("the the the", "the cat sat on the mat")
    expected = (1 / 9) ** 0.25 * math.exp(-1)
    t = metrics.paired_t([1, 2, 3, 4, 5], [0] * 5)
    ok = (identity and abs(pinned - expected) < 1e-3 and abs(t.t - 4.2426) < 1e-3 and abs(t.p - 0.0132) < 1e-3)
    verdict(8, "metric fixtures", ok,
            f"bleu(s,s)=1: {identity}, pinned BLEU {pinned:.6f} (hand {expected:.6f}), "
            f"t={t.t:.4f}, p={t.p:.4f}")


def test_criterion_9_cli_determinism(verdict, tmp_path):
    config = {
        "synth": {"num_stories": 3, "sentences_per_story": 10, "channels": 16},
        "training": {"epochs": 20},
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    codes = [cli_main(["--config", str(cfg), "--seed", "7", "--out", str(tmp_path / name), "cv"])
             for name in ("a", "b")]
    a = (tmp_path / "a" / "sentences.csv").read_bytes()
    b = (tmp_path / "b" / "sentences.csv").read_bytes()
    rows = a.count(b"\n") - 1
    verdict(9, "determinism", codes == [0, 0] and a == b and rows > 0,
            f"exit codes {codes}, {rows} CSV rows, byte-identical: {a == b}")
