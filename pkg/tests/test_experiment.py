import csv
import io
import json
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

from neurosem import metrics
from neurosem.adapter import TrainingConfig
from neurosem.corrector import SearchConfig
from neurosem.errors import ConfigError, InvalidArgumentError
from neurosem.experiment import (
    ExperimentPlan,
    emit_report,
    run_ablation,
    run_cv,
    run_out_of_domain,
    run_scaling,
    synthetic_corpus,
    tail_split,
    train_phase1,
)
from neurosem.synthdata import SynthConfig


@pytest.fixture(scope="module")
def small_plan():
    return ExperimentPlan(
        synth=SynthConfig(num_stories=3, sentences_per_story=8, channels=12),
        training=TrainingConfig(epochs=8, hidden=8),
        search=SearchConfig(max_len=6),
        fractions=(0.5, 1.0),
        repeats=2,
    )


@pytest.fixture(scope="module")
def small_corpus(small_plan):
    return synthetic_corpus(small_plan)[0]


@pytest.fixture(scope="module")
def cv_result(small_plan, small_corpus):
    return run_cv(small_plan, small_corpus)


def test_one_fold_per_story_with_disjoint_splits(cv_result, small_corpus):
    assert [f.fold_id for f in cv_result.folds] == small_corpus.story_ids
    for fold in cv_result.folds:
        assert not set(fold.test_ids) & set(fold.train_ids)
        seen = {sid for batch in fold.batch_log for sid in batch}
        assert seen == set(fold.train_ids)
        assert fold.test_ids == [small_corpus.ids[i] for i in small_corpus.story_indices(fold.fold_id)][-2:]


def test_cv_reports_every_label(cv_result):
    assert set(cv_result.pooled) == {"neuro2semantic", "baseline", "random"}
    assert cv_result.pooled["neuro2semantic"].compared_to == "random"
    assert len(cv_result.pooled["random"]) == 6


def test_cv_deterministic(small_plan, small_corpus, cv_result):
    assert run_cv(small_plan, small_corpus).to_csv() == cv_result.to_csv()


def test_fold_results_independent_of_order(small_plan, small_corpus, cv_result):
    alone = run_cv(small_plan, small_corpus, folds=[2]).folds[0]
    full = cv_result.folds[2]
    assert alone.fold_id == full.fold_id
    for label in full.reports:
        assert alone.reports[label].candidates == full.reports[label].candidates


def test_too_few_stories(small_plan, small_corpus):
    one = replace(small_corpus, segments=[s for s in small_corpus.segments if s.story_id == "story0"])
    with pytest.raises(InvalidArgumentError):
        run_cv(small_plan, one)


def test_tail_split_fraction(small_corpus):
    train, test = tail_split(small_corpus, 0.25)
    assert len(test) == 6 and len(train) == 18
    assert {small_corpus.segments[i].index for i in test} == {6, 7}


def test_ablation_wiring(small_plan, small_corpus):
    res = run_ablation(small_plan, small_corpus, folds=[0])
    fold = res.folds[0]
    assert list(fold.reports) == ["full", "adapter_only", "corrector_only", "random"]
    ref = fold.reports["random"]
    direct = metrics.random_control(ref.references, small_corpus.texts, fold.seed, ref.sentence_ids)
    assert direct.candidates == ref.candidates and direct.semantic == ref.semantic
    # both trained variants share the phase 1 weights of a plain training run
    train_idx = [small_corpus.ids.index(s) for s in fold.train_ids]
    plain = train_phase1(small_corpus, train_idx, small_plan.training)
    for k, v in plain.params.blocks().items():
        assert getattr(fold.params, k).tobytes() == v.tobytes()


def test_out_of_domain_excludes_story(small_plan, small_corpus):
    res = run_out_of_domain(small_plan, small_corpus)
    assert res.to_csv() == run_out_of_domain(small_plan, small_corpus).to_csv()
    for fold in res.folds:
        seen = {sid.split(":")[0] for batch in fold.batch_log for sid in batch}
        assert fold.fold_id not in seen
        assert {t.split(":")[0] for t in fold.test_ids} == {fold.fold_id}


def test_scaling_full_fraction_repeats_identical(small_plan, small_corpus):
    res = run_scaling(small_plan, "data", small_corpus)
    full = [r for r in res.scaling["rows"] if r["fraction"] == 1.0]
    assert len(full) == 2 and full[0]["semantic_mean"] == full[1]["semantic_mean"]
    assert res.scaling["table"][-1]["semantic_sd"] == 0.0


def test_electrode_sd_recomputed_from_raw(small_plan, small_corpus):
    res = run_scaling(small_plan, "electrodes", small_corpus)
    for row in res.scaling["table"]:
        raw = [r["semantic_mean"] for r in res.scaling["rows"] if r["fraction"] == row["fraction"]]
        assert row["semantic_sd"] == float(np.std(raw, ddof=1))
        assert row["semantic_mean"] == float(np.mean(raw))
    assert {r["n_channels"] for r in res.scaling["rows"]} == {6, 12}


def test_scaling_empty_subsample(small_plan, small_corpus):
    with pytest.raises(InvalidArgumentError):
        run_scaling(replace(small_plan, fractions=(0.05,)), "electrodes", small_corpus)
    with pytest.raises(InvalidArgumentError):
        run_scaling(replace(small_plan, fractions=(0.01,)), "data", small_corpus)
    with pytest.raises(InvalidArgumentError):
        run_scaling(small_plan, "time", small_corpus)


def test_report_files(cv_result, tmp_path):
    paths = emit_report(cv_result, tmp_path / "rep")
    rows = list(csv.DictReader(io.StringIO(paths["csv"].read_text())))
    assert len(rows) == sum(len(r) for f in cv_result.folds for r in f.reports.values())
    summary = json.loads(paths["json"].read_text())
    for label, agg in summary["pooled"].items():
        vals = [float(r["semantic"]) for r in rows if r["label"] == label]
        assert agg["semantic_mean"] == float(np.mean(vals))
        assert agg["semantic_sd"] == float(np.std(vals, ddof=1))
        assert agg["bleu_mean"] == float(np.mean([float(r["bleu"]) for r in rows if r["label"] == label]))
    assert ET.parse(paths["comparison_svg"]).getroot().tag.endswith("svg")
    assert "reference" in paths["transcripts"].read_text()


def test_scaling_svg(small_plan, small_corpus, tmp_path):
    res = run_scaling(replace(small_plan, repeats=1), "data", small_corpus)
    paths = emit_report(res, tmp_path)
    ET.parse(paths["scaling_svg"])


def test_unwritable_report_path(cv_result, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_report(cv_result, blocker / "sub")


def test_plan_validation_and_parsing():
    with pytest.raises(ConfigError):
        ExperimentPlan(fractions=(0.0, 1.0))
    with pytest.raises(ConfigError):
        ExperimentPlan(repeats=0)
    with pytest.raises(ConfigError):
        ExperimentPlan(mode="bogus")
    plan = ExperimentPlan.from_dict({"synth": {"channels": 8}, "training": {"epochs": 3},
                                     "experiment": {"repeats": 2}, "fractions": [0.5, 1.0]})
    assert plan.synth.channels == 8 and plan.training.epochs == 3 and plan.repeats == 2
    assert plan.fractions == (0.5, 1.0)
    assert ExperimentPlan.from_dict(plan.to_dict()) == plan
    with pytest.raises(ConfigError):
        ExperimentPlan.from_dict({"trainin": {}})
    assert plan.with_seed(9).training.seed == 9


# -- end-to-end runs on noiseless default-size data ----------------------------

@pytest.fixture(scope="module")
def noiseless():
    plan = ExperimentPlan(synth=SynthConfig(noiseless=True), run_baseline=False)
    return plan, synthetic_corpus(plan)[0]


@pytest.mark.slow
def test_noiseless_cv_beats_random(noiseless):
    plan, corpus = noiseless
    res = run_cv(plan, corpus, folds=[0, 1])
    assert res.pooled["neuro2semantic"].semantic_mean > res.pooled["random"].semantic_mean + 0.3


@pytest.mark.slow
def test_noiseless_out_of_domain_beats_random(noiseless):
    plan, corpus = noiseless
    res = run_out_of_domain(plan, corpus, folds=[0])
    assert res.pooled["neuro2semantic"].p_value < 0.05
    assert res.pooled["neuro2semantic"].semantic_mean > res.pooled["random"].semantic_mean


@pytest.mark.slow
def test_noiseless_data_scaling_trend(noiseless):
    plan, corpus = noiseless
    res = run_scaling(replace(plan, repeats=2), "data", corpus)
    assert res.scaling["spearman_semantic"] > 0
