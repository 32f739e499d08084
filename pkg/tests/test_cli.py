import csv
import json

import pytest

from neurosem.cli import main

SMALL = {
    "synth": {"num_stories": 2, "sentences_per_story": 6, "channels": 6},
    "training": {"epochs": 4, "hidden": 6},
    "search": {"max_len": 5},
    "baseline": {"max_len": 3},
    "fractions": [0.5, 1.0],
    "repeats": 1,
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def test_full_workflow(config, tmp_path, capsys):
    data, feats, model = tmp_path / "data", tmp_path / "feats", tmp_path / "model"
    assert run("--config", config, "--out", data, "synth") == 0
    assert (data / "index.json").exists() and (data / "run.json").exists()
    assert run("preprocess", "--config", config, "--data", data, "--out", feats) == 0
    assert run("train", "--config", config, "--data", feats, "--out", model) == 0
    assert (model / "adapter.bin").exists() and (model / "calibration.json").exists()
    assert run("decode", "--config", config, "--data", feats, "--model", model, "--out", tmp_path / "dec") == 0
    rows = list(csv.DictReader((tmp_path / "dec" / "decoded.csv").open()))
    assert len(rows) == 2 and {"sentence_id", "reference", "candidate"} <= set(rows[0])
    assert run("evaluate", "--decoded", tmp_path / "dec" / "decoded.csv", "--data", data,
               "--out", tmp_path / "ev") == 0
    assert json.loads((tmp_path / "ev" / "scores.json").read_text())["model"]["n"] == 2
    assert run("baseline", "--config", config, "--data", data, "--story", "story1", "--out", tmp_path / "bl") == 0
    assert len(list(csv.DictReader((tmp_path / "bl" / "decoded.csv").open()))) == 6
    run_json = json.loads((model / "run.json").read_text())
    assert run_json["command"] == "train" and run_json["config"]["training"]["epochs"] == 4


@pytest.mark.parametrize("command, extra, expected", [
    ("cv", [], "sentences.csv"),
    ("ood", ["--no-baseline"], "comparison.svg"),
    ("ablation", [], "summary.json"),
    ("scaling", ["--axis", "electrodes"], "scaling_electrodes.svg"),
])
def test_experiment_commands(config, tmp_path, command, extra, expected):
    out = tmp_path / command
    assert run("--config", config, "--out", out, "--seed", 4, command, *extra) == 0
    assert (out / expected).exists()
    assert json.loads((out / "run.json").read_text())["seed"] == 4


def test_gradcheck_command(tmp_path):
    assert run("gradcheck", "--seeds", 2, "--out", tmp_path) == 0
    assert json.loads((tmp_path / "gradcheck.json").read_text())["worst"] < 1e-4


def test_invalid_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"training": {"alpha": 2.0}}))
    assert run("--config", bad, "--out", tmp_path, "synth") == 2
    bad.write_text("{not json")
    assert run("--config", bad, "--out", tmp_path, "synth") == 2
    bad.write_text(json.dumps({"unknown": 1}))
    assert run("--config", bad, "--out", tmp_path, "synth") == 2
    assert "error" in capsys.readouterr().err


def test_divergence_exit_code(tmp_path):
    cfg = dict(SMALL, training={"epochs": 3, "hidden": 6, "lr": 1e308})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    with pytest.warns(RuntimeWarning):
        assert run("--config", path, "--out", tmp_path / "o", "train") == 3


def test_io_error_exit_code(tmp_path):
    assert run("--out", tmp_path, "preprocess", "--data", tmp_path / "missing") == 4


def test_seed_range(tmp_path):
    assert run("--seed", -1, "--out", tmp_path, "synth") == 2
