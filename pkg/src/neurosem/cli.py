"""Command-line entry point: ``neurosem <command> [options]``.

Global options (``--config``, ``--seed``, ``--out``) may appear before or after
the command. Every command writes ``run.json`` with the resolved configuration
into the output directory.

Exit codes: 0 success, 1 unexpected failure (e.g. a failed check),
2 invalid configuration or arguments, 3 numerical divergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from neurosem import __version__, adapter, metrics, storage
from neurosem import experiment as ex
from neurosem.corrector import CalibrationMap, Vocabulary, invert
from neurosem.errors import ConfigError, InvalidArgumentError, NeuroSemError
from neurosem.signal_preproc import preprocess
from neurosem.synthdata import generate

log = logging.getLogger("neurosem")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3, 4


def load_plan(args) -> ex.ExperimentPlan:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
    plan = ex.ExperimentPlan.from_dict(cfg)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        plan = plan.with_seed(args.seed)
    return plan


def _out(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run(out: Path, args, plan: ex.ExperimentPlan, started: float, **extra):
    record = {
        "command": args.command,
        "version": __version__,
        "seed": plan.seed,
        "config": plan.to_dict(),
        "wall_time_s": round(time.time() - started, 3),
    }
    record.update(extra)
    storage.write_json(out / "run.json", record)


def _corpus(args, plan):
    if getattr(args, "data", None):
        return ex.load_corpus(args.data, plan)
    return ex.synthetic_corpus(plan)[0]


def _split(corpus: ex.Corpus, args, plan) -> tuple[list[int], list[int]]:
    """Train/test indices: a held-out story if ``--story`` is given, else story tails."""
    if getattr(args, "story", None):
        if args.story not in corpus.story_ids:
            raise InvalidArgumentError(f"unknown story {args.story!r}")
        test = corpus.story_indices(args.story)
        return [i for i in range(len(corpus.segments)) if i not in set(test)], test
    return ex.tail_split(corpus, plan.test_fraction)


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(args, plan, out):
    recs, manifest, gt = generate(plan.synth)
    storage.write_dataset(out, recs, manifest, "raw", gt)
    print(f"wrote {len(recs)} stories, {len(gt.sentence_ids)} sentences to {out}")


def cmd_preprocess(args, plan, out):
    kind, arrays, manifest, gt = storage.read_dataset(args.data)
    if kind != "raw":
        raise InvalidArgumentError(f"{args.data} already holds features")
    pre = plan.preprocess
    feats = {sid: preprocess(rec, pre.low_hz, pre.high_hz, pre.frame_rate_hz) for sid, rec in arrays.items()}
    storage.write_dataset(out, feats, manifest, "features", gt)
    print(f"wrote features for {len(feats)} stories to {out}")


def cmd_train(args, plan, out):
    corpus = _corpus(args, plan)
    train, test = _split(corpus, args, plan)
    if args.all:
        train, test = list(range(len(corpus.segments))), []
    res = ex.train_phase1(corpus, train, plan.training, log_batches=True)
    cmap = ex.fit_phase2(res.params, corpus, train, plan.calibration_lambda)
    storage.write_adapter(out / "adapter", res.params, plan.training.seed, plan.training.to_dict())
    storage.write_calibration(out / "calibration", cmap)
    storage.write_json(out / "training.json", {
        "loss_curve": res.loss_curve, "train_ids": [corpus.ids[i] for i in train],
        "test_ids": [corpus.ids[i] for i in test], "channel_ids": corpus.channel_ids,
        "lexicon": corpus.lexicon, "batches": res.batch_log,
    })
    print(f"trained on {len(train)} sentences, final loss {res.loss_curve[-1] if res.loss_curve else float('nan'):.4f}")


def cmd_decode(args, plan, out):
    corpus = _corpus(args, plan)
    model_dir = Path(args.model)
    params = storage.read_adapter(model_dir / "adapter")
    cmap = (CalibrationMap.identity(params.dim) if args.no_calibration
            else storage.read_calibration(model_dir / "calibration"))
    info = storage.read_json(model_dir / "training.json")
    test_ids = info.get("test_ids") or corpus.ids
    if args.story:
        test_ids = [corpus.ids[i] for i in corpus.story_indices(args.story)]
    pos = {sid: i for i, sid in enumerate(corpus.ids)}
    idx = [pos[s] for s in test_ids]
    targets = cmap.apply(adapter.embed_segments(params, [corpus.segments[i] for i in idx]))
    vocab = Vocabulary(info.get("lexicon") or corpus.lexicon)
    s = plan.search
    rows = []
    for i, t in zip(idx, targets):
        hyp = invert(t, vocab, s.max_len, s.beam_width, s.max_steps)
        rows.append({"sentence_id": corpus.ids[i], "reference": corpus.texts[i],
                     "candidate": hyp.text, "score": repr(hyp.score)})
    _write_decoded(out / "decoded.csv", rows)
    storage.write_embeddings(out / "neural_embeddings.json", targets)
    print(f"decoded {len(rows)} sentences to {out / 'decoded.csv'}")


def cmd_baseline(args, plan, out):
    corpus = _corpus(args, plan)
    train, test = _split(corpus, args, plan)
    model, lm = ex.fit_baseline(corpus, train, plan.baseline)
    storage.write_encoding(out / "encoding", model)
    texts = ex.decode_baseline(model, lm, corpus, test, plan.baseline)
    rows = [{"sentence_id": corpus.ids[i], "reference": corpus.texts[i], "candidate": t}
            for i, t in zip(test, texts)]
    _write_decoded(out / "decoded.csv", rows)
    print(f"baseline decoded {len(rows)} sentences to {out / 'decoded.csv'}")


def _write_decoded(path: Path, rows: list[dict]):
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["sentence_id"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def cmd_evaluate(args, plan, out):
    with Path(args.decoded).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"sentence_id", "reference", "candidate"} <= set(rows[0]):
        raise InvalidArgumentError(f"{args.decoded} needs sentence_id, reference and candidate columns")
    ids = [r["sentence_id"] for r in rows]
    refs = [r["reference"] for r in rows]
    rep = metrics.score_pairs(ids, [r["candidate"] for r in rows], refs, args.label)
    corpus_texts = refs
    if args.data:
        corpus_texts = [s.text for st in storage.read_dataset(args.data)[2].stories for s in st.sentences]
    control = metrics.random_control(refs, corpus_texts, plan.seed, ids)
    if len(rep) >= 3:
        try:
            rep.compare(control)
        except InvalidArgumentError as exc:
            log.warning("no paired test: %s", exc)
    (out / "scores.csv").write_text(rep.to_csv() + control.to_csv().split("\n", 1)[1])
    storage.write_json(out / "scores.json", {"model": rep.summary(), "random": control.summary()})
    print(json.dumps({"model": rep.summary(), "random": control.summary()}, indent=2))


def _run_experiment(args, plan, out, mode):
    plan = replace(plan, mode=mode)
    if getattr(args, "no_baseline", False):
        plan = replace(plan, run_baseline=False)
    result = ex.run(plan, _corpus(args, plan))
    paths = ex.emit_report(result, out)
    if result.pooled:
        for label, rep in result.pooled.items():
            p = f"  p={rep.p_value:.3g}" if rep.p_value is not None else ""
            print(f"{label:<16} semantic {rep.semantic_mean:.3f} +- {rep.semantic_sd:.3f}"
                  f"  bleu {rep.bleu_mean:.3f}{p}")
    if result.scaling:
        for row in result.scaling["table"]:
            print(f"fraction {row['fraction']:<4g} semantic {row['semantic_mean']:.3f} +- {row['semantic_sd']:.3f}")
        print(f"spearman {result.scaling['spearman_semantic']:.3f}")
    return {"outputs": {k: str(v) for k, v in paths.items()}}, plan


def cmd_gradcheck(args, plan, out):
    results = []
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        C, H, D, B = 3, 6, 8, 4
        params = adapter.AdapterParams.init(C, H, D, seed)
        params.bias += rng.normal(0, 0.1, params.bias.shape)
        segs = [rng.normal(size=(int(rng.integers(3, 7)), C)) for _ in range(B)]
        text = rng.normal(size=(B, D))
        text /= np.linalg.norm(text, axis=1, keepdims=True)
        cfg = replace(plan.training, hidden=H)
        errs = adapter.grad_check(params, segs, text, cfg)
        results.append({"seed": seed, "max_rel_err": max(errs.values()), "blocks": errs})
    worst = max(r["max_rel_err"] for r in results)
    storage.write_json(out / "gradcheck.json", {"results": results, "worst": worst, "tolerance": args.tol})
    print(f"worst relative error {worst:.3e} over {args.seeds} seeds (tolerance {args.tol:g})")
    return {"worst": worst}, plan, EXIT_OK if worst < args.tol else EXIT_FAIL


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (u64)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="neurosem", parents=[common],
                                     description="Neural-to-text semantic decoding toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, data=False, data_required=False):
        p = sub.add_parser(name, parents=[common], help=help_)
        if data:
            p.add_argument("--data", required=data_required,
                           help="dataset directory (synthesized from the config when omitted)")
        return p

    add("synth", "generate a synthetic dataset")
    add("preprocess", "extract high-gamma envelope features", data=True, data_required=True)
    p = add("train", "train the adapter and fit the calibration map", data=True)
    p.add_argument("--story", help="hold out this whole story (default: hold out story tails)")
    p.add_argument("--all", action="store_true", help="train on every sentence")
    p = add("decode", "decode sentences with a trained model", data=True)
    p.add_argument("--model", required=True, help="directory written by 'train'")
    p.add_argument("--story", help="decode this story instead of the model's held-out sentences")
    p.add_argument("--no-calibration", action="store_true", help="use the identity calibration")
    p = add("baseline", "fit and run the encoding-model baseline", data=True)
    p.add_argument("--story", help="hold out this whole story (default: hold out story tails)")
    p = add("evaluate", "score a decoded.csv against its references")
    p.add_argument("--decoded", required=True)
    p.add_argument("--data", help="dataset whose transcripts feed the random control")
    p.add_argument("--label", default="model")
    for name, help_ in (("cv", "leave-one-story-tail-out cross-validation"),
                        ("ablation", "full / adapter-only / corrector-only / random"),
                        ("ood", "held-out whole stories")):
        p = add(name, help_, data=True)
        if name != "ablation":
            p.add_argument("--no-baseline", action="store_true", help="skip the baseline decoder")
    p = add("scaling", "data or electrode scaling sweep", data=True)
    p.add_argument("--axis", choices=("data", "electrodes"), default="data")
    p = add("gradcheck", "finite-difference gradient check of the adapter")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-4)
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "decode": cmd_decode,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
}
EXPERIMENTS = {"cv": "cross_validation", "ablation": "ablation", "ood": "out_of_domain"}


def _dispatch(args) -> int:
    started = time.time()
    plan = load_plan(args)
    out = _out(args)
    code = EXIT_OK
    extra = {}
    if args.command in EXPERIMENTS:
        extra, plan = _run_experiment(args, plan, out, EXPERIMENTS[args.command])
    elif args.command == "scaling":
        mode = "data_scaling" if args.axis == "data" else "electrode_scaling"
        extra, plan = _run_experiment(args, plan, out, mode)
    else:
        ret = COMMANDS[args.command](args, plan, out)
        if ret is not None:
            extra, plan, code = ret
    _write_run(out, args, plan, started, **extra)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("config", "seed", "out", "verbose"):
        if not hasattr(args, name):
            setattr(args, name, None)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except NeuroSemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
