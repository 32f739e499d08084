"""On-disk formats.

Every array artifact is a pair of files sharing a stem: ``<stem>.json`` holds
the header and ``<stem>.<ext>`` holds raw little-endian numbers. Recordings use
float32 in time-major, channel-minor order; model parameters use float64 blocks
concatenated in the order listed in the header.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from neurosem.adapter import BLOCKS, AdapterParams
from neurosem.baseline import EncodingModel
from neurosem.corrector import CalibrationMap
from neurosem.errors import InvalidArgumentError
from neurosem.signal_preproc import EnvelopeFeatures, RawRecording, TranscriptManifest
from neurosem.synthdata import GroundTruth

F32 = np.dtype("<f4")
F64 = np.dtype("<f8")


def _stem(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".json", ".f32", ".bin") else p


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: invalid JSON ({exc})") from exc


# ---------------------------------------------------------------------------
# Recordings


def write_recording(path, rec: RawRecording) -> None:
    stem = _stem(path)
    header = {
        "sample_rate_hz": rec.sample_rate_hz,
        "channel_ids": list(rec.channel_ids),
        "num_samples": rec.num_samples,
    }
    write_json(stem.with_suffix(".json"), header)
    stem.with_suffix(".f32").write_bytes(np.ascontiguousarray(rec.data, dtype=F32).tobytes())


def read_recording(path) -> RawRecording:
    stem = _stem(path)
    header = read_json(stem.with_suffix(".json"))
    try:
        sr = float(header["sample_rate_hz"])
        ids = list(header["channel_ids"])
        n = int(header["num_samples"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{stem}.json: bad recording header ({exc})") from exc
    raw = np.frombuffer(stem.with_suffix(".f32").read_bytes(), dtype=F32)
    if raw.size != n * len(ids):
        raise InvalidArgumentError(
            f"{stem}.f32 holds {raw.size} values, header implies {n} x {len(ids)}"
        )
    return RawRecording(sr, raw.reshape(n, len(ids)).astype(np.float64), ids)


def write_features(path, feats: EnvelopeFeatures) -> None:
    write_recording(path, RawRecording(feats.frame_rate_hz, feats.data, feats.channel_ids))


def read_features(path) -> EnvelopeFeatures:
    rec = read_recording(path)
    return EnvelopeFeatures(rec.sample_rate_hz, rec.data, rec.channel_ids)


def write_manifest(path, manifest: TranscriptManifest) -> None:
    write_json(path, manifest.to_dict())


def read_manifest(path) -> TranscriptManifest:
    return TranscriptManifest.from_dict(read_json(path))


# ---------------------------------------------------------------------------
# Parameter blobs


def write_blob(path, kind: str, blocks: dict[str, np.ndarray], **meta) -> None:
    stem = _stem(path)
    header = {"format": kind, "byte_order": "little", "dtype": "float64",
              "blocks": [{"name": k, "shape": list(np.shape(v))} for k, v in blocks.items()]}
    header.update(meta)
    write_json(stem.with_suffix(".json"), header)
    payload = b"".join(np.ascontiguousarray(v, dtype=F64).tobytes() for v in blocks.values())
    stem.with_suffix(".bin").write_bytes(payload)


def read_blob(path, kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    stem = _stem(path)
    header = read_json(stem.with_suffix(".json"))
    if header.get("format") != kind:
        raise InvalidArgumentError(f"{stem}.json is a {header.get('format')!r} file, expected {kind!r}")
    flat = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype=F64)
    blocks = {}
    pos = 0
    for spec in header["blocks"]:
        shape = tuple(spec["shape"])
        size = int(np.prod(shape)) if shape else 1
        if pos + size > flat.size:
            raise InvalidArgumentError(f"{stem}.bin is truncated")
        blocks[spec["name"]] = flat[pos:pos + size].reshape(shape).copy()
        pos += size
    if pos != flat.size:
        raise InvalidArgumentError(f"{stem}.bin has {flat.size - pos} trailing values")
    return header, blocks


def write_adapter(path, params: AdapterParams, seed: int | None = None, config: dict | None = None) -> None:
    write_blob(path, "adapter_params", params.blocks(),
               dims={"channels": params.channels, "hidden": params.hidden, "dim": params.dim},
               seed=seed, config=config or {})


def read_adapter(path) -> AdapterParams:
    _, blocks = read_blob(path, "adapter_params")
    return AdapterParams(**{k: blocks[k] for k in BLOCKS})


def write_calibration(path, cmap: CalibrationMap) -> None:
    write_blob(path, "calibration_map", {"matrix": cmap.matrix, "bias": cmap.bias},
               dims={"dim": int(cmap.bias.shape[0])}, lam=cmap.lam)


def read_calibration(path) -> CalibrationMap:
    header, blocks = read_blob(path, "calibration_map")
    return CalibrationMap(blocks["matrix"], blocks["bias"], float(header["lam"]))


def write_encoding(path, model: EncodingModel) -> None:
    write_blob(path, "encoding_model",
               {"weights": model.weights, "intercept": model.intercept, "variance": model.variance},
               lags=model.lags, lam=model.lam,
               dims={"dim": model.dim, "channels": model.channels})


def read_encoding(path) -> EncodingModel:
    header, b = read_blob(path, "encoding_model")
    return EncodingModel(b["weights"], b["intercept"], b["variance"], list(header["lags"]), float(header["lam"]))


def write_ground_truth(path, gt: GroundTruth) -> None:
    write_blob(path, "ground_truth",
               {"embeddings": gt.embeddings, "mixing": gt.mixing, "offsets": gt.offsets,
                "carrier_hz": gt.carrier_hz, "carrier_phase": gt.carrier_phase},
               sentence_ids=gt.sentence_ids, texts=gt.texts, noise_seeds=gt.noise_seeds,
               config=gt.config)


def read_ground_truth(path) -> GroundTruth:
    h, b = read_blob(path, "ground_truth")
    return GroundTruth(list(h["sentence_ids"]), list(h["texts"]), b["embeddings"], b["mixing"],
                       b["offsets"], b["carrier_hz"], b["carrier_phase"], list(h["noise_seeds"]),
                       h.get("config", {}))


def write_embeddings(path, embeddings: np.ndarray) -> None:
    """Embeddings as JSON arrays of numbers."""
    write_json(path, [[float(x) for x in row] for row in np.atleast_2d(embeddings)])


def read_embeddings(path) -> np.ndarray:
    return np.asarray(read_json(path), dtype=np.float64)


# ---------------------------------------------------------------------------
# Dataset directories


def write_dataset(out_dir, recordings: dict, manifest: TranscriptManifest, kind: str = "raw",
                  ground_truth: GroundTruth | None = None) -> Path:
    """Directory with ``index.json``, ``manifest.json`` and one array pair per story.

    ``kind`` is ``raw`` (broadband recordings) or ``features`` (envelope frames).
    """
    if kind not in ("raw", "features"):
        raise InvalidArgumentError(f"dataset kind must be 'raw' or 'features', got {kind!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.json", manifest)
    for sid, rec in recordings.items():
        (write_recording if kind == "raw" else write_features)(out / sid, rec)
    index = {"kind": kind, "stories": list(recordings)}
    if ground_truth is not None:
        write_ground_truth(out / "ground_truth", ground_truth)
        index["ground_truth"] = "ground_truth"
    write_json(out / "index.json", index)
    return out


def read_dataset(data_dir):
    """Inverse of :func:`write_dataset`: ``(kind, arrays, manifest, ground_truth or None)``."""
    root = Path(data_dir)
    index = read_json(root / "index.json")
    kind = index.get("kind")
    if kind not in ("raw", "features"):
        raise InvalidArgumentError(f"{root}/index.json: unknown dataset kind {kind!r}")
    reader = read_recording if kind == "raw" else read_features
    arrays = {sid: reader(root / sid) for sid in index["stories"]}
    manifest = read_manifest(root / "manifest.json")
    gt = read_ground_truth(root / index["ground_truth"]) if index.get("ground_truth") else None
    return kind, arrays, manifest, gt
