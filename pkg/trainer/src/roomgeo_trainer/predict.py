"""Run a trained checkpoint over a dataset split and write predictions.

The output file follows the same schema the classical estimator emits,
so the downstream scoring tools accept either interchangeably.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np
import torch

from . import data
from .errors import IncompatibleCheckpoint, InvalidFileFormat
from .model import CRNN, CRNNConfig

# Labels encode floor as a negative z and ceiling as a positive one; a
# raw regression output can land on the wrong side, so nudge it back.
_Z_EPS = 1e-6


def read_checkpoint(path) -> dict:
    """Load and format-check a checkpoint without building the model."""
    try:
        doc = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise InvalidFileFormat(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != "crnn-checkpoint/1":
        raise InvalidFileFormat(f"{path} is not a checkpoint file")
    return doc


def _build_model(doc) -> CRNN:
    config = CRNNConfig(**doc["config"])
    model = CRNN(config, doc["grid"]["theta_count"])
    try:
        model.load_state_dict(doc["state_dict"])
    except RuntimeError as exc:
        raise IncompatibleCheckpoint(
            f"stored weights do not fit the declared architecture: {exc}"
        ) from exc
    model.eval()
    return model


def load_checkpoint(path):
    """Read a checkpoint file and rebuild the model from it."""
    doc = read_checkpoint(path)
    return _build_model(doc), doc


def predict(
    checkpoint_path,
    manifest_path,
    split: str,
    out_path,
    batch_size: int | None = None,
) -> dict:
    """Write a predictions document for ``split`` and return it."""
    manifest = data.load_manifest(manifest_path)
    doc = read_checkpoint(checkpoint_path)
    grid = doc["grid"]
    if (grid["num_radii"] != manifest.num_radii
            or grid["theta_count"] != manifest.theta_count):
        raise IncompatibleCheckpoint(
            f"checkpoint expects a {grid['num_radii']}x{grid['theta_count']} "
            f"grid, dataset has {manifest.num_radii}x{manifest.theta_count}")
    model = _build_model(doc)
    if batch_size is None:
        batch_size = CRNNConfig(**doc["config"]).batch_size

    ids, maps, _ = data.load_split(manifest, split)
    samples = []
    with torch.no_grad():
        for lo in range(0, len(ids), batch_size):
            x = torch.from_numpy(maps[lo:lo + batch_size])
            pred = model(x).numpy().astype(np.float64)
            pred[:, 10] = np.minimum(pred[:, 10], -_Z_EPS)
            pred[:, 11] = np.maximum(pred[:, 11], _Z_EPS)
            for row, sid in zip(pred, ids[lo:lo + batch_size]):
                samples.append({"id": sid, "labels": data.labels_to_doc(row)})

    out = {
        "format": "predictions/1",
        "estimator": "crnn",
        "grid_hash": manifest.grid_hash,
        "samples": samples,
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_path.parent, prefix=out_path.name + ".")
    os.close(fd)
    try:
        Path(tmp).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
        os.replace(tmp, out_path)
    except BaseException:
        os.unlink(tmp)
        raise
    return out
