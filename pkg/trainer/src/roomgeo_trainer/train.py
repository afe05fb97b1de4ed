"""Training loop: seeded, early-stopped, with an epoch-by-epoch log.

Batches are assembled from shard records in a freshly shuffled order
each epoch.  Validation loss drives early stopping and checkpoint
selection; with no validation split the training loss stands in, which
is what the overfit sanity check uses.  A non-finite loss aborts
immediately with the epoch and batch where it appeared.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from . import data
from .errors import NonFiniteLoss
from .model import CRNN, CRNNConfig, label_loss

CHECKPOINT_NAME = "checkpoint.pt"
LOG_NAME = "training_log.json"


def _atomic(path: Path, write_fn) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _check_finite(value: float, epoch: int, batch: int, phase: str) -> None:
    if not math.isfinite(value):
        raise NonFiniteLoss(
            f"{phase} loss became {value} at epoch {epoch}, batch {batch}; "
            "check the learning rate and the input maps")


def _epoch_pass(model, maps, labels, order, batch_size, optimizer, epoch):
    """One pass over ``order``; trains when an optimizer is given."""
    training = optimizer is not None
    model.train(training)
    total = 0.0
    count = 0
    with torch.set_grad_enabled(training):
        for b, lo in enumerate(range(0, len(order), batch_size)):
            idx = order[lo:lo + batch_size]
            x = torch.from_numpy(maps[idx])
            y = torch.from_numpy(labels[idx])
            loss = label_loss(model(x), y)
            value = float(loss.detach())
            _check_finite(value, epoch, b, "train" if training else "val")
            if training:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            total += value * len(idx)
            count += len(idx)
    return total / count


def train(
    manifest_path,
    out_dir,
    config: CRNNConfig | None = None,
    seed: int = 0,
    train_split: str = "train",
    val_split: str | None = "val",
    log_cb=None,
) -> dict:
    """Fit the model and leave a checkpoint plus a JSON log in ``out_dir``.

    Returns the log document.  The checkpoint holds the best-validation
    epoch's weights, the config, and the grid the model was built for.
    """
    config = config or CRNNConfig()
    manifest = data.load_manifest(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    _, train_maps, train_labels = data.load_split(manifest, train_split)
    if val_split is not None:
        _, val_maps, val_labels = data.load_split(manifest, val_split)
    else:
        val_maps = val_labels = None

    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    model = CRNN(config, manifest.theta_count)
    optimizer = torch.optim.AdamW(model.parameters(),
                                  lr=config.learning_rate,
                                  weight_decay=config.weight_decay)

    epochs = []
    best = (math.inf, -1)
    best_state = None
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_maps))
        train_loss = _epoch_pass(model, train_maps, train_labels, order,
                                 config.batch_size, optimizer, epoch)
        if val_maps is not None:
            val_loss = _epoch_pass(model, val_maps, val_labels,
                                   np.arange(len(val_maps)),
                                   config.batch_size, None, epoch)
        else:
            val_loss = train_loss
        epochs.append({"epoch": epoch, "train_loss": train_loss,
                       "val_loss": val_loss})
        if log_cb is not None:
            log_cb(epochs[-1])
        if val_loss < best[0]:
            best = (val_loss, epoch)
            best_state = {k: v.detach().clone()
                          for k, v in model.state_dict().items()}
        elif epoch - best[1] >= config.patience:
            break

    config_doc = {k: list(v) if isinstance(v, tuple) else v
                  for k, v in asdict(config).items()}
    log = {
        "format": "training-log/1",
        "seed": seed,
        "config": config_doc,
        "grid_hash": manifest.grid_hash,
        "train_split": train_split,
        "val_split": val_split,
        "epochs": epochs,
        "best_epoch": best[1],
        "best_val_loss": best[0],
    }
    checkpoint = {
        "format": "crnn-checkpoint/1",
        "config": config_doc,
        "grid": {"num_radii": manifest.num_radii,
                 "theta_count": manifest.theta_count,
                 "hash": manifest.grid_hash},
        "state_dict": best_state,
    }
    _atomic(out_dir / CHECKPOINT_NAME,
            lambda p: torch.save(checkpoint, p))
    _atomic(out_dir / LOG_NAME,
            lambda p: Path(p).write_text(
                json.dumps(log, indent=2, sort_keys=True) + "\n",
                encoding="utf-8"))
    return log
