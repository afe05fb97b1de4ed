"""Training loop behaviour: fitting, stopping, logging, failure modes."""

import json

import numpy as np
import pytest
import torch

from roomgeo_trainer import CRNN, CRNNConfig, data, label_loss, train
from roomgeo_trainer.errors import NonFiniteLoss, SampleNotFound
from roomgeo_trainer.train import CHECKPOINT_NAME, LOG_NAME

from conftest import COMPACT


def test_overfits_small_corpus(tiny_corpus, tmp_path):
    """The full path learns: loss drops far below the label spread.

    Eight memorised rooms, no dropout or weight decay.  A mean
    predictor sits near 1.0 on this corpus and the run starts above
    3; 0.15 is comfortably beyond either.
    """
    cfg = CRNNConfig(dropout=0.0, learning_rate=3e-3, weight_decay=0.0,
                     max_epochs=200, patience=200, **COMPACT)
    log = train(tiny_corpus, tmp_path / "run", config=cfg, seed=0,
                val_split=None)
    assert log["epochs"][0]["train_loss"] > 1.0
    assert log["best_val_loss"] < 0.15
    # no validation split: the train loss stands in
    assert all(e["val_loss"] == e["train_loss"] for e in log["epochs"])


def test_log_and_checkpoint_agree(trained, corpus):
    run_dir, cfg, log = trained
    epochs = log["epochs"]
    assert [e["epoch"] for e in epochs] == list(range(len(epochs)))
    vals = [e["val_loss"] for e in epochs]
    assert log["best_epoch"] == int(np.argmin(vals))
    assert log["best_val_loss"] == min(vals)
    assert epochs[-1]["epoch"] - log["best_epoch"] <= cfg.patience

    with open(run_dir / LOG_NAME, encoding="utf-8") as f:
        assert json.load(f) == log

    raw = torch.load(run_dir / CHECKPOINT_NAME, weights_only=True)
    assert raw["format"] == "crnn-checkpoint/1"
    assert raw["grid"] == {"num_radii": 187, "theta_count": 91,
                           "hash": log["grid_hash"]}
    assert CRNNConfig(**raw["config"]) == cfg

    # the stored weights are the best epoch's, not the last
    model = CRNN(cfg, raw["grid"]["theta_count"])
    model.load_state_dict(raw["state_dict"])
    model.eval()
    manifest = data.load_manifest(corpus)
    _, maps, labels = data.load_split(manifest, "val")
    with torch.no_grad():
        loss = float(label_loss(model(torch.from_numpy(maps)),
                                torch.from_numpy(labels)))
    assert abs(loss - log["best_val_loss"]) <= 1e-6


def test_same_seed_reproduces_losses(corpus, tmp_path):
    cfg = CRNNConfig(learning_rate=3e-3, max_epochs=3, **COMPACT)
    a = train(corpus, tmp_path / "a", config=cfg, seed=9)
    b = train(corpus, tmp_path / "b", config=cfg, seed=9)
    for ea, eb in zip(a["epochs"], b["epochs"]):
        assert ea["train_loss"] == eb["train_loss"]
        assert ea["val_loss"] == eb["val_loss"]
    sa = torch.load(tmp_path / "a" / CHECKPOINT_NAME, weights_only=True)
    sb = torch.load(tmp_path / "b" / CHECKPOINT_NAME, weights_only=True)
    for key, ta in sa["state_dict"].items():
        assert torch.equal(ta, sb["state_dict"][key])


def test_early_stopping_bounds_the_run(corpus, tmp_path):
    # a deliberately unstable step size makes validation worsen fast
    cfg = CRNNConfig(dropout=0.0, learning_rate=5e-2,
                     max_epochs=40, patience=3, **COMPACT)
    log = train(corpus, tmp_path / "run", config=cfg, seed=0)
    epochs = log["epochs"]
    assert len(epochs) < cfg.max_epochs
    assert epochs[-1]["epoch"] - log["best_epoch"] == cfg.patience


def test_runaway_step_size_raises(corpus, tmp_path):
    cfg = CRNNConfig(dropout=0.0, learning_rate=1e30, max_epochs=8,
                     **COMPACT)
    with pytest.raises(NonFiniteLoss, match="epoch"):
        train(corpus, tmp_path / "run", config=cfg, seed=0, val_split=None)


def test_unknown_split_raises(corpus, tmp_path):
    with pytest.raises(SampleNotFound):
        train(corpus, tmp_path / "run",
              config=CRNNConfig(max_epochs=1, **COMPACT),
              val_split="dev")
