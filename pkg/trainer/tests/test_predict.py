"""Prediction files and their acceptance by the dataset-side tooling."""

import json

import numpy as np
import pytest
import torch

import roomgeo
import roomgeo.cli

from roomgeo_trainer import data, predict
from roomgeo_trainer.errors import IncompatibleCheckpoint, InvalidFileFormat
from roomgeo_trainer.train import CHECKPOINT_NAME


@pytest.fixture(scope="module")
def predictions(trained, corpus, tmp_path_factory):
    run_dir, _, _ = trained
    out = tmp_path_factory.mktemp("pred") / "test.predictions.json"
    doc = predict(run_dir / CHECKPOINT_NAME, corpus, "test", out)
    return out, doc


def test_reference_reader_accepts(predictions, corpus):
    out, doc = predictions
    meta, by_id = roomgeo.read_predictions(out)
    assert meta["estimator"] == "crnn"
    manifest = data.load_manifest(corpus)
    assert meta["grid_hash"] == manifest.grid_hash
    assert sorted(by_id) == manifest.split_ids("test")
    assert doc["samples"][0]["id"] == "test-000000"


def test_height_signs_hold(predictions):
    _, doc = predictions
    for entry in doc["samples"]:
        assert entry["labels"]["floor_z"] < 0.0
        assert entry["labels"]["ceiling_z"] > 0.0


def test_predict_twice_identical_bytes(trained, corpus, tmp_path):
    run_dir, _, _ = trained
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    predict(run_dir / CHECKPOINT_NAME, corpus, "test", a)
    predict(run_dir / CHECKPOINT_NAME, corpus, "test", b)
    assert a.read_bytes() == b.read_bytes()


def test_batch_size_does_not_change_values(trained, corpus, tmp_path):
    run_dir, _, _ = trained
    out = tmp_path / "one.json"
    doc1 = predict(run_dir / CHECKPOINT_NAME, corpus, "test", out,
                   batch_size=1)
    doc4 = predict(run_dir / CHECKPOINT_NAME, corpus, "test", out,
                   batch_size=4)
    for e1, e4 in zip(doc1["samples"], doc4["samples"]):
        v1 = data.flatten_labels(e1["labels"]).astype(np.float64)
        v4 = data.flatten_labels(e4["labels"]).astype(np.float64)
        assert np.allclose(v1, v4, atol=1e-5)


def test_dataset_side_evaluate_runs(predictions, corpus, tmp_path, capsys):
    out, _ = predictions
    report_path = tmp_path / "report.json"
    rc = roomgeo.cli.main([
        "evaluate", "--dataset", str(corpus), "--predictions", str(out),
        "--split", "test", "--out", str(report_path)])
    capsys.readouterr()
    assert rc == 0
    with open(report_path, encoding="utf-8") as f:
        report = json.load(f)
    assert report["count"] == 4
    assert report["estimator"] == "crnn"
    assert np.isfinite(report["loss_mean"])
    assert np.isfinite(report["room"]["e_d_mean"])


def test_grid_mismatch_is_rejected(trained, corpus, tmp_path):
    run_dir, _, _ = trained
    raw = torch.load(run_dir / CHECKPOINT_NAME, weights_only=True)
    raw["grid"]["theta_count"] += 1
    tampered = tmp_path / "tampered.pt"
    torch.save(raw, tampered)
    with pytest.raises(IncompatibleCheckpoint):
        predict(tampered, corpus, "test", tmp_path / "out.json")


def test_bad_checkpoint_files(corpus, tmp_path):
    junk = tmp_path / "junk.pt"
    junk.write_bytes(b"\x00\x01\x02 not a checkpoint")
    with pytest.raises(InvalidFileFormat):
        predict(junk, corpus, "test", tmp_path / "out.json")

    wrong = tmp_path / "wrong.pt"
    torch.save({"format": "something-else"}, wrong)
    with pytest.raises(InvalidFileFormat):
        predict(wrong, corpus, "test", tmp_path / "out.json")
