"""Command line wiring, config precedence and error reporting."""

import json

import pytest

from roomgeo_trainer import cli
from roomgeo_trainer.errors import InvalidFileFormat
from roomgeo_trainer.train import CHECKPOINT_NAME, LOG_NAME

COMPACT_DOC = {"conv_channels": [8, 16, 32], "gru_hidden": 64,
               "fc_hidden": 128, "learning_rate": 3e-3}


def test_train_then_predict(corpus, tmp_path, capsys):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(COMPACT_DOC))
    run = tmp_path / "run"

    rc = cli.main(["train", "--dataset", str(corpus), "--out", str(run),
                   "--config", str(cfg_path), "--max-epochs", "2",
                   "--seed", "0"])
    out = capsys.readouterr().out
    assert rc == 0
    summary = json.loads(out)
    assert summary["epochs_run"] == 2
    assert (run / CHECKPOINT_NAME).exists()
    assert (run / LOG_NAME).exists()

    pred = tmp_path / "pred.json"
    rc = cli.main(["predict", "--checkpoint", str(run / CHECKPOINT_NAME),
                   "--dataset", str(corpus), "--split", "test",
                   "--out", str(pred)])
    out = capsys.readouterr().out
    assert rc == 0
    assert json.loads(out)["samples"] == 4
    with open(pred, encoding="utf-8") as f:
        assert f.read(1) == "{"


def test_verbose_logs_epochs(corpus, tmp_path, capsys):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(COMPACT_DOC))
    rc = cli.main(["train", "--dataset", str(corpus),
                   "--out", str(tmp_path / "run"), "--config", str(cfg_path),
                   "--max-epochs", "2", "--val-split", "none", "--verbose"])
    captured = capsys.readouterr()
    assert rc == 0
    assert captured.err.count("epoch") == 2


def test_flag_beats_config_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"learning_rate": 1e-3, "max_epochs": 50}))
    cfg = cli._load_config(p, {"max_epochs": 2, "learning_rate": None})
    assert cfg.learning_rate == 1e-3
    assert cfg.max_epochs == 2


def test_config_rejections(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"lr": 1e-3}))
    with pytest.raises(InvalidFileFormat, match="unknown config keys"):
        cli._load_config(p, {})
    p.write_text("[1, 2]")
    with pytest.raises(InvalidFileFormat, match="JSON object"):
        cli._load_config(p, {})
    p.write_text("{broken")
    with pytest.raises(InvalidFileFormat, match="not JSON"):
        cli._load_config(p, {})
    p.write_text(json.dumps({"batch_size": 0}))
    with pytest.raises(InvalidFileFormat, match="bad config"):
        cli._load_config(p, {})


def test_errors_are_json_on_stderr(tmp_path, capsys):
    rc = cli.main(["predict", "--checkpoint", str(tmp_path / "missing.pt"),
                   "--dataset", str(tmp_path), "--split", "test",
                   "--out", str(tmp_path / "out.json")])
    captured = capsys.readouterr()
    assert rc == 1
    err = json.loads(captured.err)
    assert set(err) == {"error", "message"}


def test_help_and_unknown_command(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    capsys.readouterr()
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
    capsys.readouterr()
