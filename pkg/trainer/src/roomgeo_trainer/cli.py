"""Command line front end: ``train`` and ``predict``.

Errors inherit from TrainerError and are reported as a one-line JSON
object on stderr with exit code 1, the same convention the dataset
tooling uses, so scripted pipelines can branch on the error class.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from .errors import InvalidFileFormat, TrainerError
from .model import CRNNConfig
from .predict import predict
from .train import train

_CONFIG_FIELDS = {f.name for f in fields(CRNNConfig)}


def _load_config(path, overrides: dict) -> CRNNConfig:
    """Merge defaults, a JSON file, and CLI flags, in rising precedence."""
    doc = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise InvalidFileFormat(f"config is not JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidFileFormat("config must be a JSON object")
        unknown = set(doc) - _CONFIG_FIELDS
        if unknown:
            raise InvalidFileFormat(
                f"unknown config keys: {', '.join(sorted(unknown))}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return CRNNConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise InvalidFileFormat(f"bad config: {exc}") from exc


def cmd_train(args) -> int:
    config = _load_config(args.config, {
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
        "max_epochs": args.max_epochs,
        "patience": args.patience,
        "dropout": args.dropout,
    })
    val_split = None if args.val_split == "none" else args.val_split
    log_cb = None
    if args.verbose:
        def log_cb(row):
            print(f"epoch {row['epoch']:4d}  "
                  f"train {row['train_loss']:.4f}  "
                  f"val {row['val_loss']:.4f}", file=sys.stderr)
    log = train(args.dataset, args.out, config=config, seed=args.seed,
                train_split=args.train_split, val_split=val_split,
                log_cb=log_cb)
    print(json.dumps({"best_epoch": log["best_epoch"],
                      "best_val_loss": log["best_val_loss"],
                      "epochs_run": len(log["epochs"])}))
    return 0


def cmd_predict(args) -> int:
    doc = predict(args.checkpoint, args.dataset, args.split, args.out,
                  batch_size=args.batch_size)
    print(json.dumps({"samples": len(doc["samples"]), "out": str(args.out)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roomgeo-trainer",
        description="train and apply the recurrent map-to-labels model")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model on a dataset")
    p.add_argument("--dataset", required=True,
                   help="dataset directory or manifest path")
    p.add_argument("--out", required=True,
                   help="directory for the checkpoint and training log")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-split", default="train")
    p.add_argument("--val-split", default="val",
                   help="validation split name, or 'none' to early-stop "
                        "on the training loss")
    p.add_argument("--config", help="JSON file of model/optimizer settings")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--verbose", action="store_true",
                   help="print per-epoch losses to stderr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write predictions for a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TrainerError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
