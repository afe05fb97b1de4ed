"""Recurrent-network regressor for acoustic range-angle maps.

Reads the dataset shards the map-generation tooling produces, fits a
convolutional-recurrent model to the 12-value geometry labels, and
writes prediction files the standard evaluation tools accept.
"""

from .data import (
    LABEL_DIM,
    Manifest,
    Record,
    flatten_labels,
    iter_split,
    labels_to_doc,
    load_manifest,
    load_split,
    read_record,
)
from .errors import (
    CorruptRecord,
    IncompatibleCheckpoint,
    InvalidFileFormat,
    NonFiniteLoss,
    SampleNotFound,
    ShapeMismatch,
    TrainerError,
)
from .model import CRNN, OUT_DIM, CRNNConfig, label_loss
from .predict import load_checkpoint, predict, read_checkpoint
from .train import train

__all__ = [
    "CRNN",
    "CRNNConfig",
    "CorruptRecord",
    "IncompatibleCheckpoint",
    "InvalidFileFormat",
    "LABEL_DIM",
    "Manifest",
    "NonFiniteLoss",
    "OUT_DIM",
    "Record",
    "SampleNotFound",
    "ShapeMismatch",
    "TrainerError",
    "flatten_labels",
    "iter_split",
    "label_loss",
    "labels_to_doc",
    "load_checkpoint",
    "load_manifest",
    "load_split",
    "predict",
    "read_checkpoint",
    "read_record",
    "train",
]
