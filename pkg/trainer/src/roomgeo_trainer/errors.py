"""Exception types for the trainer.

Deliberately independent of the dataset-producing package: the trainer
talks to it only through files, so it carries its own error taxonomy.
"""


class TrainerError(Exception):
    """Base class for all trainer errors."""


class InvalidFileFormat(TrainerError):
    """A manifest, shard record or checkpoint does not match its format."""


class CorruptRecord(TrainerError):
    """Stored record bytes fail their checksum or header checks."""


class SampleNotFound(TrainerError):
    """Requested sample id or split is not present in the manifest."""


class ShapeMismatch(TrainerError):
    """Tensor dimensions disagree with the model or label contract."""


class NonFiniteLoss(TrainerError):
    """Training produced inf or NaN; carries where it happened."""


class IncompatibleCheckpoint(TrainerError):
    """Checkpoint was trained for a different grid than the dataset."""
