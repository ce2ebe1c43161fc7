"""Exception types shared across the pipeline.

The CLI maps each class to a stable exit code, so new failure modes should
subclass one of these rather than raising bare ``ValueError``.
"""


class SeqDistillError(Exception):
    """Base class for all package errors."""


class ValidationError(SeqDistillError, ValueError):
    """Data or configuration violates a documented invariant."""


class FormatError(SeqDistillError, ValueError):
    """A file could not be parsed (bad JSON, bad C4.5 line, unknown artifact)."""


class DimensionError(SeqDistillError, ValueError):
    """Array shapes are mutually inconsistent."""


class CapacityError(SeqDistillError):
    """A structural edit would exceed a configured cap or empty a layer."""


class TrainingDiverged(SeqDistillError):
    """A parameter became non-finite during training."""

    def __init__(self, message, last_good_epoch):
        super().__init__(message)
        self.last_good_epoch = last_good_epoch
