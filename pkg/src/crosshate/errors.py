"""Exception types shared across the pipeline."""


class CrosshateError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CrosshateError):
    """An input violates a documented precondition (bad file, bad counts, ...).

    The CLI maps this to exit code 2; everything else maps to exit code 1.
    """


class TrainingDivergedError(CrosshateError):
    """Training produced a non-finite loss; carries where it happened."""

    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
