"""Exceptions shared across the package."""


class NumericalError(RuntimeError):
    """A numerical routine diverged or failed to converge."""


class TrainingDiverged(NumericalError):
    """Training produced a non-finite loss or gradient.

    Carries the per-epoch metrics collected before the failure so callers
    can emit a partial report.
    """

    def __init__(self, message, epoch_metrics=None):
        super().__init__(message)
        self.epoch_metrics = epoch_metrics if epoch_metrics is not None else []
