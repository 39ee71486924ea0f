"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Dims, spacing, or plane of an input do not match what the operation needs."""


class FormatError(ValueError):
    """A file or byte stream violates its on-disk contract."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss
