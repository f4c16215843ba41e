"""Exception hierarchy for the stlstm package."""


class StlstmError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(StlstmError):
    """Operands have incompatible shapes; the message names both."""


class ConfigError(StlstmError):
    """Invalid configuration value, config file, or CLI input."""


class DataError(StlstmError):
    """Base class for dataset ingestion problems."""


class ManifestError(DataError):
    """Manifest file is malformed or internally inconsistent."""


class DateAlignmentError(DataError):
    """Location files do not share one gap-free, increasing date axis."""


class MissingValueError(DataError):
    """A cell is empty / NA and the active policy forbids filling it."""


class CsvFormatError(DataError):
    """A CSV cell or header could not be parsed."""


class CheckpointError(StlstmError):
    """Base class for checkpoint load failures."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint declares an unsupported format version."""


class CheckpointFormatError(CheckpointError):
    """Checkpoint is truncated or contains unparseable records."""


class CheckpointShapeError(CheckpointError):
    """Checkpoint tensors disagree with the declared model spec."""


class DivergenceError(StlstmError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged (non-finite loss) at epoch {epoch}")


class ReportError(StlstmError):
    """Evaluation reports cannot be merged (e.g. duplicate grid cells)."""
