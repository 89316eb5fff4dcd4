"""Exception hierarchy shared across the package."""


class QinError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(QinError):
    """Operand shapes are incompatible with the requested operation."""


class ConfigError(QinError):
    """A configuration value violates the schema or an invariant."""


class CheckpointError(QinError):
    """Base class for checkpoint file problems."""


class BadMagicError(CheckpointError):
    """File does not start with the expected magic bytes."""


class ShapeTableError(CheckpointError):
    """Checkpoint shape table disagrees with the expected parameter shapes."""


class TruncatedFileError(CheckpointError):
    """File ended before all declared payload bytes were read."""


class DataError(QinError):
    """A dataset or embedding file is malformed; message names the location."""


class SingleClassError(QinError):
    """Labels contain only one class, so ranking metrics are undefined."""


class NonFiniteLossError(QinError):
    """Training produced a non-finite loss; message carries diagnostics."""
