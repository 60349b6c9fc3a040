# apps/core/exceptions.py
"""
Error hierarchy shared by every compressive MBN app.

Each error class carries the CLI exit code its kind maps to:
1 usage error, 2 data/format error, 3 numeric divergence.
"""


class CompressiveMbnError(Exception):
    """Root of all library errors."""

    exit_code = 2
    error_type = 'unknown_error'


class ArgumentError(CompressiveMbnError, ValueError):
    """Invalid parameter or configuration value."""

    exit_code = 1
    error_type = 'invalid_argument'


class DataError(CompressiveMbnError):
    """Input data cannot be used as given."""

    exit_code = 2
    error_type = 'data_error'


class FormatError(DataError):
    """File does not follow the expected format (bad magic, bad rank...)."""

    error_type = 'format_error'


class LengthMismatchError(DataError):
    """Payload length disagrees with the declared dimensions."""

    error_type = 'length_mismatch'


class RaggedRowError(DataError):
    """CSV row with a different cell count than the first row."""

    error_type = 'ragged_row'

    def __init__(self, line_number, expected, found):
        self.line_number = line_number
        self.expected = expected
        self.found = found
        super().__init__(
            f"Ragged row at line {line_number}: expected {expected} cells, found {found}"
        )


class CellParseError(DataError):
    """CSV cell that is not a finite number."""

    error_type = 'cell_parse'

    def __init__(self, line_number, cell):
        self.line_number = line_number
        self.cell = cell
        super().__init__(f"Cannot parse {cell!r} as a number at line {line_number}")


class DimensionMismatchError(DataError):
    """Matrix columns do not match what the model expects."""

    error_type = 'dimension_mismatch'

    def __init__(self, what, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(f"{what}: expected {expected} columns, found {found}")


class InsufficientSamplesError(DataError):
    """Fewer rows than the requested number of centers or clusters."""

    error_type = 'insufficient_samples'


class ContainerError(DataError):
    """Model container cannot be read."""

    error_type = 'container_error'


class ChecksumError(ContainerError):
    """Section checksum mismatch or truncated section."""

    error_type = 'checksum_error'


class KindMismatchError(ContainerError):
    """Container holds a different model kind than requested."""

    error_type = 'kind_mismatch'

    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(f"Expected a {expected} container, found {found}")


class DivergenceError(CompressiveMbnError):
    """Training produced a non-finite loss."""

    exit_code = 3
    error_type = 'divergence'

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"Training diverged at epoch {epoch}: loss={loss}")


class StageError(CompressiveMbnError):
    """
    A pipeline stage failed. Keeps the exit code of the underlying error so
    the CLI reports the real failure kind.
    """

    error_type = 'stage_failed'

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, 'exit_code', 2)
        super().__init__(f"Stage '{stage}' failed: {cause}")
