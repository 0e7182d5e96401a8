"""Exception hierarchy shared by all modules."""


class WitnessError(Exception):
    """Base class for every error raised by this package."""


class NonHermitianInput(WitnessError, ValueError):
    pass


class DimensionMismatch(WitnessError, ValueError):
    pass


class NotADensityMatrix(WitnessError, ValueError):
    pass


class IndexOutOfRange(WitnessError, IndexError):
    pass


class DenseCapExceeded(WitnessError, MemoryError):
    pass


class InsufficientPrepStates(WitnessError, ValueError):
    pass


class TooClose(WitnessError, ValueError):
    pass


class PolarizationOutOfRange(WitnessError, ValueError):
    pass


class InvalidRange(WitnessError, ValueError):
    pass


class ParseError(WitnessError, ValueError):
    """Malformed input file.

    ``row`` and ``column`` locate the offending entry when known
    (1-based row counting the header line, column name or index).
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
