"""Exception hierarchy shared by every module."""


class TensorFactorError(Exception):
    """Base class for all library errors."""


class ModeIndexError(TensorFactorError, IndexError):
    pass


class DimensionError(TensorFactorError, ValueError):
    pass


class RankError(TensorFactorError, ValueError):
    pass


class NumericError(TensorFactorError, ArithmeticError):
    pass


class BasisError(TensorFactorError, ValueError):
    pass


class LagError(TensorFactorError, ValueError):
    pass


class DegenerateDataError(TensorFactorError, ValueError):
    pass


class DataError(TensorFactorError, ValueError):
    """Invalid input data (non-positive losses, malformed tables...)."""


class IngestionError(DataError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
