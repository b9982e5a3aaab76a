"""Exception types raised across the package."""


class AdvIdsError(Exception):
    """Base class for all package errors."""


class ArchitectureError(AdvIdsError, ValueError):
    pass


class ShapeError(AdvIdsError, ValueError):
    pass


class NumericInputError(AdvIdsError, ValueError):
    """Non-finite values where finite reals are required."""


class LabelError(AdvIdsError, ValueError):
    pass


class TraceError(AdvIdsError, ValueError):
    """A forward trace does not belong to the network it is used with."""


class ConfigError(AdvIdsError, ValueError):
    pass


class DataError(AdvIdsError, ValueError):
    pass


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class TrainingDivergedError(AdvIdsError, ArithmeticError):
    def __init__(self, epoch, message=None):
        super().__init__(message or f"training diverged at epoch {epoch}: non-finite loss")
        self.epoch = epoch
