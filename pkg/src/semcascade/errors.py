"""Exception hierarchy shared by every module in the package."""


class SemcascadeError(Exception):
    """Base class for all package errors."""


class ContractError(SemcascadeError, ValueError):
    """A documented precondition was violated by the caller."""


class ShapeError(ContractError):
    """An input had the wrong dimensions."""


class InvalidSpecError(ContractError):
    """A synthetic-data or configuration spec is not usable."""


class InvalidParamsError(ContractError):
    """Filter or feature parameters are inconsistent."""


class SearchSpaceTooLarge(ContractError):
    """The exhaustive oracle refuses spaces it cannot enumerate."""


class DivergenceError(SemcascadeError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class DataError(SemcascadeError):
    """Base class for problems with input data (CLI exit code 2)."""


class MalformedInputError(DataError, ValueError):
    """A data file does not follow its declared format."""


class EmptyClassError(DataError, ValueError):
    """A detection task has no instances of a required label."""
