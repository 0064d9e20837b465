"""Exception hierarchy shared by the library and the CLI."""


class BlockSparsityError(Exception):
    """Base class for all library errors."""


class ParameterError(BlockSparsityError, ValueError):
    """An argument lies outside the operation's admissible range."""


class DomainError(BlockSparsityError, ValueError):
    """The input object is outside the domain of the quantity (e.g. a zero signal)."""


class EvaluationError(BlockSparsityError, ArithmeticError):
    """A formula cannot be evaluated at the requested point."""


class DegenerateDataError(BlockSparsityError, ValueError):
    """Measured data carry no usable information (e.g. all zeros)."""
