"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ConfigError(ValueError):
    """An architectural or runtime setting is invalid."""


class ContractError(ValueError):
    """A caller violated an operation precondition."""


class DegeneracyError(ValueError):
    """Input geometry admits no unique solution."""


class NumericalError(ArithmeticError):
    """A NaN or Inf appeared where finite values are required."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FormatError(ValueError):
    """A binary container is malformed."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
