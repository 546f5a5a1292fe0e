"""Exception types shared across the package.

Each maps to a distinct CLI exit code (see cli.EXIT_CODES) so callers can
tell configuration mistakes from numeric failures.
"""


class DimensionError(ValueError):
    """Array shapes are incompatible with the requested operation."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class NonFiniteError(ValueError):
    """A tensor was constructed with NaN or infinite entries."""


class FormatError(ValueError):
    """An input file does not match its declared format."""


class ConfigError(FormatError):
    """A run configuration failed strict parsing or validation."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite or runaway loss."""
