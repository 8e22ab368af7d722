"""Exception taxonomy shared across the simulator.

The CLI maps these to exit codes: configuration-family errors exit 2,
divergence exits 3, I/O problems exit 4.
"""


class FedmrlError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FedmrlError):
    """Invalid configuration value, unknown key, or incompatible shapes."""


class InputError(FedmrlError):
    """Structurally valid call with unusable data (empty dataset, zero total)."""


class ParseError(FedmrlError):
    """Malformed external input; carries a line number when one is known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(FedmrlError):
    """Well-formed input that violates a declared constraint."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DivergenceError(FedmrlError):
    """Non-finite loss, gradient, or network output during training."""
