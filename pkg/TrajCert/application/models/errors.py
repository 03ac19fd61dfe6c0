from typing import Optional


class TCertError(Exception):
    """Base class for all tcert errors."""


class InvalidInputError(TCertError, ValueError):
    """Raised when an operation receives arguments outside its contract."""


class NumericalError(TCertError, ArithmeticError):
    """Raised when a factorization fails even after jitter retries."""

    def __init__(self, message: str, jitter: float):
        super().__init__(f"{message} (final jitter={jitter!r})")
        self.jitter = jitter


class InvariantViolationError(TCertError, AssertionError):
    """Raised when a logged trajectory breaks a bound that must hold."""

    def __init__(self, message: str, step: int, observed: float = float("nan"), bound: float = float("nan")):
        super().__init__(f"{message} at step {step}: observed={observed!r}, bound={bound!r}")
        self.step = step
        self.observed = observed
        self.bound = bound


class ConfigError(TCertError, ValueError):
    """Raised for unreadable or invalid suite configuration."""

    def __init__(self, message: str, line: Optional[int] = None, suggestion: Optional[str] = None):
        text = message
        if line is not None:
            text = f"line {line}: {text}"
        if suggestion:
            text = f"{text} (did you mean '{suggestion}'?)"
        super().__init__(text)
        self.line = line
        self.suggestion = suggestion


class ArtifactError(TCertError):
    """Raised when a suite artifact is missing, unreadable or malformed."""

    def __init__(self, message: str, path):
        super().__init__(f"{path}: {message}")
        self.path = path
