# ABOUTME: Exception hierarchy for mvpreg.
# ABOUTME: Maps each failure family to the exit code the CLI reports.

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class MvpregError(Exception):
    """Base class for all errors raised by mvpreg."""

    exit_code = 1


class ConfigError(MvpregError, ValueError):
    """Raised when a setting is missing, unknown or out of range."""

    exit_code = EXIT_CONFIG


class DataError(MvpregError, ValueError):
    """Raised when input data is malformed, misaligned or too short."""

    exit_code = EXIT_DATA


class DomainError(MvpregError, ValueError):
    """Raised when a special function is evaluated at or beyond a pole."""

    exit_code = EXIT_NUMERICAL


class FactorizationError(MvpregError, np.linalg.LinAlgError):
    """Raised when a Cholesky factorization fails even after maximum jitter."""

    exit_code = EXIT_NUMERICAL


class FitError(MvpregError, RuntimeError):
    """Raised when every optimizer restart of a model fit failed.

    Attributes:
        diagnostics: One message per failed restart, in seed order.
        window: Index of the backtest window being fitted, if any.
    """

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, diagnostics: list[str] | None = None, window: int | None = None):
        """Initialize with a summary message and per-restart diagnostics.

        Args:
            message: Human-readable summary.
            diagnostics: Messages collected from the failed restarts.
            window: Backtest window index, when raised from the sliding-window driver.
        """
        super().__init__(message)
        self.diagnostics = diagnostics or []
        self.window = window

    def __str__(self) -> str:
        text = super().__str__()
        if self.window is not None:
            text = f"window {self.window}: {text}"
        if self.diagnostics:
            text += " (" + "; ".join(self.diagnostics) + ")"
        return text
