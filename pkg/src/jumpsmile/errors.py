"""Exception types shared across the engine.

`EngineError` subclasses are domain failures (bad inputs to a well-formed
request); the CLI maps them to exit code 1. `SchemaError` marks malformed
input files and maps to exit code 2.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for domain errors raised by the pricing engine."""


class DegenerateVarianceError(EngineError):
    """Total diffusion variance is zero or negative where a positive one is required."""


class UnsupportedOrderError(EngineError):
    """Derivative order outside the implemented range 0..3."""


class ImpliedVolError(EngineError):
    """No implied volatility reproduces the price inside the no-arbitrage band.

    Carries the achievable price band so callers can report how far off the
    input was.
    """

    def __init__(self, message: str, lower: float, upper: float):
        super().__init__(f"{message} (achievable band: [{lower:.12g}, {upper:.12g}])")
        self.lower = lower
        self.upper = upper


class GridMismatchError(EngineError):
    """Piecewise curves expected on one shared breakpoint grid disagree."""


class VariantError(EngineError):
    """Operation requires a different model variant."""


class BudgetExceededError(EngineError):
    """Requested simulation exceeds the configured path*step budget."""


class CalibrationError(EngineError):
    """Calibration could not start (e.g. residuals undefined at the initial point)."""


class SchemaError(Exception):
    """Input file violates the documented schema; `path` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
