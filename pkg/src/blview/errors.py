"""Exception hierarchy. Every failure mode raised by the engine derives from
EngineError so callers (and the CLI exit-code mapping) can branch on category.
"""


class EngineError(Exception):
    """Base class for all engine failures."""


class FormatError(EngineError):
    """Malformed input file content; message names the offending row/column."""


class AlignmentError(EngineError):
    """Date axes disagree or a series does not span the shared calendar."""


class WindowError(EngineError):
    """A lookback window cannot be cut from the available history."""


class ScheduleError(EngineError):
    """No feasible rebalance date exists for the requested parameters."""


class InputError(EngineError):
    """Invalid in-process argument (non-positive cap, bad shape, ...)."""


class InsufficientDataError(EngineError):
    """Too few observations for the requested estimate."""


class InsufficientSamplesError(EngineError):
    """One or more assets ended up with fewer forecast samples than requested."""

    def __init__(self, shortfalls):
        self.shortfalls = dict(shortfalls)  # ticker -> obtained count
        detail = ", ".join(f"{t}={n}" for t, n in sorted(self.shortfalls.items()))
        super().__init__(f"insufficient forecast samples after retries: {detail}")


class TransportError(EngineError):
    """Endpoint unreachable, HTTP failure, or timeout."""


class SchemaViolationError(EngineError):
    """Endpoint response did not conform to the forecast JSON schema."""


class CacheIntegrityError(EngineError):
    """View-sample cache file is corrupt; never silently re-queried."""


class LookaheadUnavailableError(EngineError):
    """Oracle provider asked for future returns beyond the data range."""


class CoverageError(EngineError):
    """View cache does not cover every (rebalance date, ticker) required."""


class NumericalError(EngineError):
    """Linear algebra failed; carries a condition-number estimate when known."""

    def __init__(self, message, condition=None):
        self.condition = condition
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)


class OptimizationError(EngineError):
    """QP solver exhausted its budget; carries the final KKT residuals."""

    def __init__(self, message, residuals=None):
        self.residuals = residuals
        super().__init__(message)


class TuningError(EngineError):
    """Every candidate backtest in the tau grid search failed."""


class DegenerateInputError(EngineError):
    """An estimate is undefined on this input (zero variance, zero mean ...)."""


class ConfigError(EngineError):
    """Run configuration is missing keys or holds inconsistent values."""
