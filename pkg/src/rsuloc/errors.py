"""Exception types shared across the package."""

from __future__ import annotations


class RsulocError(Exception):
    """Base class for all package errors."""


class ConfigurationError(RsulocError, ValueError):
    """Invalid road, channel, tracker or experiment configuration."""


class DomainError(RsulocError, ValueError):
    """Input outside the mathematical domain of an estimator."""


class UnderdeterminedError(DomainError):
    """Too few RSUs to fix a 2D position."""


class RecordParseError(RsulocError, ValueError):
    """A measurement record line could not be parsed."""

    def __init__(self, message: str, line_no: int | None = None, field: str | None = None):
        self.line_no = line_no
        self.field = field
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{message}")


class GammaUnavailableError(RsulocError):
    """No usable anchor observation to estimate a path-loss exponent."""


class SequencingError(RsulocError, ValueError):
    """Tracker fed a fix whose timestamp does not follow the track."""


class RunError(RsulocError):
    """A single experiment run failed; carries the scenario and run index."""

    def __init__(self, scenario: str, run: int, cause: BaseException):
        self.scenario = scenario
        self.run = run
        self.cause = cause
        super().__init__(f"scenario={scenario} run={run}: {type(cause).__name__}: {cause}")

    def __reduce__(self):
        return (type(self), (self.scenario, self.run, self.cause))
