"""Exception types shared across the package."""

from __future__ import annotations


class EPBlowupError(Exception):
    """Base class for all errors raised by ``epblowup``."""


class InvalidInputError(EPBlowupError, ValueError):
    """Malformed array, matrix, state or configuration argument."""


class InvalidParametersError(EPBlowupError, ValueError):
    """Physical parameters outside the admissible range of a check."""


class DomainRangeError(EPBlowupError, ValueError):
    """A time or position lies outside the sampled range or domain."""


class SingularityError(EPBlowupError, ArithmeticError):
    """Evaluation at (or past) the pole of a closed-form solution."""


class InsufficientDataError(EPBlowupError, ValueError):
    """Too few samples for the requested check or fit."""


class FitRejectedError(EPBlowupError, ValueError):
    """Sample tail is unsuitable for blow-up time extrapolation."""


class DomainTooSmallError(EPBlowupError, ValueError):
    """Free-space source does not decay before the grid boundary."""


class ConfigError(EPBlowupError, ValueError):
    """Experiment configuration failed validation.

    ``key`` names the offending (dotted) configuration key.
    """

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ScenarioError(EPBlowupError):
    """An inner-module error annotated with the scenario stage and seed."""

    def __init__(self, stage: str, cause: Exception, seed: float | None = None):
        self.stage = stage
        self.seed = seed
        where = stage if seed is None else f"{stage} (seed a={seed!r})"
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")


class BlowupDetected(Exception):
    """Control-flow signal: a simulation reached a singular state.

    Not an error. Time loops catch it and terminate the run cleanly.
    """

    def __init__(self, reason: str, t: float):
        self.reason = reason
        self.t = t
        super().__init__(f"blow-up detected at t={t:.6g} ({reason})")
