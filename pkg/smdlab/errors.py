"""Exceptions raised by smdlab."""
from __future__ import annotations


class SmdLabError(Exception):
    """Base class for all smdlab errors."""


class DomainError(SmdLabError, ValueError):
    """A point or argument lies outside the domain of an operation."""


class UnsupportedPairingError(SmdLabError, ValueError):
    """A regularizer/region combination or cone query is not supported."""


class GenericityError(SmdLabError, ValueError):
    """A linear program has more than one optimal vertex."""


class RangeError(SmdLabError, ValueError):
    """A time argument lies outside the span of an interpolated process."""


class DivergenceError(SmdLabError, ArithmeticError):
    """An iteration produced a non-finite state."""


class FlowBlowUpError(DivergenceError):
    """The mean-dynamics integrator produced a non-finite state."""


class ConfigError(SmdLabError, ValueError):
    """An experiment configuration is invalid."""

    def __init__(self, field_path: str, message: str) -> None:
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path
        self.message = message


class JobError(SmdLabError):
    """A harness job failed."""

    def __init__(self, job: str, seed: int | None, cause: BaseException | str) -> None:
        where = job if seed is None else f"{job} (seed {seed})"
        super().__init__(f"{where} failed: {cause}")
        self.job = job
        self.seed = seed
        self.cause = cause
