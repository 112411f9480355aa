"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SpecGraphError(Exception):
    """Base class for all package errors."""


class PolynomialSyntaxError(SpecGraphError, ValueError):
    """Bad polynomial expression; carries the 1-based source position."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class InvalidPolynomialError(SpecGraphError, ValueError):
    """Structurally invalid polynomial or Hamiltonian."""


class EigensolverError(SpecGraphError, RuntimeError):
    """Dense eigensolver failed to converge."""


class EmptySpectrumError(SpecGraphError, RuntimeError):
    """No pixel rose above the coarse threshold; fields attached for inspection."""

    def __init__(self, message: str, phi=None, dos=None):
        super().__init__(message)
        self.phi = phi
        self.dos = dos


class StageError(SpecGraphError, RuntimeError):
    """Pipeline failure wrapped with the stage that produced it."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
