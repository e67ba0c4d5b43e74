"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: validation problems exit with 1,
numerical failures with 2.
"""
from __future__ import annotations


class IsomonError(Exception):
    """Base class for all package errors."""


class ValidationError(IsomonError, ValueError):
    """Input data violates a structural invariant."""

    def __init__(self, message: str, problems: list[str] | None = None):
        super().__init__(message)
        self.problems = list(problems or [])


class NumericalError(IsomonError, ArithmeticError):
    """A numerical procedure could not deliver a trustworthy result."""


class StepUnderflow(NumericalError):
    def __init__(self, message: str, s: float | None = None):
        super().__init__(message)
        self.s = s


class PoleCollision(NumericalError):
    def __init__(self, message: str, s: float | None = None, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.s = s
        self.pair = pair


class RadiusUnderflow(NumericalError):
    pass


class MonodromyCheckError(NumericalError):
    """Relation or determinant check on computed monodromy failed."""


class GaugeDegenerate(NumericalError):
    pass


class EigenlineIndeterminate(NumericalError):
    pass


class FiberSamplingError(NumericalError):
    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}
