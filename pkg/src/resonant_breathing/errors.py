"""Exception hierarchy shared by the package.

Everything raised on purpose derives from :class:`ResonantError` so the CLI can
map domain failures to exit code 1 without swallowing programming errors.
"""

from __future__ import annotations


class ResonantError(Exception):
    """Base class for domain errors."""


class IrrationalLadder(ResonantError):
    """The ladder offset is not an exact rational number."""


class DegreeMismatch(ResonantError):
    """A polynomial does not have the homogeneous degree an operation needs."""


class NotResonant(ResonantError):
    """An index quartet violates n + m = k + l."""


class MalformedChannel(ResonantError):
    """A quartic term is neither a C-channel nor an S-channel term."""


class NonForcing(ResonantError):
    """The S-channel recursion hits a vanishing breathing coefficient."""


class NoConsistentG(ResonantError):
    """No value of the solvability parameter satisfies the coupling identity."""

    def __init__(self, message: str, lam: float, residual: float):
        super().__init__(message)
        self.lam = lam
        self.residual = residual


class QuadratureBudgetExceeded(ResonantError):
    """Requested truncation is beyond what the quadrature rule is sized for."""


class FormatError(ResonantError):
    """A text file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class StepSizeUnderflow(ResonantError):
    """Adaptive integrator could not meet the tolerance."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(message)
        self.t_reached = t_reached


class PNormViolation(ResonantError):
    """Ansatz parameter |p| is too close to (or beyond) the unit circle."""


class ConstantObservable(ResonantError):
    """A series handed to period detection does not vary."""


class NoReturnFound(ResonantError):
    """No recurrence of the series was found within the horizon."""


class GridMismatch(ResonantError):
    """A sample vector does not match the quadrature grid."""


class ZeroBreathing(ResonantError):
    """The breathing observable vanishes initially, so its phase is undefined."""
