"""Exceptions raised by thermocat.

Every failure is a ``ThermocatError`` carrying the exit status the command line
application reports for it.
"""

__all__ = ('ThermocatError', 'InvalidParameter', 'BadVariance',
           'BadTransmittance', 'NegativeTime', 'BadSign',
           'ResolutionTooCoarse', 'NumericalError', 'NonConvergent',
           'ZeroTrace', 'ImaginaryResidual', 'NoFringes',
           'NoViolationAtZero', 'CutoffTooSmall', 'OracleMismatch',
           'NotConverged', 'UnphysicalState')


class ThermocatError(Exception):
    """Base class for all thermocat errors."""
    exit_code = 1

    def __init__(self, message, exit_code=None):
        super().__init__(message)
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code


class InvalidParameter(ThermocatError, ValueError):
    exit_code = 2


class BadVariance(InvalidParameter):
    pass


class BadTransmittance(InvalidParameter):
    pass


class NegativeTime(InvalidParameter):
    pass


class BadSign(InvalidParameter):
    pass


class ResolutionTooCoarse(InvalidParameter):
    pass


class NumericalError(ThermocatError, ArithmeticError):
    exit_code = 2


class NonConvergent(NumericalError):
    """A Gaussian integral whose Hermitian part is not positive definite."""


class ZeroTrace(NumericalError):
    pass


class ImaginaryResidual(NumericalError):
    """A Wigner value with a significant imaginary part.

    This always means a state lost its Hermitian structure."""


class NoFringes(NumericalError):
    pass


class NoViolationAtZero(NumericalError):
    pass


class CutoffTooSmall(NumericalError):
    pass


class OracleMismatch(ThermocatError):
    exit_code = 3


class NotConverged(ThermocatError):
    exit_code = 4


class UnphysicalState(NumericalError):
    """A quantity outside its physical range, e.g. a parity correlation above one."""
