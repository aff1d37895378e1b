"""Exception types raised across the package."""


class PiezoBeamError(Exception):
    """Base class for all package errors."""


class NonPositiveCoefficient(PiezoBeamError, ValueError):
    pass


class MissingCoefficient(PiezoBeamError, KeyError):
    pass


class ResolutionTooSmall(PiezoBeamError, ValueError):
    pass


class IndexOutOfRange(PiezoBeamError, IndexError):
    pass


class SolverSingular(PiezoBeamError, ArithmeticError):
    pass


class SingularMass(PiezoBeamError, ArithmeticError):
    pass


class NonConvergence(PiezoBeamError, ArithmeticError):
    pass


class StabilityViolation(PiezoBeamError, RuntimeError):
    pass


class EigensolverFailure(PiezoBeamError, ArithmeticError):
    pass


class WindowTooShort(PiezoBeamError, ValueError):
    pass


class NonPositiveEnergy(PiezoBeamError, ValueError):
    pass


class ParseError(PiezoBeamError, ValueError):
    pass


class ValidationError(PiezoBeamError, ValueError):
    pass
