"""Exception hierarchy shared across the package."""


class FracbubblesError(Exception):
    """Base class for package errors."""


class ParameterError(FracbubblesError, ValueError):
    """Invalid (n, gamma) or derived-constant precondition."""


class ConfigError(FracbubblesError, ValueError):
    """Malformed configuration file or CLI input (exit code 64)."""


class NumericalError(FracbubblesError, RuntimeError):
    """Numerical failure in a solver or quadrature (exit code 65)."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach its error target."""


class CalibrationError(NumericalError):
    """Spectral oracle measurement inconsistent with the bubble ansatz."""


class SolveError(NumericalError):
    """Linear or nonlinear solve failed to reach its residual target."""


class NoConcentrationError(NumericalError):
    """No window reaches the selection mass during scale selection."""
