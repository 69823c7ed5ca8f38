"""
Custom exceptions for branching-process estimation.
"""

class BranchBayesError(Exception):
    """Base class for all errors raised by this package."""
    pass

class InvalidParameterError(BranchBayesError, ValueError):
    """A parameter lies outside the domain of the requested operation."""
    pass

class InadmissiblePathError(InvalidParameterError):
    """A path violates x_k <= x_{k+1} <= 2 x_k or contains a non-positive entry."""
    pass

class PathTooShortError(InvalidParameterError):
    """A path does not carry enough generations for the requested statistic."""
    pass

class PathFileError(InvalidParameterError):
    """Error while parsing a path file."""
    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number

    def __str__(self):
        if self.line_number is None:
            return super().__str__()
        return f"line {self.line_number}: {super().__str__()}"

class UsageError(BranchBayesError):
    """Malformed command line."""
    pass

class NumericalError(BranchBayesError):
    """A numerical procedure failed or produced a non-finite value."""
    pass

class PopulationOverflowError(NumericalError):
    """A simulated population exceeded the 64-bit cap."""
    pass

class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge before the refinement cap."""
    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}

    def __str__(self):
        if not self.diagnostic:
            return super().__str__()
        details = ", ".join(f"{key}={value}" for key, value in self.diagnostic.items())
        return f"{super().__str__()} ({details})"

class ConsistencyCheckError(NumericalError):
    """Two independent routes to the same quantity disagree beyond tolerance."""
    pass
