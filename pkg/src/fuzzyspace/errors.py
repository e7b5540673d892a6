"""Exception types shared across the package."""


class FuzzyspaceError(Exception):
    """Base class for package errors."""


class ConfigError(FuzzyspaceError, ValueError):
    """Invalid run configuration."""


class NumericalError(FuzzyspaceError, ArithmeticError):
    """A numerical routine failed outright."""


class NonConvergenceError(NumericalError):
    """An iterative routine did not reach its tolerance."""


class DegenerateInputError(FuzzyspaceError, ValueError):
    """Input is well-formed but degenerate (zero spectrum, zero distances...)."""


class StructuralMismatchError(FuzzyspaceError, ValueError):
    """Two objects that must be comparable have incompatible shapes."""
