"""Exception types shared across the package."""


class UnlearnkitError(Exception):
    """Base class for all package-specific errors."""


class DataError(UnlearnkitError):
    """Malformed input data (bad CSV cell, label outside domain, NaN/inf)."""


class PerturbationError(UnlearnkitError):
    """Invalid perturbation request (bad indices, shape mismatch)."""


class NothingToUnlearnError(PerturbationError):
    """The requested change touches no training point."""


class ConvergenceError(UnlearnkitError):
    """An iterative solver stopped before reaching its tolerance."""


class DivergenceError(UnlearnkitError):
    """An iterative solver produced unbounded or non-finite iterates."""


class CertificationError(UnlearnkitError):
    """Invalid certification budget or missing prerequisites."""
