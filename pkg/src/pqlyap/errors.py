"""Exception types raised across the package."""


class PqlyapError(Exception):
    """Base class for package errors."""


class SpectralError(PqlyapError):
    """Eigenvalue or matrix-equation computation could not be completed."""


class UnstableSpectrumError(SpectralError):
    """The linearisation has an eigenvalue with positive real part."""


class DecouplingError(SpectralError):
    """The center/stable coupling could not be removed reliably."""


class NoCenterBlockError(PqlyapError):
    """A partially quadratic search needs at least one center direction."""


class DegreeError(PqlyapError):
    """Requested degrees make a polynomial identity unsatisfiable."""


class ResonanceError(PqlyapError):
    """Homological equation for the center manifold is singular."""

    def __init__(self, degree: int, message: str):
        super().__init__(message)
        self.degree = degree


class MalformedProblemError(PqlyapError):
    """An SDP problem references undeclared variables or is inconsistent."""
