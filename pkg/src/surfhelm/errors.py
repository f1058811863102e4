"""Exception hierarchy for the surface Helmholtz solver."""


class SurfhelmError(Exception):
    """Base class for all library errors."""


class DegenerateGradient(SurfhelmError):
    """Level-set gradient too small to define a normal direction."""


class OutsideTubularNeighborhood(SurfhelmError):
    """Query point is outside the configured tubular neighborhood."""


class ProjectionDiverged(SurfhelmError):
    """Closest-point iteration failed to converge."""


class NotOnSurface(SurfhelmError):
    """Operation requires an on-surface evaluation point."""


class InvalidBox(SurfhelmError):
    """Bounding box has non-positive extent or too few cells."""


class EmptyActiveSet(SurfhelmError):
    """No background tetrahedron is cut by the discrete surface."""


class NoCut(SurfhelmError):
    """Tetrahedron nodal values do not change sign."""


class UnsupportedDegree(SurfhelmError):
    """Requested quadrature degree is not available."""


class SingularSystem(SurfhelmError):
    """Sparse factorization broke down."""


class ResidualNotMet(SurfhelmError):
    """Linear solve did not reach the residual tolerance."""


class InsufficientData(SurfhelmError):
    """Too few refinement levels to fit a convergence rate."""
