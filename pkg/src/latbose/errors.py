"""Exception hierarchy.

Two families are used throughout the package.  :class:`ValidationError`
covers bad input (malformed configs, invalid parameters, inputs outside the
domain of a formula).  :class:`ComputeError` covers numerical failures that
happen on valid input (quadrature that does not converge, an eigensolver that
runs out of iterations, an internal consistency check that trips).  The CLI
maps the first family to exit code 2 and the second to exit code 1.
"""


class LatboseError(Exception):
    """Base class for all package errors."""


class ValidationError(LatboseError):
    """Input rejected before any computation."""


class ComputeError(LatboseError):
    """A numerical procedure failed on otherwise valid input."""


# -- lattice_core ---------------------------------------------------------
class ConfigError(ValidationError):
    pass


class SingularBasis(ValidationError):
    pass


class MissingPrimitiveHopping(ValidationError):
    pass


class NonPositiveWeight(ValidationError):
    pass


class DirectionNotPositive(ValidationError):
    pass


class DuplicateDirection(ValidationError):
    pass


class GridTooCoarse(ValidationError):
    """Box size smaller than the hopping length, or odd."""


# -- quadrature / scattering ----------------------------------------------
class NoConvergence(ComputeError):
    pass


class NonFiniteIntegrand(ComputeError):
    pass


class OscillatoryNoConvergence(ComputeError):
    """Plane-wave factor oscillates too fast for the block subdivision cap."""


# -- bogoliubov -----------------------------------------------------------
class DomainError(ValidationError):
    pass


class NegativeCondensate(ValidationError):
    """Depletion exceeds the requested particle number at this box size."""


class IntegrandNegative(ComputeError):
    pass


# -- spectra --------------------------------------------------------------
class OrderingViolation(ComputeError):
    pass


class GapBoundViolation(ComputeError):
    pass


# -- lower_bound ----------------------------------------------------------
class EmptyWindow(ValidationError):
    pass


class InvalidMu(ValidationError):
    pass


class NegativeDiscriminant(ComputeError):
    pass


class SuperadditivityViolation(ComputeError):
    pass


# -- ed -------------------------------------------------------------------
class DimensionCap(ValidationError):
    pass


class PoorFit(ComputeError):
    pass
