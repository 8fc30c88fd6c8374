"""Exception types raised by the library.

Everything derives from :class:`DomainError` so callers (and the CLI) can
distinguish modelling/numerical failures from programming errors.
"""


class DomainError(Exception):
    """Base class for domain-level failures."""


class ResonanceError(DomainError):
    """Multiple-scattering system is singular or nearly singular."""


class AmbiguousRankError(DomainError):
    """No spectral gap large enough to estimate the signal rank."""

    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class EmptyNoiseSpaceError(DomainError):
    """Signal rank equals the number of measurements; no noise subspace left."""


class DeconvolutionError(DomainError):
    """A spline transfer factor vanishes at some direction pair."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class ConditioningError(DomainError):
    """A restricted linear system is rank deficient or too ill conditioned."""


class EnumerationCapError(DomainError):
    """Subset enumeration would exceed the configured cap."""


class InfiniteThresholdError(DomainError):
    """Threshold rule degenerates (zero off-support margin)."""


class RankCollapseError(DomainError):
    """Covariance rank fell below the declared number of components."""
