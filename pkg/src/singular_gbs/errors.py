"""Exception hierarchy shared by every module of the package."""


class GbsError(Exception):
    """Base class for all package errors."""


class DomainError(GbsError, ValueError):
    """An argument lies outside the domain of the function."""


class DegenerateSpectrum(GbsError):
    """Two retained singular values or eigenvalues coincide."""


class NotIntegrable(GbsError):
    """A generator function fails its radial normalization check."""


class SignError(GbsError):
    """The G factor product is negative and the caller asked for strictness."""


class SupportError(GbsError):
    """A point lies off the support of a singular distribution."""


class RankDrop(GbsError):
    """A perturbed point left the manifold during finite differencing."""


class RoundTripError(GbsError):
    """The inverse Birnbaum-Saunders transform failed to reproduce its input."""


class UnsupportedKernel(GbsError):
    """No sampler is available for the requested generator kind."""


class SingularC(GbsError):
    """The congruence matrix is numerically singular."""


class QuadratureFailure(GbsError):
    """Adaptive integration did not reach the requested tolerance."""


class GoFFailure(GbsError):
    """A goodness-of-fit comparison rejected the analytic density."""

    def __init__(self, message, ratio_map=None):
        super().__init__(message)
        self.ratio_map = ratio_map


class ConfigError(GbsError):
    """A configuration file or matrix file is malformed."""
