"""Exception and warning types raised across the package."""


class GGEError(Exception):
    """Base class for library errors."""


class DomainError(GGEError, ValueError):
    """A coordinate lies outside the domain of its model."""


class UnsupportedPotential(GGEError, ValueError):
    """The potential does not meet the growth/sign requirements of the model."""


class NonNormalizable(UnsupportedPotential):
    """The target density cannot be normalised."""


class NotFactorizable(GGEError):
    """No exact sampler exists for this model/potential pair."""


class IncompatibleSeeds(GGEError):
    """Seeds cannot be brought to a common circular index."""


class UnboundedWeight(GGEError):
    """An observable is not dominated by the kernel weight."""


class GridTooLarge(GGEError):
    """The requested quadrature grid exceeds the size limit."""


class GapCollapse(GGEError):
    """The dominant eigenvalue is not separated from the rest of the spectrum."""


class DerivativeUnstable(GGEError):
    """Finite differences at two stencil widths disagree."""


class QuadratureFailure(GGEError):
    """Adaptive quadrature did not reach the requested tolerance."""


class InsufficientESS(GGEError):
    """Too few effective samples for the requested statistic."""


class ZeroVariance(GGEError):
    """The observable has zero variance, so it cannot be standardized."""


class NoDecayDetected(GGEError):
    """No covariance rises above the noise level."""


class ConfigError(GGEError):
    """An experiment spec file or dict is malformed."""


class MixingWarning(UserWarning):
    """MCMC acceptance rate fell outside the healthy range."""


class TruncationWarning(UserWarning):
    """A seed lower bound could not be certified."""
