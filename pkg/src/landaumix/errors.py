"""Exception types raised across the toolkit."""


class LandauMixError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LandauMixError, ValueError):
    """Invalid configuration input."""


class NonSymmetricInteraction(ConfigError):
    """Interaction matrix is not symmetric."""


class GammaOutOfRange(ConfigError):
    """Potential exponent outside the admissible interval [-2, 1]."""


class NonPositiveParameter(ConfigError):
    """A mass, density, temperature or interaction entry is not positive."""


class ZeroMass(LandauMixError):
    """A species has vanishing quadrature mass."""


class ZeroRelativeVelocity(LandauMixError):
    """Collision kernel evaluated at zero relative velocity."""


class NonPositiveDensity(LandauMixError):
    """Entropy requested for a field with non-positive nodal values."""


class RankDeficient(LandauMixError):
    """Grid too coarse to resolve the requested kernel basis."""


class SolverNoConvergence(LandauMixError):
    """Eigenvalue or linear solver failed to converge."""


class KernelMismatch(LandauMixError):
    """Supplied kernel basis does not span the discrete null space."""


class StepUnstable(LandauMixError):
    """Explicit time step produced unbounded growth."""


class SolveFailure(LandauMixError):
    """Implicit system could not be solved."""


class NoExponentialWindow(LandauMixError):
    """Time series has no usable exponential decay window."""
