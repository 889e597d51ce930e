"""Velocity-space numerical toolkit for the multi-species Landau system."""

__version__ = "0.1.0"

from .fields import DistributionField
from .grid import (GridSpec, VelocityGrid, build_grid, discrete_gradient, gram_matrices,
                   integrate)
from .mixture import (EquilibriumMoments, MixtureConfig, SpeciesParams, default_interaction,
                      equilibrium_moments, maxwellian_field, validate_config)
from .mixture import mixture as make_mixture

__all__ = [
    "DistributionField", "GridSpec", "VelocityGrid", "build_grid", "discrete_gradient",
    "gram_matrices", "integrate", "EquilibriumMoments", "MixtureConfig", "SpeciesParams",
    "default_interaction", "equilibrium_moments", "maxwellian_field", "make_mixture",
    "validate_config", "__version__",
]
