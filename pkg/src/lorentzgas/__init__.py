"""Scattering resonances of a quantum particle in a random point-scatterer gas.

The toolkit computes the resonance-potential map in the complex wavenumber
plane, its Laplacian (the resonance density), the eigenvalue clouds of the
dimensionless scattering matrix, two-scatterer resonance families, and the
analytic bounds and diagnostics that frame them.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    ConvergenceError,
    DomainError,
    PoleError,
    SingularMatrixError,
)
from .green import GasGeometry, ball_constants, gas_radius, green_I, green_fn  # noqa: F401
from .models import HardSphere, Resonant, cross_section, f_inverse, mean_free_path  # noqa: F401
