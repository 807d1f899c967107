"""Giant atom with two coupling points and time-delayed feedback.

Submodules: ``numerics`` (delay integrator, Lambert W, quadrature helpers),
``single_excitation`` (spontaneous decay, spectra, reflection),
``two_phonon`` (weak-drive scattering and correlations), ``cascade``
(numerically exact driven transients) and ``cli``.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapacityError,
    ConfigurationError,
    ConsistencyError,
    DomainError,
    GiantAtomError,
    IntegrationError,
    IterationError,
    NumericalError,
    RangeError,
)
from .single_excitation import P_B, P_C, P_D, SystemParams  # noqa: E402

__all__ = [
    "__version__",
    "SystemParams",
    "P_B",
    "P_C",
    "P_D",
    "GiantAtomError",
    "ConfigurationError",
    "DomainError",
    "RangeError",
    "NumericalError",
    "IterationError",
    "IntegrationError",
    "ConsistencyError",
    "CapacityError",
]
