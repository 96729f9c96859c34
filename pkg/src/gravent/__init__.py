"""Gravitationally induced entanglement between two masses.

Gaussian two-mode state algebra, Langevin dynamics for trapped and released
masses, closed-form figures of merit, decoherence and Casimir estimates, and
alternative-geometry interaction rates.

Quadrature convention: ``X = sqrt(m w / hbar) x`` and ``P = p / sqrt(hbar m w)``,
so the vacuum variance of either quadrature is 1/2.
"""

from gravent.errors import (
    CollisionError,
    ConfigError,
    GraventError,
    IntegrationError,
    InvalidCovarianceError,
    NumericalDomainError,
    PropagationOverflowError,
    RegimeWarning,
)

__version__ = "0.1.0"

__all__ = [
    "CollisionError",
    "ConfigError",
    "GraventError",
    "IntegrationError",
    "InvalidCovarianceError",
    "NumericalDomainError",
    "PropagationOverflowError",
    "RegimeWarning",
    "__version__",
]
