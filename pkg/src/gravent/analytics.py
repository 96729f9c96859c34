"""Closed-form figures of merit and entanglement laws."""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

from gravent import constants as const
from gravent.errors import RegimeWarning

LN2 = np.log(2.0)

# Numerical thresholds standing in for "much less than one".
ETA_REGIME_MAX = 1e-2
GROWTH_REGIME_MAX = 1e-1
SQUEEZING_TO_ETA_MIN = 10.0


class PeakPrediction(NamedTuple):
    e_max: float
    t_max: float


class ReleasedRegime(NamedTuple):
    """Validity of the released-mass closed form at one instant."""

    eta: float
    growth: float  # sqrt(eta) * omega * t
    eta_small: bool
    growth_small: bool

    @property
    def valid(self) -> bool:
        return self.eta_small and self.growth_small


def sphere_radius(m: float, rho: float) -> float:
    """Radius of a homogeneous sphere of mass ``m`` and density ``rho``."""
    if m <= 0 or rho <= 0:
        raise ValueError("mass and density must be positive")
    return (3.0 * m / (4.0 * np.pi * rho)) ** (1.0 / 3.0)


def eta(m, omega, L):
    """Dimensionless gravitational coupling ``2 G m / (omega^2 L^3)``."""
    return 2.0 * const.G * m / (omega**2 * L**3)


def eta_from_density(rho, omega, separation_ratio: float = 2.1):
    """Coupling for equal spheres at ``L = separation_ratio * R``.

    Independent of the sphere size: ``8 pi G rho / (3 k^3 omega^2)``.
    """
    return 8.0 * np.pi * const.G * rho / (3.0 * separation_ratio**3 * omega**2)


def nu_constant(m, omega, L):
    """Constant drive frequency ``G m^2 / sqrt(hbar m omega L^4)``."""
    return const.G * m**2 / np.sqrt(const.HBAR * m * omega * L**4)


def oscillator_peak_thermal(eta: float, omega: float, nbar: float = 0.0) -> PeakPrediction:
    """Peak log-negativity and its time for unsqueezed thermal oscillators."""
    if not 0 <= eta < 1:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    e_max = max(0.0, eta / LN2 - np.log2(2 * nbar + 1))
    return PeakPrediction(e_max, np.pi / (2 * (1 - eta) * omega))


def oscillator_peak_squeezed(
    s_A: float, s_B: float, eta: float, omega: float, nbar: float = 0.0
) -> PeakPrediction:
    """Peak log-negativity and its time for squeezed thermal oscillators.

    Valid when both squeezing strengths greatly exceed ``eta``; a
    :class:`RegimeWarning` is issued otherwise.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if min(abs(s_A), abs(s_B)) < SQUEEZING_TO_ETA_MIN * eta:
        warnings.warn(
            f"squeezing ({s_A}, {s_B}) not much larger than eta={eta:.3g}",
            RegimeWarning,
            stacklevel=2,
        )
    e_max = max(0.0, abs(s_A + s_B) / LN2 - np.log2(2 * nbar + 1))
    return PeakPrediction(e_max, np.pi / (2 * eta * omega))


def sigma_merit(t, m, omega, L):
    """Released-mass figure of merit ``4 G^2 m^2 omega^2 t^6 / (9 L^6)``."""
    t = np.asarray(t, dtype=float)
    return 4.0 * const.G**2 * m**2 * omega**2 * t**6 / (9.0 * L**6)


def ground_entanglement_from_sigma(sigma):
    """``-log2 sqrt(1 + 2 sigma - 2 sqrt(sigma^2 + sigma))``.

    Evaluated as ``asinh(sqrt(sigma)) / ln 2``, which is the same function
    without the cancellation at large ``sigma``.
    """
    return np.arcsinh(np.sqrt(sigma)) / LN2


def sigma_from_ground_entanglement(E):
    """Inverse of :func:`ground_entanglement_from_sigma`."""
    return np.sinh(np.asarray(E, dtype=float) * LN2) ** 2


def released_regime(t, m, omega, L) -> ReleasedRegime:
    e = float(eta(m, omega, L))
    g = float(np.sqrt(e) * omega * np.max(t))
    return ReleasedRegime(e, g, e < ETA_REGIME_MAX, g < GROWTH_REGIME_MAX)


def released_entanglement(t, m, omega, L, nbar: float = 0.0):
    """Log-negativity between released masses (small-coupling closed form).

    Issues a :class:`RegimeWarning` when ``eta`` or ``sqrt(eta) omega t`` is
    not small; the value is still returned.
    """
    regime = released_regime(t, m, omega, L)
    if not regime.valid:
        warnings.warn(
            f"released-mass closed form outside its regime "
            f"(eta={regime.eta:.3g}, sqrt(eta)*omega*t={regime.growth:.3g})",
            RegimeWarning,
            stacklevel=2,
        )
    E = ground_entanglement_from_sigma(sigma_merit(t, m, omega, L)) - np.log2(2 * nbar + 1)
    E = np.maximum(0.0, E) + 0.0
    return float(E) if np.ndim(E) == 0 else E


def released_crossing_time(target_E, m, omega, L, nbar: float = 0.0) -> float:
    """Time at which the closed-form released entanglement reaches ``target_E``."""
    if target_E <= 0:
        return 0.0
    sigma = sigma_from_ground_entanglement(target_E + np.log2(2 * nbar + 1))
    return float((9.0 * L**6 * sigma / (4.0 * const.G**2 * m**2 * omega**2)) ** (1 / 6))


def released_width(t, m, omega):
    """Free-particle width ``sqrt(hbar / 2 m omega) sqrt(1 + omega^2 t^2)``."""
    if m <= 0 or omega <= 0:
        raise ValueError("mass and omega must be positive")
    t = np.asarray(t, dtype=float)
    w = np.sqrt(const.HBAR / (2 * m * omega)) * np.sqrt(1 + (omega * t) ** 2)
    return float(w) if w.ndim == 0 else w


def squeezed_release_remap(omega, s):
    """Effective spread parameter ``omega * exp(-2 s)`` for equal squeezing."""
    return omega * np.exp(-2.0 * s)
