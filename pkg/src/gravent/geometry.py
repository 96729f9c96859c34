"""Interaction rates for other mass geometries and the classical trajectory.

The interaction rate between the two modes is the coefficient of
``X_A X_B`` in the Hamiltonian divided by hbar.  For a quadratic coupling
``-c (x_A - x_B)^2`` between bodies of masses ``m_A, m_B`` and frequencies
``w_A, w_B`` it is ``2 c / sqrt(m_A m_B w_A w_B)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from gravent import constants as const
from gravent.errors import CollisionError

EQUAL_SPHERE_RATIO = 2.1  # L / R_A for sphere pairs
ROD_SPHERE_RATIO = 1.1  # L / R_A for the rod-sphere configuration
ROD_RADIUS_RATIO = 0.1  # R_B / R_A


class Shape(str, enum.Enum):
    EQUAL_SPHERES = "equal_spheres"
    UNEQUAL_SPHERES = "unequal_spheres"
    ROD_SPHERE = "rod_sphere"
    PLANE_POINT = "plane_point"


@dataclass(frozen=True)
class ShapePair:
    """A pair of bodies; ``param`` is alpha (unequal spheres) or varsigma (rod)."""

    kind: Shape
    omega_A: float
    density: float = const.OSMIUM_DENSITY
    param: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Shape(self.kind))
        if self.omega_A <= 0:
            raise ValueError("omega_A must be positive")
        if self.kind is Shape.UNEQUAL_SPHERES and self.param < 0:
            raise ValueError("alpha must be >= 0")
        if self.kind is Shape.ROD_SPHERE and self.param <= 0:
            raise ValueError("varsigma must be > 0")

    def interaction_rate(self) -> float:
        if self.kind is Shape.EQUAL_SPHERES:
            return sphere_rate_coefficient(self.density) / self.omega_A
        if self.kind is Shape.UNEQUAL_SPHERES:
            return rate_unequal_spheres(self.param, self.omega_A, self.density)
        if self.kind is Shape.ROD_SPHERE:
            return rate_rod_sphere(self.param, self.omega_A, self.density)
        return plane_point_coupling()


def rate_equal_spheres(m, omega, L):
    """``r_1 = 2 G m / (omega L^3)``; equals ``eta * omega``."""
    return 2.0 * const.G * m / (omega * L**3)


def sphere_rate_coefficient(rho: float | None = None, ratio: float = EQUAL_SPHERE_RATIO):
    """``omega * r_1`` for spheres at ``L = ratio * R``: ``8 pi G rho / 3 ratio^3``."""
    rho = const.OSMIUM_DENSITY if rho is None else rho
    return 8.0 * np.pi * const.G * rho / (3.0 * ratio**3)


def unequal_sphere_factor(alpha):
    """``alpha^(9/4)`` for ``R_B = alpha R_A`` and ``w_B = w_A sqrt(m_A / m_B)``."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0):
        raise ValueError("alpha must be >= 0")
    return alpha**2.25


def rate_unequal_spheres(alpha, omega_A, rho: float | None = None):
    return sphere_rate_coefficient(rho) * unequal_sphere_factor(alpha) / omega_A


def rod_sphere_factor(varsigma):
    """Shape factor ``f(varsigma)`` of the thin rod facing a sphere, ``varsigma = 2L/d``."""
    s = np.asarray(varsigma, dtype=float)
    if np.any(s <= 0):
        raise ValueError("varsigma must be positive")
    q = np.sqrt(1.0 + s * s)
    inner = s * s * ((s * s - 1.0) * q - 1.0) / ((1.0 + q) ** 2 * q**3)
    return s**0.25 * (1.0 - inner)


def rod_sphere_coefficient(rho: float | None = None) -> float:
    """``omega_A * r_3 / f(varsigma)`` from the rod and sphere dimensions.

    With ``lambda_B = rho pi R_B^2``, ``m_A = 4/3 pi rho R_A^3`` and the rod's
    spring-scaled frequency, the rate is
    ``2 G lambda_B^(3/4) m_A^(1/4) (2L)^(-1/4) / L^2 * f / omega_A``, which is
    independent of ``R_A``.
    """
    rho = const.OSMIUM_DENSITY if rho is None else rho
    R_A = 1.0
    L = ROD_SPHERE_RATIO * R_A
    lam = rho * np.pi * (ROD_RADIUS_RATIO * R_A) ** 2
    m_A = 4.0 / 3.0 * np.pi * rho * R_A**3
    return 2.0 * const.G * lam**0.75 * m_A**0.25 * (2.0 * L) ** -0.25 / L**2


def rate_rod_sphere(varsigma, omega_A, rho: float | None = None):
    return rod_sphere_coefficient(rho) * rod_sphere_factor(varsigma) / omega_A


def rod_sphere_optimum(upper: float = 100.0) -> tuple[float, float]:
    """Maximiser and maximum of ``f(varsigma)`` over ``(0, upper]``."""
    grid = np.linspace(upper * 1e-6, upper, 200001)
    i = int(np.argmax(rod_sphere_factor(grid)))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(
        lambda s: -rod_sphere_factor(s), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x), float(-res.fun)


def plane_point_coupling() -> float:
    """An infinite plane and a point mass: the energy is linear in
    ``x_A - x_B`` so there is no quadratic cross term."""
    return 0.0


# --- classical trajectory -----------------------------------------------------


def _relation(x, m, L):
    """Right-hand side of ``t sqrt(2 G m / L) = g(x)`` for displacement ``x``.

    ``pi/2 - atan(theta)`` is written as ``atan2(sqrt(8x(L-2x)), L - 4x)``,
    which stays accurate as ``theta -> infinity`` at small ``x``.
    """
    root = np.sqrt(np.maximum(x * (L - 2.0 * x), 0.0))
    return root + L / (2.0 * np.sqrt(2.0)) * np.arctan2(np.sqrt(8.0) * root, L - 4.0 * x)


def _relation_slope(x, L):
    # energy conservation: dx/dt = sqrt(2 G m x / (L (L - 2x)))
    return np.sqrt((L - 2.0 * x) / x)


def trajectory_residual(x, m, L, t):
    """``g(x) - t sqrt(2 G m / L)`` in metres."""
    return _relation(x, m, L) - t * np.sqrt(2.0 * const.G * m / L)


def contact_time(m: float, L: float, radius: float = 0.0) -> float:
    """Time for two point masses (or spheres of ``radius``) to touch."""
    if 2 * radius >= L:
        raise ValueError("bodies already overlap")
    x_contact = 0.5 * (L - 2.0 * radius)
    return float(_relation(x_contact, m, L) / np.sqrt(2.0 * const.G * m / L))


def classical_trajectory(
    m: float, L: float, t: float, radius: float = 0.0, xtol: float = 1e-15
) -> float:
    """Displacement of the left mass towards the centre under full 1/r gravity.

    Both masses start at rest a distance ``L`` apart; the right mass moves
    by ``-x_t``.  Solved by bisection on ``x in (0, L/2)`` followed by one
    Newton step.

    Raises:
        CollisionError: ``t`` is at or beyond the contact time.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if m <= 0 or L <= 0:
        raise ValueError("mass and separation must be positive")
    if t == 0:
        return 0.0
    t_c = contact_time(m, L, radius)
    if t >= t_c:
        raise CollisionError(f"t = {t:.6g} s is beyond contact at {t_c:.6g} s")
    target = t * np.sqrt(2.0 * const.G * m / L)
    lo, hi = 0.0, 0.5 * (L - 2.0 * radius)
    # g(x) ~ 2 sqrt(L x) for small x gives a tight starting bracket
    guess = target**2 / (4.0 * L)
    if _relation(4.0 * guess, m, L) >= target and 4.0 * guess < hi:
        hi = 4.0 * guess
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _relation(mid, m, L) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= xtol * hi:
            break
    x = 0.5 * (lo + hi)
    x_new = x - (_relation(x, m, L) - target) / _relation_slope(x, L)
    if lo <= x_new <= hi:
        x = x_new
    return float(x)
