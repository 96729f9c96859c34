"""Langevin dynamics of two gravitationally coupled masses.

The quadrature vector ``u = (X_A, P_A, X_B, P_B)`` obeys
``du/dt = K u + xi + kappa`` where ``K`` is the drift matrix, ``xi`` white
noise with diffusion matrix ``D`` and ``kappa`` the constant gravitational
pull.  Means follow ``u(t) = W(t) u(0) + int_0^t W(s) kappa ds`` and the
covariance solves ``dV/dt = K V + V K^T + D``.

Three propagation routes are available:

``normal_modes``
    Closed form for undamped motion.  The masses decouple into a
    centre-of-mass mode and a relative mode, each obeying
    ``dX/dt = w P, dP/dt = -w a X`` with ``a = 1`` (trap) / ``1 - 2 eta``
    (relative, trapped) or ``a = 0`` (free) / ``-2 eta`` (relative, released).
``expm``
    Pade matrix exponential for ``W`` plus the Van Loan block exponential for
    the noise integral.  Exact for any damping.
``rk``
    Adaptive Dormand-Prince integration of the Lyapunov equation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from gravent import analytics
from gravent import constants as const
from gravent import cvcore
from gravent.cvcore import InitialStateSpec
from gravent.errors import IntegrationError, PropagationOverflowError
from gravent.linalg import expm

METHODS = ("auto", "normal_modes", "expm", "rk")
DEFAULT_RTOL = 1e-10


class Setup(str, enum.Enum):
    OSCILLATORS = "oscillators"
    RELEASED = "released"


@dataclass(frozen=True)
class Scenario:
    """One experiment.

    For released masses ``omega`` only fixes the initial spread,
    ``dx(0) = sqrt(hbar / 2 m omega)``; no trap force acts.

    Attributes:
        setup: trapped oscillators or released masses.
        m: mass of each body [kg].
        omega: trap frequency / spread parameter [1/s].
        L: centre-to-centre separation [m].
        gamma: mechanical damping rate [1/s]; must be 0 for released masses.
        initial: initial squeezed thermal state; its ``nbar`` is also the
            occupation of the bath.
        density: material density [kg/m^3], enables sphere geometry checks.
        mean0: initial quadrature means.
    """

    setup: Setup
    m: float
    omega: float
    L: float
    gamma: float = 0.0
    initial: InitialStateSpec = field(default_factory=InitialStateSpec)
    density: float | None = None
    mean0: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "setup", Setup(self.setup))
        for name in ("m", "omega", "L"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.setup is Setup.RELEASED and self.gamma != 0:
            raise ValueError("released masses are undamped; gamma must be 0")
        if self.density is not None:
            if self.density <= 0:
                raise ValueError("density must be positive")
            if self.L <= 2 * self.radius:
                raise ValueError(
                    f"spheres overlap: L={self.L:.4g} m <= 2R={2 * self.radius:.4g} m"
                )
        object.__setattr__(self, "mean0", tuple(float(x) for x in self.mean0))
        if len(self.mean0) != 4:
            raise ValueError("mean0 must have 4 entries")

    @classmethod
    def spheres(
        cls,
        setup: Setup | str,
        m: float,
        omega: float,
        separation_ratio: float,
        density: float | None = None,
        **kwargs,
    ) -> "Scenario":
        """Equal spheres placed ``separation_ratio`` radii apart."""
        density = const.OSMIUM_DENSITY if density is None else density
        L = separation_ratio * analytics.sphere_radius(m, density)
        return cls(setup=setup, m=m, omega=omega, L=L, density=density, **kwargs)

    @property
    def radius(self) -> float:
        if self.density is None:
            raise ValueError("scenario has no material density")
        return analytics.sphere_radius(self.m, self.density)

    @property
    def eta(self) -> float:
        return float(analytics.eta(self.m, self.omega, self.L))

    @property
    def nu(self) -> float:
        return float(analytics.nu_constant(self.m, self.omega, self.L))

    @property
    def quality_factor(self) -> float:
        return np.inf if self.gamma == 0 else self.omega / self.gamma

    def initial_covariance(self) -> np.ndarray:
        return cvcore.thermal_squeezed_covariance(self.initial)


@dataclass(frozen=True)
class DerivedRates:
    eta: float
    nu: float


def derived_rates(sc: Scenario) -> DerivedRates:
    return DerivedRates(sc.eta, sc.nu)


@dataclass(frozen=True)
class Propagator:
    """Drift ``K``, diffusion ``D`` and constant drive ``kappa`` (all 1/s)."""

    K: np.ndarray
    D: np.ndarray
    kappa: np.ndarray
    setup: Setup
    omega: float
    eta: float
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("K", "D", "kappa"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        d = np.diag(self.D)
        if not np.array_equal(self.D, np.diag(d)) or np.any(d < 0):
            raise ValueError("D must be diagonal and non-negative")
        if d[0] != 0 or d[2] != 0:
            raise ValueError("noise acts on momenta only")

    @property
    def undamped(self) -> bool:
        return not np.any(self.D) and self.gamma == 0

    def without_drive(self) -> "Propagator":
        return Propagator(
            self.K, self.D, np.zeros(4), self.setup, self.omega, self.eta, self.gamma
        )


def _drive(nu: float) -> np.ndarray:
    return nu * np.array([0.0, 1.0, 0.0, -1.0])


def build_oscillator_propagator(sc: Scenario) -> Propagator:
    """Drift, diffusion and drive for two trapped, damped oscillators.

    Raises:
        ValueError: ``eta >= 1``; the quadratic truncation and the stability
            of the relative mode both fail there.
    """
    if sc.setup is not Setup.OSCILLATORS:
        raise ValueError("scenario is not an oscillator setup")
    w, g, e = sc.omega, sc.gamma, sc.eta
    if e >= 1:
        raise ValueError(f"eta = {e:.4g} >= 1 is outside the weak-coupling regime")
    K = np.array(
        [
            [0.0, w, 0.0, 0.0],
            [-w * (1 - e), -g, -w * e, 0.0],
            [0.0, 0.0, 0.0, w],
            [-w * e, 0.0, -w * (1 - e), -g],
        ]
    )
    diff = g * (2 * sc.initial.nbar + 1)
    D = np.diag([0.0, diff, 0.0, diff])
    return Propagator(K, D, _drive(sc.nu), sc.setup, w, e, g)


def build_released_propagator(sc: Scenario) -> Propagator:
    """Drift and drive for two free masses; no noise, no damping."""
    if sc.setup is not Setup.RELEASED:
        raise ValueError("scenario is not a released-mass setup")
    if sc.gamma != 0:
        raise ValueError("released masses must have gamma = 0")
    w, e = sc.omega, sc.eta
    K = np.array(
        [
            [0.0, w, 0.0, 0.0],
            [w * e, 0.0, -w * e, 0.0],
            [0.0, 0.0, 0.0, w],
            [-w * e, 0.0, w * e, 0.0],
        ]
    )
    return Propagator(K, np.zeros((4, 4)), _drive(sc.nu), sc.setup, w, e, 0.0)


def build_propagator(sc: Scenario) -> Propagator:
    if sc.setup is Setup.OSCILLATORS:
        return build_oscillator_propagator(sc)
    return build_released_propagator(sc)


def matrix_exponential(M, t: float = 1.0) -> np.ndarray:
    """``exp(M t)`` by Pade scaling and squaring."""
    return expm(np.asarray(M, dtype=float) * t)


# --- normal-mode closed forms -------------------------------------------------

_SERIES_TERMS = 20
_FACTORIALS = [1.0]
for _k in range(1, 2 * _SERIES_TERMS + 2):
    _FACTORIALS.append(_FACTORIALS[-1] * _k)


def _u_series(a: float, theta: np.ndarray) -> np.ndarray:
    """``S - theta C = -theta sum_n 2n z^n / (2n+1)!`` with ``z = -a theta^2``."""
    z = -a * theta**2
    total = np.zeros_like(theta)
    power = z.copy()
    for n in range(1, _SERIES_TERMS):
        total = total + (2.0 * n / _FACTORIALS[2 * n + 1]) * power
        power = power * z
    return -theta * total


def _mode_functions(a: float, theta):
    """Entries of the flow of ``dX/dt = w P, dP/dt = -w a X`` at ``theta = w t``.

    Returns ``(C, S, T, U)``: the flow is ``[[C, S], [-a S, C]]``, its time
    integral is ``[[S, T], [-a T, S]] / w`` and ``U = S - theta C``.
    """
    theta = np.asarray(theta, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        if a > 0:
            r = np.sqrt(a)
            C = np.cos(r * theta)
            S = np.sin(r * theta) / r
            T = 2.0 * np.sin(0.5 * r * theta) ** 2 / a
        elif a < 0:
            r = np.sqrt(-a)
            C = np.cosh(r * theta)
            S = np.sinh(r * theta) / r
            T = 2.0 * np.sinh(0.5 * r * theta) ** 2 / -a
        else:
            C = np.ones_like(theta)
            S = theta.copy()
            T = 0.5 * theta**2
        U = np.where(np.abs(a) * theta**2 <= 1.0, _u_series(a, theta), S - theta * C)
    for arr in (C, S, T, U):
        if not np.all(np.isfinite(arr)):
            raise PropagationOverflowError(
                f"normal-mode flow overflowed (a={a:.3g}, max w t={np.max(theta):.3g})"
            )
    return C, S, T, U


def _mode_coefficients(p: Propagator) -> tuple[float, float, float]:
    """``a`` for centre of mass, relative mode and the local frame."""
    if p.setup is Setup.OSCILLATORS:
        return 1.0, 1.0 - 2.0 * p.eta, 1.0
    return 0.0, -2.0 * p.eta, 0.0


def _flow2(C, S, a):
    out = np.empty(np.shape(C) + (2, 2))
    out[..., 0, 0] = C
    out[..., 0, 1] = S
    out[..., 1, 0] = -a * S
    out[..., 1, 1] = C
    return out


def _assemble(com: np.ndarray, rel: np.ndarray) -> np.ndarray:
    """Lab-basis 4x4 map from normal-mode 2x2 maps."""
    W = np.empty(com.shape[:-2] + (4, 4))
    plus = 0.5 * (com + rel)
    minus = 0.5 * (com - rel)
    W[..., :2, :2] = plus
    W[..., 2:, 2:] = plus
    W[..., :2, 2:] = minus
    W[..., 2:, :2] = minus
    return W


def _require_undamped(p: Propagator) -> None:
    if not p.undamped:
        raise ValueError("normal-mode closed form requires gamma = 0")


def exact_flow(p: Propagator, t) -> np.ndarray:
    """``W(t) = exp(K t)`` in closed form for undamped motion.

    Accepts a scalar or an array of times; returns shape ``(..., 4, 4)``.
    """
    _require_undamped(p)
    a_com, a_rel, _ = _mode_coefficients(p)
    theta = p.omega * np.asarray(t, dtype=float)
    Cc, Sc, _, _ = _mode_functions(a_com, theta)
    Cr, Sr, _, _ = _mode_functions(a_rel, theta)
    return _assemble(_flow2(Cc, Sc, a_com), _flow2(Cr, Sr, a_rel))


def interaction_frame_flow(p: Propagator, t) -> np.ndarray:
    """Flow with the uncoupled single-mass motion divided out.

    Returns ``F(t)^-1 W(t)`` where ``F = F_A (+) F_B`` is the local
    (``eta = 0``) evolution.  Because ``F`` is a local symplectic map the
    entanglement of ``W V0 W^T`` and of this frame's covariance coincide,
    while the latter stays well conditioned for released masses whose lab
    variances grow as ``(w t)^2``.
    """
    _require_undamped(p)
    a_com, a_rel, a_loc = _mode_coefficients(p)
    theta = p.omega * np.asarray(t, dtype=float)
    com = np.broadcast_to(np.eye(2), theta.shape + (2, 2)).copy()
    Cr, Sr, _, Ur = _mode_functions(a_rel, theta)
    if a_rel == a_loc:
        # no coupling: nothing is left once the local motion is removed
        rel = com.copy()
    elif a_loc == 0.0:
        # [[1, -theta], [0, 1]] @ [[C, S], [-a S, C]]
        rel = np.empty(theta.shape + (2, 2))
        rel[..., 0, 0] = Cr + a_rel * theta * Sr
        rel[..., 0, 1] = Ur
        rel[..., 1, 0] = -a_rel * Sr
        rel[..., 1, 1] = Cr
    else:
        Cl, Sl, _, _ = _mode_functions(a_loc, theta)
        inv_local = _flow2(Cl, -Sl, a_loc)
        rel = inv_local @ _flow2(Cr, Sr, a_rel)
    return _assemble(com, rel)


def local_frame(p: Propagator, t) -> np.ndarray:
    """The local map ``F(t)`` with ``W = F @ interaction_frame_flow``."""
    _, _, a_loc = _mode_coefficients(p)
    theta = p.omega * np.asarray(t, dtype=float)
    Cl, Sl, _, _ = _mode_functions(a_loc, theta)
    f = _flow2(Cl, Sl, a_loc)
    F = np.zeros(theta.shape + (4, 4))
    F[..., :2, :2] = f
    F[..., 2:, 2:] = f
    return F


def _exact_mean(p: Propagator, u0: np.ndarray, t) -> np.ndarray:
    a_com, a_rel, _ = _mode_coefficients(p)
    theta = p.omega * np.asarray(t, dtype=float)
    s2 = np.sqrt(2.0)
    plus0 = (u0[:2] + u0[2:]) / s2
    minus0 = (u0[:2] - u0[2:]) / s2
    # kappa = nu (0, 1, 0, -1): no centre-of-mass component
    k_rel = (p.kappa[:2] - p.kappa[2:]) / s2
    k_com = (p.kappa[:2] + p.kappa[2:]) / s2
    Cc, Sc, Tc, _ = _mode_functions(a_com, theta)
    Cr, Sr, Tr, _ = _mode_functions(a_rel, theta)
    plus = np.einsum("...ij,j->...i", _flow2(Cc, Sc, a_com), plus0)
    minus = np.einsum("...ij,j->...i", _flow2(Cr, Sr, a_rel), minus0)
    plus = plus + np.einsum("...ij,j->...i", _flow2(Sc, Tc, a_com), k_com) / p.omega
    minus = minus + np.einsum("...ij,j->...i", _flow2(Sr, Tr, a_rel), k_rel) / p.omega
    out = np.empty(theta.shape + (4,))
    out[..., :2] = (plus + minus) / s2
    out[..., 2:] = (plus - minus) / s2
    return out


# --- generic routes -----------------------------------------------------------


def _drive_step(p: Propagator, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``(exp(K h), int_0^h exp(K s) kappa ds)`` from one 5x5 exponential.

    The integral is linear in ``kappa``, so a unit drive is exponentiated and
    the result rescaled; a large ``|kappa|`` would otherwise inflate the norm
    and the number of squarings.
    """
    size = float(np.linalg.norm(p.kappa))
    M = np.zeros((5, 5))
    M[:4, :4] = p.K
    if size > 0:
        M[:4, 4] = p.kappa / size
    E = expm(M * h)
    return E[:4, :4], E[:4, 4] * size


def _noise_step(p: Propagator, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``(exp(K h), int_0^h exp(K s) D exp(K^T s) ds)`` via Van Loan."""
    if not np.any(p.D):
        return expm(p.K * h), np.zeros((4, 4))
    M = np.zeros((8, 8))
    M[:4, :4] = -p.K
    M[:4, 4:] = p.D
    M[4:, 4:] = p.K.T
    E = expm(M * h)
    phi = E[4:, 4:].T
    Q = phi @ E[:4, 4:]
    return phi, 0.5 * (Q + Q.T)


def propagate_mean(p: Propagator, u0, t: float, method: str = "auto") -> np.ndarray:
    """Quadrature means at time ``t``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    method = _resolve(p, method)
    u0 = np.asarray(u0, dtype=float).reshape(4)
    if method == "normal_modes":
        return _exact_mean(p, u0, t)
    W, g = _drive_step(p, float(t))
    return W @ u0 + g


def _resolve(p: Propagator, method: str) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if method == "auto":
        return "normal_modes" if p.undamped else "expm"
    if method == "normal_modes":
        _require_undamped(p)
    return method


def propagate_covariance(
    p: Propagator,
    V0,
    t: float,
    method: str = "auto",
    rtol: float = DEFAULT_RTOL,
    frame: str = "lab",
) -> np.ndarray:
    """Covariance at time ``t``.

    Args:
        p: propagator.
        V0: initial covariance.
        t: time [s], ``>= 0``.
        method: ``"auto"``, ``"normal_modes"``, ``"expm"`` or ``"rk"``.
        rtol: relative tolerance of the ``"rk"`` route.
        frame: ``"lab"`` or ``"interaction"`` (undamped only, see
            :func:`interaction_frame_flow`).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    V0 = cvcore.as_covariance(V0)
    method = _resolve(p, method)
    if frame == "interaction":
        _require_undamped(p)
        W = interaction_frame_flow(p, t)
        return _congruence(W, V0)
    if frame != "lab":
        raise ValueError(f"unknown frame {frame!r}")
    if method == "normal_modes":
        return _congruence(exact_flow(p, t), V0)
    if method == "expm":
        phi, Q = _noise_step(p, float(t))
        return _symmetrize(_congruence(phi, V0) + Q)
    return integrate_lyapunov(p, V0, float(t), rtol=rtol)


def _congruence(W, V):
    out = W @ V @ np.swapaxes(W, -1, -2)
    return _symmetrize(out)


def _symmetrize(V):
    return 0.5 * (V + np.swapaxes(V, -1, -2))


# --- adaptive Runge-Kutta Lyapunov integrator ---------------------------------

_IU = np.triu_indices(4)

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = _DP_B - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def _unpack(y: np.ndarray) -> np.ndarray:
    V = np.empty((4, 4))
    V[_IU] = y
    V.T[_IU] = y
    return V


def integrate_lyapunov(
    p: Propagator,
    V0,
    t: float,
    rtol: float = DEFAULT_RTOL,
    atol: float | None = None,
    max_steps: int = 5_000_000,
) -> np.ndarray:
    """Integrate ``dV/dt = K V + V K^T + D`` with adaptive Dormand-Prince 5(4).

    Only the 10 independent entries are evolved, so symmetry is restored at
    every step by construction.

    Raises:
        IntegrationError: step size underflow or too many steps.
    """
    V0 = cvcore.as_covariance(V0)
    if t == 0:
        return np.array(V0)
    K, D = p.K, p.D
    scale = max(1.0, float(np.max(np.abs(V0))))
    atol = rtol * 1e-2 * scale if atol is None else atol

    def f(y):
        V = _unpack(y)
        KV = K @ V
        return (KV + KV.T + D)[_IU]

    y = np.array(V0[_IU])
    tau = 0.0
    knorm = max(float(np.linalg.norm(K, 1)), 1e-300)
    h = min(t, 0.01 / knorm)
    k1 = f(y)
    steps = 0
    while tau < t:
        if steps >= max_steps:
            raise IntegrationError(f"exceeded {max_steps} steps at t={tau:.6g} s")
        h = min(h, t - tau)
        if h <= 1e-14 * max(1.0, abs(tau)):
            raise IntegrationError(f"step size underflow at t={tau:.6g} s")
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_DP_A[i], ks))
            ks.append(f(yi))
        y_new = y + h * sum(b * k for b, k in zip(_DP_B, ks) if b != 0.0)
        err = h * sum(e * k for e, k in zip(_DP_E, ks) if e != 0.0)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / sc) ** 2)))
        if not np.isfinite(err_norm):
            raise IntegrationError(f"non-finite state at t={tau:.6g} s")
        if err_norm <= 1.0:
            tau += h
            y = y_new
            k1 = ks[6]
            steps += 1
        factor = 0.9 * err_norm ** (-0.2) if err_norm > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
    return _unpack(y)


# --- time series --------------------------------------------------------------


@dataclass
class EntanglementSeries:
    """Sampled entanglement, widths and means.

    Attributes:
        t: sample times [s].
        E: logarithmic negativity.
        nu_tilde_min: smallest partially transposed symplectic eigenvalue.
        dx_A, dx_B: position standard deviations [m].
        mean: quadrature means, shape ``(N, 4)``.
        mean_xA, mean_xB: mean displacements [m].
        errors: sample index -> message for samples that failed.
    """

    t: np.ndarray
    E: np.ndarray
    nu_tilde_min: np.ndarray
    dx_A: np.ndarray
    dx_B: np.ndarray
    mean: np.ndarray
    mean_xA: np.ndarray
    mean_xB: np.ndarray
    errors: dict[int, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def ok(self) -> bool:
        return not self.errors

    def peak(self) -> tuple[float, float]:
        """Largest sampled E and the time at which it occurs."""
        if not np.any(np.isfinite(self.E)):
            return float("nan"), float("nan")
        i = int(np.nanargmax(self.E))
        return float(self.E[i]), float(self.t[i])

    def crossing_time(self, threshold: float) -> float | None:
        """First time E reaches ``threshold`` (linear interpolation), or None."""
        E = self.E
        if len(E) == 0:
            return None
        if E[0] >= threshold:
            return float(self.t[0])
        above = np.nonzero(np.nan_to_num(E, nan=-np.inf) >= threshold)[0]
        if len(above) == 0:
            return None
        i = int(above[0])
        t0, t1, e0, e1 = self.t[i - 1], self.t[i], E[i - 1], E[i]
        return float(t0 + (threshold - e0) * (t1 - t0) / (e1 - e0))

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "t": self.t,
            "E": self.E,
            "nu_tilde_min": self.nu_tilde_min,
            "dx_A": self.dx_A,
            "dx_B": self.dx_B,
            "mean_xA": self.mean_xA,
            "mean_xB": self.mean_xB,
        }


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float).reshape(-1)
    if len(times) == 0:
        raise ValueError("time grid is empty")
    if np.any(~np.isfinite(times)) or np.any(times < 0):
        raise ValueError("times must be finite and non-negative")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending")
    return times


def _fill_nu(V_ent, good, nu, errors) -> None:
    """Closed-form eigenvalue per good sample; failures go into ``errors``."""
    if not np.any(good):
        return
    try:
        nu[good] = cvcore.min_ptranspose_symplectic_eigenvalue(V_ent[good])
    except Exception as exc:  # per-sample fallback
        for i in np.nonzero(good)[0]:
            try:
                nu[i] = cvcore.min_ptranspose_symplectic_eigenvalue(V_ent[i])
            except Exception as inner:  # noqa: BLE001
                errors[int(i)] = f"{type(inner).__name__}: {inner}"
        if not errors:
            raise exc
    for i in np.nonzero(good & np.isnan(nu))[0]:
        errors.setdefault(int(i), "symplectic eigenvalue is not finite (state overflowed)")


def _normal_mode_samples(p: Propagator, V0, u0, times):
    with np.errstate(over="ignore", invalid="ignore"):
        V_lab = _congruence(exact_flow(p, times), V0)
        V_ent = _congruence(interaction_frame_flow(p, times), V0)
        means = _exact_mean(p, u0, times)
    for arr in (V_lab, V_ent, means):
        if not np.all(np.isfinite(arr)):
            raise PropagationOverflowError("non-finite state from the normal-mode flow")
    return V_lab, V_ent, means


def entanglement_trace(
    sc: Scenario,
    times,
    method: str = "auto",
    rtol: float = DEFAULT_RTOL,
) -> EntanglementSeries:
    """Propagate a scenario and sample entanglement, widths and means.

    Undamped scenarios with the ``normal_modes`` route are evaluated
    independently per sample (vectorised).  All other routes step through
    the samples sequentially.
    """
    times = _check_times(times)
    p = build_propagator(sc)
    method = _resolve(p, method)
    V0 = sc.initial_covariance()
    u0 = np.array(sc.mean0)
    n = len(times)
    errors: dict[int, str] = {}

    if method == "normal_modes":
        try:
            V_lab, V_ent, means = _normal_mode_samples(p, V0, u0, times)
        except PropagationOverflowError:
            # retry one sample at a time so that only the failing rows are lost
            V_lab = np.full((n, 4, 4), np.nan)
            V_ent = np.full((n, 4, 4), np.nan)
            means = np.full((n, 4), np.nan)
            for i, t in enumerate(times):
                try:
                    V_lab[i], V_ent[i], means[i] = _normal_mode_samples(p, V0, u0, t)
                except PropagationOverflowError as exc:
                    errors[i] = str(exc)
    else:
        V_lab = np.full((n, 4, 4), np.nan)
        means = np.full((n, 4), np.nan)
        V, u, t_prev = np.array(V0), u0.copy(), 0.0
        cache: dict[float, tuple] = {}
        for i, t in enumerate(times):
            try:
                h = float(t - t_prev)
                if h > 0:
                    if h not in cache:
                        cache[h] = (_noise_step(p, h), _drive_step(p, h))
                    (phi, Q), (W, g) = cache[h]
                    if method == "rk":
                        V = integrate_lyapunov(p, V, h, rtol=rtol)
                    else:
                        V = _symmetrize(phi @ V @ phi.T + Q)
                    u = W @ u + g
                    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(u))):
                        raise PropagationOverflowError(f"non-finite state at t={t:.6g} s")
                V_lab[i], means[i] = V, u
                t_prev = float(t)
            except (PropagationOverflowError, IntegrationError) as exc:
                for j in range(i, n):
                    errors[j] = str(exc)
                break
        V_ent = V_lab

    nu = np.full(n, np.nan)
    good = np.array([i not in errors for i in range(n)])
    with np.errstate(over="ignore", invalid="ignore"):
        _fill_nu(V_ent, good, nu, errors)
    E = cvcore.negativity_from_nu(nu, V_ent)
    with np.errstate(invalid="ignore"):
        dx_A = np.sqrt(const.HBAR / (sc.m * sc.omega)) * np.sqrt(V_lab[:, 0, 0])
        dx_B = np.sqrt(const.HBAR / (sc.m * sc.omega)) * np.sqrt(V_lab[:, 2, 2])
    to_m = np.sqrt(const.HBAR / (sc.m * sc.omega))
    return EntanglementSeries(
        t=times,
        E=E,
        nu_tilde_min=nu,
        dx_A=dx_A,
        dx_B=dx_B,
        mean=means,
        mean_xA=to_m * means[:, 0],
        mean_xB=to_m * means[:, 2],
        errors=errors,
    )
