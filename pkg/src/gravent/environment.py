"""Decoherence time scales, Casimir comparison and feasibility reports."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from gravent import analytics
from gravent import constants as const
from gravent import dynamics
from gravent.dynamics import Scenario, Setup
from gravent.errors import GraventError

PHOTON_RATE_PREFACTOR = 1e36  # 1 / (m^8 s K^9), empirical long-wavelength limit
CASIMIR_DOMINANCE_MAX = 0.1  # "r_cg << 1"
WAVELENGTH_RATIO_MAX = 0.1  # "dx << lambda"


@dataclass(frozen=True)
class EnvironmentSpec:
    """Temperature [K], scatterer density [1/m^3], molecule mass [kg] and the
    Casimir proximity factor ``0 <= f0 <= 1``."""

    T: float
    gas_density: float
    m_air: float = const.M_AIR
    f0: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.gas_density < 0:
            raise ValueError("gas_density must be >= 0")
        if self.m_air <= 0:
            raise ValueError("m_air must be positive")
        if not 0 <= self.f0 <= 1:
            raise ValueError("f0 must lie in [0, 1]")


# liquid helium and ultrahigh vacuum (~1e-10 Pa)
LAB_UHV = EnvironmentSpec(T=4.0, gas_density=1e12)
# cosmic background and ~1e-15 Pa
SPACE = EnvironmentSpec(T=2.7, gas_density=1e7)


def photon_rate(R, T):
    """Localisation rate from thermal photon scattering, ``1e36 R^6 T^9`` [1/m^2 s].

    Valid when the superposition size is far below the thermal photon
    wavelength.
    """
    return PHOTON_RATE_PREFACTOR * np.asarray(R, dtype=float) ** 6 * np.asarray(T) ** 9


def gas_rate(R, T, density, m_air: float | None = None):
    """Localisation rate from gas collisions [1/m^2 s].

    ``8 / (3 hbar^2) * n * sqrt(2 pi m_air) * R^2 * (k_B T)^(3/2)``.
    """
    m_air = const.M_AIR if m_air is None else m_air
    return (
        8.0
        / (3.0 * const.HBAR**2)
        * density
        * np.sqrt(2.0 * np.pi * m_air)
        * np.asarray(R, dtype=float) ** 2
        * (const.K_B * np.asarray(T)) ** 1.5
    )


def coherence_time(rate, dx):
    """``1 / (rate * dx^2)``; infinite when either factor vanishes."""
    if rate < 0 or dx < 0:
        raise ValueError("rate and dx must be non-negative")
    denom = rate * dx * dx
    return np.inf if denom == 0 else 1.0 / denom


def photon_wavelength(T):
    """Thermal photon wavelength ``h c / (k_B T)``."""
    return 2.0 * np.pi * const.HBAR * const.C / (const.K_B * T)


def molecule_wavelength(T, m_air: float | None = None):
    """Thermal de Broglie wavelength ``h / sqrt(2 pi m k_B T)``."""
    m_air = const.M_AIR if m_air is None else m_air
    return 2.0 * np.pi * const.HBAR / np.sqrt(2.0 * np.pi * m_air * const.K_B * T)


def casimir_gravity_ratio(m, rho, L, f0: float = 1.0):
    """Ratio of the Casimir to the gravitational ``(x_A - x_B)^2`` coefficients.

    The proximity-force energy ``-f0 pi^3 hbar c R / (1440 (d - y)^2)`` with
    gap ``d = L - 2R`` contributes ``-3 f0 pi^3 hbar c R / (1440 d^4) y^2``;
    gravity ``-G m^2 / (L - y)`` contributes ``-G m^2 / L^3 y^2``.

    Raises:
        ValueError: the spheres touch or overlap.
    """
    R = analytics.sphere_radius(m, rho)
    gap = L - 2.0 * R
    if gap <= 0:
        raise ValueError(f"spheres in contact: L={L:.4g} m <= 2R={2 * R:.4g} m")
    casimir = 3.0 * np.pi**3 * const.HBAR * const.C * R / (1440.0 * gap**4)
    gravity = const.G * m**2 / L**3
    return f0 * (casimir / gravity)


@dataclass
class FeasibilityReport:
    """Decoherence budget against the time needed to reach a target entanglement.

    ``t_target`` is None when the target is not reached within ``horizon``.
    """

    target_E: float
    t_target: float | None
    horizon: float
    dx: float
    dx_source: str
    tau_photon: float
    tau_gas: float
    r_cg: float
    lambda_photon: float
    lambda_gas: float
    regime_ok: dict[str, bool] = field(default_factory=dict)
    feasible: bool = False
    limiting: str = ""

    @property
    def tau_min(self) -> float:
        return min(self.tau_photon, self.tau_gas)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["tau_min"] = self.tau_min
        return out


def default_horizon(sc: Scenario, target_E: float) -> float:
    """Time window searched for the target entanglement."""
    if sc.setup is Setup.RELEASED:
        t_est = analytics.released_crossing_time(
            max(target_E, 1e-6), sc.m, sc.omega, sc.L, sc.initial.nbar
        )
        return 3.0 * t_est
    squeezed = sc.initial.s_A != 0 or sc.initial.s_B != 0
    t_peak = np.pi / (2 * sc.eta * sc.omega) if squeezed else np.pi / (2 * (1 - sc.eta) * sc.omega)
    return 1.05 * t_peak


def _sample_count(sc: Scenario, horizon: float, minimum: int = 2001) -> int:
    if sc.setup is Setup.OSCILLATORS:
        periods = sc.omega * horizon / (2 * np.pi)
        return int(max(minimum, 64 * periods + 1))
    return minimum


def time_grid(sc: Scenario, horizon: float, samples: int | None = None) -> np.ndarray:
    n = _sample_count(sc, horizon) if samples is None else samples
    return np.linspace(0.0, horizon, n)


def refine_crossing(sc: Scenario, series, target_E: float, method: str = "auto"):
    """Sharpen a grid crossing with bisection on the exact undamped map."""
    t_cross = series.crossing_time(target_E)
    if t_cross is None or t_cross == series.t[0]:
        return t_cross
    p = dynamics.build_propagator(sc)
    if not p.undamped or method not in ("auto", "normal_modes"):
        return t_cross
    i = int(np.searchsorted(series.t, t_cross))
    lo, hi = float(series.t[max(i - 1, 0)]), float(series.t[min(i, len(series.t) - 1)])

    def excess(t):
        return dynamics.entanglement_trace(sc, [t]).E[0] - target_E

    if excess(lo) >= 0 or excess(hi) < 0:
        return t_cross
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


def feasibility(
    sc: Scenario,
    env: EnvironmentSpec,
    target_E: float,
    dx: float | None = None,
    horizon: float | None = None,
    samples: int | None = None,
    times=None,
    method: str = "auto",
    rtol: float = dynamics.DEFAULT_RTOL,
    casimir_max: float = CASIMIR_DOMINANCE_MAX,
) -> FeasibilityReport:
    """Compare the entangling time with decoherence and Casimir coupling.

    The superposition size is the time-averaged width of mass A over
    ``[0, t_target]`` (over the whole horizon if the target is never met)
    unless ``dx`` is given explicitly.  ``times`` replaces the default search
    grid (its last entry becomes the horizon).  The verdict is feasible iff the
    target is reached before the shorter coherence time and the Casimir
    ratio is below ``casimir_max``.
    """
    if sc.density is None:
        raise GraventError("feasibility needs a material density to size the spheres")
    if target_E < 0:
        raise ValueError("target_E must be >= 0")
    R = sc.radius
    if times is not None:
        times = np.asarray(times, dtype=float)
        horizon = float(times[-1])
    elif horizon is None:
        horizon = default_horizon(sc, target_E)
    horizon = float(horizon)

    if target_E == 0:
        t_target: float | None = 0.0
        width_window = 0.0
    else:
        if times is None:
            times = time_grid(sc, horizon, samples)
        series = dynamics.entanglement_trace(sc, times, method=method, rtol=rtol)
        if series.errors:
            first = min(series.errors)
            raise GraventError(f"propagation failed: {series.errors[first]}")
        t_target = refine_crossing(sc, series, target_E, method)
        width_window = horizon if t_target is None else t_target

    if dx is not None:
        dx_used, source = float(dx), "input"
    elif width_window == 0.0:
        V0 = sc.initial_covariance()
        dx_used = float(np.sqrt(const.HBAR / (sc.m * sc.omega) * V0[0, 0]))
        source = "initial width"
    else:
        wt = time_grid(sc, width_window, samples)
        w = dynamics.entanglement_trace(sc, wt, method=method, rtol=rtol).dx_A
        dx_used = float(np.trapezoid(w, wt) / width_window)
        source = f"time average over [0, {width_window:.6g}] s"

    tau_ph = coherence_time(float(photon_rate(R, env.T)), dx_used)
    tau_am = coherence_time(float(gas_rate(R, env.T, env.gas_density, env.m_air)), dx_used)
    r_cg = float(casimir_gravity_ratio(sc.m, sc.density, sc.L, env.f0))
    lam_ph = float(photon_wavelength(env.T))
    lam_am = float(molecule_wavelength(env.T, env.m_air))
    regime = {
        "dx_below_photon_wavelength": dx_used < WAVELENGTH_RATIO_MAX * lam_ph,
        "dx_below_molecule_wavelength": dx_used < WAVELENGTH_RATIO_MAX * lam_am,
        "casimir_negligible": r_cg < casimir_max,
    }
    reached = t_target is not None
    limiting = ""
    if not reached:
        limiting = "target not reached"
    elif t_target >= min(tau_ph, tau_am):
        limiting = "photon scattering" if tau_ph <= tau_am else "gas collisions"
    elif not regime["casimir_negligible"]:
        limiting = "casimir"
    return FeasibilityReport(
        target_E=float(target_E),
        t_target=t_target,
        horizon=horizon,
        dx=dx_used,
        dx_source=source,
        tau_photon=tau_ph,
        tau_gas=tau_am,
        r_cg=r_cg,
        lambda_photon=lam_ph,
        lambda_gas=lam_am,
        regime_ok=regime,
        feasible=not limiting,
        limiting=limiting,
    )
