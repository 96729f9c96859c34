import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    drift_oscillators,
    mp_released_log_negativity,
    released,
    squeezed_oscillators,
)
from gravent import analytics, cvcore, dynamics
from gravent import constants as const
from gravent.cvcore import InitialStateSpec
from gravent.dynamics import Propagator, Scenario, Setup
from gravent.errors import IntegrationError

HBAR = 1.054571817e-34


# --- scenario -------------------------------------------------------------------


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario("oscillators", m=-1.0, omega=1.0, L=1.0)
    with pytest.raises(ValueError):
        Scenario("released", m=1.0, omega=1.0, L=1.0, gamma=0.1)
    with pytest.raises(ValueError, match="overlap"):
        Scenario("oscillators", m=1.0, omega=1.0, L=0.01, density=22590.0)


def test_scenario_derived_quantities(oscillator_scenario):
    sc = oscillator_scenario
    assert sc.eta == pytest.approx(1.36e-4, rel=5e-3)
    assert sc.radius == pytest.approx((3 / (4 * np.pi * 22590.0)) ** (1 / 3), rel=1e-14)
    assert sc.quality_factor == np.inf
    rates = dynamics.derived_rates(sc)
    assert rates.eta == sc.eta and rates.nu == sc.nu


# --- propagators ------------------------------------------------------------------


def test_oscillator_propagator_matches_cited_drift(oscillator_scenario):
    sc = Scenario.spheres(
        "oscillators", m=1.0, omega=0.1, separation_ratio=2.1, gamma=0.1 / 1e6,
        initial=InitialStateSpec(nbar=1),
    )
    p = dynamics.build_propagator(sc)
    np.testing.assert_array_equal(p.K, drift_oscillators(0.1, sc.eta, 0.1 / 1e6))
    np.testing.assert_allclose(np.diag(p.D), [0, 3 * 0.1e-6, 0, 3 * 0.1e-6], rtol=1e-15)
    np.testing.assert_allclose(p.kappa, sc.nu * np.array([0, 1, 0, -1]))


def test_no_gravity_decouples(monkeypatch, oscillator_scenario):
    monkeypatch.setattr(const, "G", 0.0)
    p = dynamics.build_propagator(oscillator_scenario)
    assert np.all(p.K[:2, 2:] == 0) and np.all(p.K[2:, :2] == 0)
    assert not np.any(p.kappa)


def test_eta_at_least_one_rejected():
    sc = Scenario("oscillators", m=1.0, omega=1e-6, L=0.05)
    assert sc.eta >= 1
    with pytest.raises(ValueError, match="eta"):
        dynamics.build_propagator(sc)


def test_released_propagator(released_scenario):
    sc = released_scenario
    p = dynamics.build_propagator(sc)
    w, e = sc.omega, sc.eta
    expected = np.array([[0, w, 0, 0], [w * e, 0, -w * e, 0], [0, 0, 0, w], [-w * e, 0, w * e, 0]])
    np.testing.assert_array_equal(p.K, expected)
    assert not np.any(p.D)
    assert p.undamped
    assert np.isfinite(sc.eta) and np.isfinite(sc.nu) and sc.nu > 0


def test_propagator_rejects_bad_diffusion():
    with pytest.raises(ValueError):
        Propagator(np.zeros((4, 4)), np.diag([1.0, 0, 0, 0]), np.zeros(4), Setup.OSCILLATORS, 1.0, 0.0)
    with pytest.raises(ValueError):
        Propagator(np.zeros((4, 4)), np.diag([0, -1.0, 0, 0]), np.zeros(4), Setup.OSCILLATORS, 1.0, 0.0)


def test_propagator_arrays_are_read_only(oscillator_scenario):
    p = dynamics.build_propagator(oscillator_scenario)
    with pytest.raises(ValueError):
        p.K[0, 0] = 1.0


# --- matrix exponential and exact flows ------------------------------------------------------


def test_matrix_exponential_basics():
    np.testing.assert_array_equal(dynamics.matrix_exponential(np.zeros((4, 4)), 3.0), np.eye(4))
    R = dynamics.matrix_exponential(np.array([[0.0, 2.0], [-2.0, 0.0]]), 0.3)
    np.testing.assert_allclose(R, [[np.cos(0.6), np.sin(0.6)], [-np.sin(0.6), np.cos(0.6)]], rtol=1e-14)


def test_released_relative_mode_grows_as_cosh():
    w, e = 2.0, 1e-3
    K = np.array([[0, w, 0, 0], [w * e, 0, -w * e, 0], [0, 0, 0, w], [-w * e, 0, w * e, 0]])
    lam = w * np.sqrt(2 * e)
    for t in (1.0, 10.0, 100.0):
        W = dynamics.matrix_exponential(K, t)
        rel = W @ np.array([1.0, 0.0, -1.0, 0.0])
        assert rel[0] - rel[2] == pytest.approx(2 * np.cosh(lam * t), rel=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.3, 15.7, 400.0, 3.1e4])
def test_exact_flow_matches_scipy_oscillators(oscillator_scenario, t):
    p = dynamics.build_propagator(oscillator_scenario)
    np.testing.assert_allclose(
        dynamics.exact_flow(p, t), scipy.linalg.expm(p.K * t), rtol=1e-9, atol=1e-11
    )


@pytest.mark.parametrize("t", [0.0, 1e-6, 0.01, 1.0])
def test_exact_flow_matches_scipy_released(released_scenario, t):
    p = dynamics.build_propagator(released_scenario)
    ref = scipy.linalg.expm(p.K * t)
    np.testing.assert_allclose(dynamics.exact_flow(p, t), ref, rtol=1e-10, atol=1e-12 * np.abs(ref).max())


def test_exact_flow_is_symplectic(released_scenario):
    p = dynamics.build_propagator(released_scenario)
    W = dynamics.exact_flow(p, 10.0)
    O = cvcore.OMEGA
    np.testing.assert_allclose(W @ O @ W.T, O, atol=1e-12 * np.abs(W).max() ** 2)


def test_mode_functions_series_branch_continuity():
    # the small-argument series and the closed form agree at the switch-over
    for a in (1.0, -1.0, 1e-3, -2e-16):
        th_switch = 1.0 / np.sqrt(abs(a))
        for th in (th_switch * (1 - 1e-9), th_switch * (1 + 1e-9)):
            C, S, T, U = dynamics._mode_functions(a, np.array([th]))
            assert U[0] == pytest.approx(S[0] - th * C[0], rel=1e-6, abs=1e-12 * th**3)


# --- means -------------------------------------------------------------------------------


def test_mean_zero_without_drive(oscillator_scenario):
    p = dynamics.build_propagator(oscillator_scenario).without_drive()
    np.testing.assert_array_equal(dynamics.propagate_mean(p, np.zeros(4), 12.0), np.zeros(4))


def test_drive_attracts(released_scenario):
    p = dynamics.build_propagator(released_scenario)
    u = dynamics.propagate_mean(p, np.zeros(4), 1e-3)
    assert u[1] > 0 > u[3]
    assert u[0] > 0 > u[2]


def test_released_mean_closed_form(released_scenario):
    sc = released_scenario
    p = dynamics.build_propagator(sc)
    lam = sc.omega * np.sqrt(2 * sc.eta)
    to_m = np.sqrt(HBAR / (sc.m * sc.omega))
    for t in (0.1, 1.0, 10.0):
        u = dynamics.propagate_mean(p, np.zeros(4), t)
        rel = to_m * (u[0] - u[2])
        # (L/2)(cosh(lam t) - 1) written without cancellation
        assert rel == pytest.approx(sc.L * np.sinh(lam * t / 2) ** 2, rel=1e-9)


def test_mean_routes_agree():
    sc = Scenario.spheres("oscillators", m=1.0, omega=0.1, separation_ratio=2.1, gamma=0.0)
    p = dynamics.build_propagator(sc)
    u0 = np.array([0.3, -0.2, 0.1, 0.5])
    for t in (1.0, 37.0, 1e4):
        a = dynamics.propagate_mean(p, u0, t, method="normal_modes")
        b = dynamics.propagate_mean(p, u0, t, method="expm")
        np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-8 * np.abs(a).max())


def test_negative_time_rejected(oscillator_scenario):
    p = dynamics.build_propagator(oscillator_scenario)
    with pytest.raises(ValueError):
        dynamics.propagate_mean(p, np.zeros(4), -1.0)
    with pytest.raises(ValueError):
        dynamics.propagate_covariance(p, 0.5 * np.eye(4), -1.0)


# --- covariances -------------------------------------------------------------------------------


def test_covariance_at_zero_time(oscillator_scenario):
    p = dynamics.build_propagator(oscillator_scenario)
    V0 = cvcore.thermal_squeezed_covariance(InitialStateSpec(1, 0.4, -0.2))
    for method in ("normal_modes", "expm", "rk"):
        np.testing.assert_allclose(dynamics.propagate_covariance(p, V0, 0.0, method=method), V0, atol=1e-15)


def test_uncoupled_oscillators_rotate_without_entangling(monkeypatch, oscillator_scenario):
    monkeypatch.setattr(const, "G", 0.0)
    p = dynamics.build_propagator(oscillator_scenario)
    V0 = cvcore.thermal_squeezed_covariance(InitialStateSpec(0, 1.0, 0.5))
    for t in np.linspace(0, 100, 7):
        V = dynamics.propagate_covariance(p, V0, t)
        assert cvcore.log_negativity(V) == 0.0
        c, s = np.cos(0.1 * t), np.sin(0.1 * t)
        R = np.array([[c, s], [-s, c]])
        np.testing.assert_allclose(V[:2, :2], R @ V0[:2, :2] @ R.T, atol=1e-12)


@pytest.mark.parametrize(
    "sc,t_max",
    [(squeezed_oscillators(), 1.2e5), (released(), 10.0), (released(nbar=5), 10.0)],
)
def test_determinant_preserved_without_damping(sc, t_max):
    p = dynamics.build_propagator(sc)
    V0 = sc.initial_covariance()
    det0 = np.linalg.det(V0)
    for t in np.linspace(0, t_max, 11):
        # lab-frame entries reach 5e11 for released masses, so merely storing
        # them in doubles moves det at 1e-4; the interaction frame is O(1)
        Vi = dynamics.propagate_covariance(p, V0, t, frame="interaction")
        assert np.linalg.det(Vi) == pytest.approx(det0, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 5e3), st.floats(0.0, 5e3))
def test_composition_without_damping(t1, t2):
    sc = squeezed_oscillators(s=0.7)
    p = dynamics.build_propagator(sc)
    V0 = sc.initial_covariance()
    direct = dynamics.propagate_covariance(p, V0, t1 + t2)
    stepped = dynamics.propagate_covariance(p, dynamics.propagate_covariance(p, V0, t1), t2)
    np.testing.assert_allclose(stepped, direct, rtol=1e-9, atol=1e-9 * np.abs(direct).max())


def test_drive_does_not_touch_covariance():
    sc = Scenario.spheres("oscillators", m=1.0, omega=0.1, separation_ratio=2.1, gamma=1e-6)
    p = dynamics.build_propagator(sc)
    V0 = sc.initial_covariance()
    for method in ("expm", "rk"):
        a = dynamics.propagate_covariance(p, V0, 50.0, method=method)
        b = dynamics.propagate_covariance(p.without_drive(), V0, 50.0, method=method)
        np.testing.assert_array_equal(a, b)


def test_damped_routes_agree():
    sc = Scenario.spheres(
        "oscillators", m=1.0, omega=0.1, separation_ratio=2.1, gamma=0.1 / 1e3,
        initial=InitialStateSpec(2, 0.6, 0.6),
    )
    p = dynamics.build_propagator(sc)
    V0 = sc.initial_covariance()
    for t in (5.0, 100.0, 700.0):
        a = dynamics.propagate_covariance(p, V0, t, method="expm")
        b = dynamics.propagate_covariance(p, V0, t, method="rk", rtol=1e-11)
        np.testing.assert_allclose(b, a, rtol=1e-8, atol=1e-8 * np.abs(a).max())


def test_damped_state_relaxes_to_thermal():
    sc = Scenario("oscillators", m=1.0, omega=1.0, L=1e3, gamma=0.1, initial=InitialStateSpec(3, 1.0, -1.0))
    p = dynamics.build_propagator(sc)
    V = dynamics.propagate_covariance(p, sc.initial_covariance(), 400.0)
    # the gamma-on-momentum bath settles near the (2 nbar + 1)/2 level
    np.testing.assert_allclose(np.diag(V), 3.5, rtol=0.1)


def test_normal_modes_route_requires_undamped():
    sc = Scenario.spheres("oscillators", m=1.0, omega=0.1, separation_ratio=2.1, gamma=1e-6)
    p = dynamics.build_propagator(sc)
    with pytest.raises(ValueError):
        dynamics.propagate_covariance(p, sc.initial_covariance(), 1.0, method="normal_modes")
    with pytest.raises(ValueError):
        dynamics.propagate_covariance(p, sc.initial_covariance(), 1.0, method="nope")


def test_lyapunov_reports_exhausted_steps():
    sc = Scenario.spheres("oscillators", m=1.0, omega=0.1, separation_ratio=2.1, gamma=1e-6)
    p = dynamics.build_propagator(sc)
    with pytest.raises(IntegrationError):
        dynamics.integrate_lyapunov(p, sc.initial_covariance(), 1e4, max_steps=5)


def test_interaction_frame_preserves_entanglement():
    sc = squeezed_oscillators(s=0.3)
    p = dynamics.build_propagator(sc)
    V0 = sc.initial_covariance()
    for t in (3.0, 15.7, 400.0):
        lab = dynamics.propagate_covariance(p, V0, t)
        inter = dynamics.propagate_covariance(p, V0, t, frame="interaction")
        assert cvcore.log_negativity(inter) == pytest.approx(cvcore.log_negativity(lab), abs=1e-10)


# --- traces -------------------------------------------------------------------------------------


def test_oscillator_peak(oscillator_scenario):
    sc = oscillator_scenario
    t_max = np.pi / (2 * (1 - sc.eta) * sc.omega)
    series = dynamics.entanglement_trace(sc, np.linspace(0, 2 * t_max, 4001))
    E, t = series.peak()
    assert E == pytest.approx(sc.eta / np.log(2), rel=1e-2)
    assert t == pytest.approx(t_max, rel=5e-3)


def test_oscillator_pattern_repeats_every_31_seconds(oscillator_scenario):
    sc = oscillator_scenario
    period = np.pi / ((1 - sc.eta) * sc.omega)
    assert period == pytest.approx(31.4, abs=0.1)
    t = np.linspace(0, period, 301)
    a = dynamics.entanglement_trace(sc, t).E
    b = dynamics.entanglement_trace(sc, t + period).E
    np.testing.assert_allclose(b, a, atol=1e-3 * a.max())


def test_released_trace_matches_high_precision_reference(released_scenario):
    sc = released_scenario
    times = [0.05, 0.8, 3.0, 10.0]
    series = dynamics.entanglement_trace(sc, times)
    for t, E in zip(times, series.E):
        assert E == pytest.approx(mp_released_log_negativity(t, sc.m, sc.omega, sc.L), abs=1e-10)


def test_released_thermal_trace_matches_reference():
    sc = released(nbar=1)
    series = dynamics.entanglement_trace(sc, [5.0, 10.0])
    for t, E in zip(series.t, series.E):
        assert E == pytest.approx(mp_released_log_negativity(t, sc.m, sc.omega, sc.L, nbar=1), abs=1e-10)


def test_released_benchmark_crossing(released_scenario):
    series = dynamics.entanglement_trace(released_scenario, np.linspace(0, 2, 2001))
    assert series.crossing_time(0.01) == pytest.approx(0.8, rel=0.1)


def test_released_width_matches_free_particle(released_scenario):
    sc = released_scenario
    t = np.linspace(0, 10, 101)
    series = dynamics.entanglement_trace(sc, t)
    np.testing.assert_allclose(series.dx_A, analytics.released_width(t, sc.m, sc.omega), rtol=1e-2)
    np.testing.assert_allclose(series.dx_B, series.dx_A, rtol=1e-12)


def test_trace_routes_agree_for_damped_oscillators():
    sc = Scenario.spheres(
        "oscillators", m=1.0, omega=0.1, separation_ratio=2.1, gamma=1e-7,
        initial=InitialStateSpec(0, 1.0, 1.0),
    )
    t = np.linspace(0, 200, 41)
    a = dynamics.entanglement_trace(sc, t, method="expm")
    b = dynamics.entanglement_trace(sc, t, method="rk", rtol=1e-12)
    np.testing.assert_allclose(b.E, a.E, atol=1e-8)
    np.testing.assert_allclose(b.mean, a.mean, atol=1e-6)


def test_undamped_trace_routes_agree():
    sc = squeezed_oscillators(s=0.5)
    t = np.linspace(0, 300, 31)
    a = dynamics.entanglement_trace(sc, t, method="normal_modes")
    b = dynamics.entanglement_trace(sc, t, method="expm")
    np.testing.assert_allclose(b.E, a.E, atol=1e-9)
    np.testing.assert_allclose(b.dx_A, a.dx_A, rtol=1e-9)


@pytest.mark.parametrize("times", [[], [1.0, 0.5], [-1.0, 0.0], [0.0, np.nan]])
def test_trace_rejects_bad_grids(oscillator_scenario, times):
    with pytest.raises(ValueError):
        dynamics.entanglement_trace(oscillator_scenario, times)


def test_overflow_recorded_per_sample(released_scenario):
    times = [0.0, 1.0, 1e7, 2e7]
    series = dynamics.entanglement_trace(released_scenario, times, method="expm")
    assert not series.ok
    assert set(series.errors) == {2, 3}
    assert np.isfinite(series.E[1]) and np.isnan(series.E[2])


def test_series_helpers():
    s = dynamics.EntanglementSeries(
        t=np.array([0.0, 1.0, 2.0]),
        E=np.array([0.0, 0.5, 1.0]),
        nu_tilde_min=np.full(3, 0.5),
        dx_A=np.zeros(3),
        dx_B=np.zeros(3),
        mean=np.zeros((3, 4)),
        mean_xA=np.zeros(3),
        mean_xB=np.zeros(3),
    )
    assert s.peak() == (1.0, 2.0)
    assert s.crossing_time(0.75) == pytest.approx(1.5)
    assert s.crossing_time(0.0) == 0.0
    assert s.crossing_time(2.0) is None
    assert list(s.columns()) == ["t", "E", "nu_tilde_min", "dx_A", "dx_B", "mean_xA", "mean_xB"]
