"""Shared scenarios and independent reference implementations."""

from __future__ import annotations

import mpmath as mp
import numpy as np
import pytest
import scipy.linalg

from gravent.cvcore import InitialStateSpec
from gravent.dynamics import Scenario

OSMIUM = 22590.0
G = 6.67430e-11


@pytest.fixture
def oscillator_scenario():
    return Scenario.spheres("oscillators", m=1.0, omega=0.1, separation_ratio=2.1, density=OSMIUM)


@pytest.fixture
def released_scenario():
    return Scenario.spheres("released", m=1e-7, omega=1e5, separation_ratio=3.0, density=OSMIUM)


def squeezed_oscillators(s=1.73, nbar=0.0, gamma=0.0):
    return Scenario.spheres(
        "oscillators", m=1.0, omega=0.1, separation_ratio=2.1, density=OSMIUM,
        gamma=gamma, initial=InitialStateSpec(nbar, s, s),
    )


def released(nbar=0.0):
    return Scenario.spheres(
        "released", m=1e-7, omega=1e5, separation_ratio=3.0, density=OSMIUM,
        initial=InitialStateSpec(nbar),
    )


# --- reference implementations -------------------------------------------------

OMEGA2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
OMEGA4 = np.kron(np.eye(2), OMEGA2)


def brute_symplectic_eigenvalues(V):
    """Moduli of the eigenvalues of ``i Omega V``, each pair counted once."""
    ev = np.sort(np.abs(np.linalg.eigvals(1j * OMEGA4 @ V)))
    return ev[::2]


def brute_log_negativity(V):
    Vt = V.copy()
    Vt[3, :] *= -1
    Vt[:, 3] *= -1
    nu = brute_symplectic_eigenvalues(Vt)[0]
    return max(0.0, -np.log2(2 * nu))


def random_symplectic(rng, scale=1.0):
    """``expm(Omega H)`` with a random symmetric ``H`` is symplectic."""
    H = rng.normal(size=(4, 4)) * scale
    H = 0.5 * (H + H.T)
    return scipy.linalg.expm(OMEGA4 @ H)


def random_physical_cov(rng, scale=1.0, nu_max=5.0):
    nu = 0.5 + rng.uniform(0.0, nu_max, size=2)
    S = random_symplectic(rng, scale)
    V = S @ np.diag([nu[0], nu[0], nu[1], nu[1]]) @ S.T
    return 0.5 * (V + V.T)


def drift_oscillators(omega, eta, gamma=0.0):
    w = omega
    return np.array(
        [
            [0, w, 0, 0],
            [-w * (1 - eta), -gamma, -w * eta, 0],
            [0, 0, 0, w],
            [-w * eta, 0, -w * (1 - eta), -gamma],
        ],
        dtype=float,
    )


def mp_released_log_negativity(t, m, omega, L, nbar=0.0, dps=120):
    """Log-negativity of released masses in 120-digit arithmetic.

    Uses a Taylor series on ``K t / 2^s`` followed by ``s`` squarings and a
    dense eigen-solve, independent of the package's normal-mode route and
    closed-form eigenvalue.
    """
    with mp.workdps(dps):
        m, omega, L, t = mp.mpf(m), mp.mpf(omega), mp.mpf(L), mp.mpf(t)
        eta = 2 * mp.mpf(G) * m / (omega**2 * L**3)
        w = omega
        K = mp.matrix(
            [
                [0, w, 0, 0],
                [w * eta, 0, -w * eta, 0],
                [0, 0, 0, w],
                [-w * eta, 0, w * eta, 0],
            ]
        )
        norm = w * t
        s = max(0, int(mp.ceil(mp.log(norm * 8 + 1, 2))))
        A = K * (t / mp.mpf(2) ** s)
        W = mp.eye(4)
        term = mp.eye(4)
        for k in range(1, 40):
            term = term * A / k
            W = W + term
        for _ in range(s):
            W = W * W
        v = (2 * mp.mpf(nbar) + 1) / 2
        V = W * W.T * v

        # eigenvalues of (Omega V~)^2 are -nu~^2, each twice
        flip = mp.diag([1, 1, 1, -1])
        Om = mp.matrix([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]])
        M = Om * (flip * V * flip)
        ev = mp.eig(M * M, left=False, right=False)
        nu_min = mp.sqrt(min(-mp.re(e) for e in ev))
        E = -mp.log(2 * nu_min, 2)
        return float(max(E, 0))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
