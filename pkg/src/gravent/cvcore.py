"""Two-mode Gaussian state algebra.

Covariance matrices are plain ``(4, 4)`` float arrays ordered as
``(X_A, P_A, X_B, P_B)`` with ``V_ij = <{du_i, du_j}>/2``.  The vacuum has
``V = I/2`` and a state is physical iff both symplectic eigenvalues are at
least 1/2.

Most functions also accept stacks of matrices with shape ``(..., 4, 4)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from gravent import constants as const
from gravent.errors import InvalidCovarianceError, NumericalDomainError

VACUUM_VARIANCE = 0.5

SYMMETRY_RTOL = 1e-12
PHYSICALITY_ATOL = 1e-8
# Relative slack allowed on the discriminant of the closed-form eigenvalue.
DISCRIMINANT_RTOL = 1e-9
# below this relative discriminant the closed form is replaced by an eigen-solve
NEAR_DEGENERATE = 1e-6

OMEGA = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)
_FLIP_PB = np.array([1.0, 1.0, 1.0, -1.0])


@dataclass(frozen=True)
class InitialStateSpec:
    """Squeezed thermal product state ``S rho_th S^dagger`` for each mass.

    ``s > 0`` anti-squeezes position: the position variance is multiplied by
    ``exp(2 s)``.
    """

    nbar: float = 0.0
    s_A: float = 0.0
    s_B: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.nbar) or self.nbar < 0:
            raise ValueError(f"nbar must be finite and >= 0, got {self.nbar}")
        for name in ("s_A", "s_B"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class QuadratureState:
    """First and second moments of ``(X_A, P_A, X_B, P_B)``."""

    mean: np.ndarray
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(4)
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean must be finite")
        cov = as_covariance(self.cov)
        check_physical(cov)
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def as_covariance(V) -> np.ndarray:
    """Validate shape and symmetry, returning a symmetrised read-only copy.

    Raises:
        InvalidCovarianceError: wrong shape, non-finite entries, or an
            asymmetry larger than ``SYMMETRY_RTOL`` relative to the largest
            entry.
    """
    V = np.array(V, dtype=float)
    if V.shape[-2:] != (4, 4):
        raise InvalidCovarianceError(f"expected shape (..., 4, 4), got {V.shape}")
    if not np.all(np.isfinite(V)):
        raise InvalidCovarianceError("covariance has non-finite entries")
    Vt = np.swapaxes(V, -1, -2)
    scale = np.max(np.abs(V), axis=(-2, -1))
    asym = np.max(np.abs(V - Vt), axis=(-2, -1))
    if np.any(asym > SYMMETRY_RTOL * scale):
        raise InvalidCovarianceError(
            f"covariance is not symmetric (max asymmetry {np.max(asym):.3e})"
        )
    V = 0.5 * (V + Vt)
    V.setflags(write=False)
    return V


def thermal_squeezed_covariance(spec: InitialStateSpec) -> np.ndarray:
    """Covariance of a product of single-mode squeezed thermal states."""
    if spec.nbar < 0:
        raise ValueError("nbar must be >= 0")
    v = (2.0 * spec.nbar + 1.0) * VACUUM_VARIANCE
    a, b = spec.s_A, spec.s_B
    return np.diag(
        [v * np.exp(2 * a), v * np.exp(-2 * a), v * np.exp(2 * b), v * np.exp(-2 * b)]
    )


def local_normal_form(V: np.ndarray) -> np.ndarray:
    """Bring each local 2x2 block to a multiple of the identity.

    Applies the local symplectic congruence ``S_A (+) S_B`` that turns each
    diagonal block ``I_j`` into ``sqrt(det I_j) * 1``.  Symplectic spectra and
    entanglement are unchanged, but states whose quadratures have spread by
    many orders of magnitude (released masses) become well conditioned.
    """
    V = np.asarray(V, dtype=float)
    S = np.zeros(V.shape)
    for k in (0, 2):
        a = V[..., k, k]
        b = V[..., k, k + 1]
        c = V[..., k + 1, k + 1]
        d = a * c - b * b
        if np.any(a <= 0) or np.any(d <= 0):
            raise InvalidCovarianceError("local block is not positive definite")
        rd = np.sqrt(d)
        # shear [[1, 0], [-b/a, 1]] then squeeze diag(z, 1/z)
        z = np.sqrt(rd / a)
        S[..., k, k] = z
        S[..., k + 1, k] = -b / (a * z)
        S[..., k + 1, k + 1] = 1.0 / z
    out = S @ V @ np.swapaxes(S, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def _hermitian_spectrum(V: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of positive definite ``V``, ascending, shape ``(..., 2)``.

    ``V^(1/2) (i Omega) V^(1/2)`` is Hermitian with eigenvalues ``+-nu_k``; unlike
    the non-Hermitian ``i Omega V`` it stays well conditioned when the two
    symplectic eigenvalues coincide.
    """
    w, Q = np.linalg.eigh(V)
    if np.any(w <= 0):
        raise InvalidCovarianceError("covariance matrix is not positive definite")
    root = (Q * np.sqrt(w)[..., None, :]) @ np.swapaxes(Q, -1, -2)
    M = root @ (1j * OMEGA) @ root
    return np.linalg.eigvalsh(M)[..., 2:]


def symplectic_eigenvalues(V) -> tuple[float, float] | np.ndarray:
    """Symplectic eigenvalues ``(nu_1, nu_2)`` in ascending order.

    Equal to the moduli of the eigenvalues of ``i Omega V``; evaluated through
    an equivalent Hermitian eigenproblem after the local normal-form
    congruence.  For a stack input the result has shape ``(..., 2)``.
    """
    nu = _hermitian_spectrum(local_normal_form(as_covariance(V)))
    if nu.ndim == 1:
        return float(nu[0]), float(nu[1])
    return nu


def partial_transpose_B(V) -> np.ndarray:
    """Partial transposition on mode B: flip the sign of ``P_B``."""
    V = as_covariance(V)
    return V * _FLIP_PB[:, None] * _FLIP_PB[None, :]


def _blocks_dets(V: np.ndarray):
    det_a = V[..., 0, 0] * V[..., 1, 1] - V[..., 0, 1] * V[..., 1, 0]
    det_b = V[..., 2, 2] * V[..., 3, 3] - V[..., 2, 3] * V[..., 3, 2]
    det_l = V[..., 0, 2] * V[..., 1, 3] - V[..., 0, 3] * V[..., 1, 2]
    return det_a, det_b, det_l


def min_ptranspose_symplectic_eigenvalue(V):
    """Smallest symplectic eigenvalue of the B-partially-transposed state.

    Uses ``nu~_min^2 = (Sigma - sqrt(Sigma^2 - 4 det V)) / 2`` with
    ``Sigma = det I_A + det I_B - 2 det L`` (blocks of the untransposed V),
    rewritten as ``2 det V / (Sigma + sqrt(...))`` to avoid cancellation when
    the state is strongly entangled.  Where the two roots nearly coincide
    the square root of the discriminant would amplify round-off to
    ``sqrt(eps)``; those entries come from the Hermitian eigen-solve instead.

    Raises:
        NumericalDomainError: the discriminant is negative beyond round-off.
    """
    V = local_normal_form(as_covariance(V))
    det_a, det_b, det_l = _blocks_dets(V)
    sigma = det_a + det_b - 2.0 * det_l
    det_v = np.linalg.det(V)
    disc = sigma * sigma - 4.0 * det_v
    if np.any(disc < -DISCRIMINANT_RTOL * sigma * sigma) or np.any(sigma <= 0):
        raise NumericalDomainError(
            f"negative discriminant in closed-form eigenvalue (min {np.min(disc):.3e})"
        )
    disc = np.maximum(disc, 0.0)
    nu_sq = 2.0 * det_v / (sigma + np.sqrt(disc))
    if np.any(nu_sq < 0):
        raise NumericalDomainError("det V is negative")
    nu = np.sqrt(nu_sq)
    near = disc < NEAR_DEGENERATE * sigma * sigma
    if np.any(near):
        Vt = V * _FLIP_PB[:, None] * _FLIP_PB[None, :]
        nu = np.where(near, _hermitian_spectrum(Vt)[..., 0], nu)
    return float(nu) if np.ndim(nu) == 0 else nu


def ptranspose_eigenvalue_eigensolver(V):
    """Eigen-solver route to the same quantity, kept as a cross-check."""
    nu = symplectic_eigenvalues(partial_transpose_B(V))
    return nu[0] if isinstance(nu, tuple) else nu[..., 0]


def is_physical(V, atol: float = PHYSICALITY_ATOL) -> bool | np.ndarray:
    """True if both symplectic eigenvalues are >= 1/2 - atol."""
    try:
        nu = symplectic_eigenvalues(V)
    except InvalidCovarianceError:
        return False
    nu_min = nu[0] if isinstance(nu, tuple) else nu[..., 0]
    return nu_min >= VACUUM_VARIANCE - atol


def check_physical(V, atol: float = PHYSICALITY_ATOL) -> None:
    if not np.all(is_physical(V, atol)):
        raise InvalidCovarianceError(
            "covariance violates the uncertainty principle "
            "(symplectic eigenvalue below 1/2)"
        )


def log_negativity(V, check: bool = True):
    """Logarithmic negativity ``max(0, -log2(2 nu~_min))``.

    Args:
        V: covariance matrix or stack of them.
        check: reject unphysical input first.
    """
    if check:
        check_physical(V)
    E = negativity_from_nu(min_ptranspose_symplectic_eigenvalue(V), V)
    return float(E) if np.ndim(E) == 0 else E


def negativity_from_nu(nu, V) -> np.ndarray:
    """``max(0, -log2(2 nu))``, exactly 0 for product states.

    A vanishing off-diagonal block means the state is separable whatever
    round-off did to ``nu``.
    """
    with np.errstate(invalid="ignore"):
        E = np.maximum(0.0, -np.log2(2.0 * np.asarray(nu, dtype=float))) + 0.0
    product = np.all(np.asarray(V)[..., :2, 2:] == 0, axis=(-2, -1))
    return np.where(product & ~np.isnan(E), 0.0, E)


def width_meters(V, mode: Literal["A", "B"], m: float, omega: float):
    """Position standard deviation of one mass in metres.

    ``dx = sqrt(hbar / (m omega)) * sqrt(V_XX)``.
    """
    if m <= 0 or omega <= 0:
        raise ValueError("mass and omega must be positive")
    idx = {"A": 0, "B": 2}.get(mode)
    if idx is None:
        raise ValueError(f"mode must be 'A' or 'B', got {mode!r}")
    V = np.asarray(V, dtype=float)
    w = np.sqrt(const.HBAR / (m * omega)) * np.sqrt(V[..., idx, idx])
    return float(w) if np.ndim(w) == 0 else w


def quadrature_to_position(X, m: float, omega: float):
    """Convert a dimensionless position quadrature to metres."""
    return np.sqrt(const.HBAR / (m * omega)) * np.asarray(X)
