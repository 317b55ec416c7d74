"""Small complex linear algebra and Gaussian beliefs in information form.

Everything here is restricted to dimension 1 or 2, which is all the two-user
channel state needs. Beliefs are stored as ``(xi, W)`` with ``W`` the
precision matrix and ``xi = W @ mean``; a flat (uninformative) belief has
``W = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

SOLVE_RESIDUAL_TOL = 1e-10
ROUND_TRIP_TOL = 1e-12
PSD_TOL = 1e-10
SINGULAR_DET_TOL = 1e-14


class SingularSystemError(ValueError):
    """Raised when a 2x2 system or covariance cannot be inverted reliably."""

    def __init__(self, message: str, condition: float = np.inf):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


def _as_matrix(a, dim: int | None = None) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if a.shape[0] != a.shape[1] or a.shape[0] not in (1, 2):
        raise ValueError(f"expected a 1x1 or 2x2 matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {dim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _as_vector(v, dim: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=complex)).reshape(-1)
    if v.shape != (dim,):
        raise ValueError(f"expected vector of length {dim}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def _det_and_scale(a: np.ndarray) -> tuple[complex, float]:
    if a.shape[0] == 1:
        return a[0, 0], float(abs(a[0, 0]))
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return det, float(np.max(np.abs(a)))


def _condition(a: np.ndarray) -> float:
    s = np.linalg.svd(a, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf


def is_hermitian_psd(a, tol: float = PSD_TOL) -> bool:
    a = _as_matrix(a)
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > tol * scale:
        return False
    return bool(np.min(np.linalg.eigvalsh(a)) >= -tol * scale)


def cmat2_inv(a) -> np.ndarray:
    """Closed-form inverse of a 1x1 or 2x2 complex matrix."""
    a = _as_matrix(a)
    det, scale = _det_and_scale(a)
    if scale == 0 or abs(det) <= SINGULAR_DET_TOL * scale ** a.shape[0]:
        raise SingularSystemError("singular system", _condition(a))
    if a.shape[0] == 1:
        return np.array([[1.0 / a[0, 0]]])
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det


def cmat2_hermitian_solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for Hermitian PSD ``a`` of size 1 or 2.

    Raises
    ------
    SingularSystemError
        If ``|det(a)|`` is below ``1e-14`` times the entry scale, or the
        residual of the closed-form solution exceeds the solve tolerance.
    """
    a = _as_matrix(a)
    b = _as_vector(b, a.shape[0])
    x = cmat2_inv(a) @ b
    resid = np.linalg.norm(a @ x - b)
    ref = np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(b)
    if ref > 0 and resid > SOLVE_RESIDUAL_TOL * ref:
        raise SingularSystemError("singular system", _condition(a))
    return x


@dataclass(frozen=True)
class GaussianBelief:
    """Complex Gaussian over a 1- or 2-vector in canonical form.

    ``W`` may be singular: that encodes directions the belief says nothing
    about. Only nonsingular beliefs have a moment form.
    """

    xi: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        W = _as_matrix(self.W)
        xi = _as_vector(self.xi, W.shape[0])
        if not is_hermitian_psd(W):
            raise ValueError("precision matrix must be Hermitian PSD")
        W = 0.5 * (W + W.conj().T)
        W.setflags(write=False)
        xi.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "xi", xi)

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @classmethod
    def flat(cls, dim: int) -> "GaussianBelief":
        return cls(np.zeros(dim, complex), np.zeros((dim, dim), complex))

    @classmethod
    def from_moments(cls, m, K) -> "GaussianBelief":
        return belief_from_moments(m, K)

    def to_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(mean, covariance)``; requires a nonsingular precision."""
        try:
            K = cmat2_inv(self.W)
        except SingularSystemError as err:
            raise SingularSystemError("non-invertible precision", err.condition) from None
        K = 0.5 * (K + K.conj().T)
        return K @ self.xi, K

    @property
    def mean(self) -> np.ndarray:
        return self.to_moments()[0]

    def __mul__(self, other: "GaussianBelief") -> "GaussianBelief":
        return belief_product(self, other)


def belief_from_moments(m, K) -> GaussianBelief:
    K = _as_matrix(K)
    m = _as_vector(m, K.shape[0])
    if not is_hermitian_psd(K):
        raise ValueError("covariance must be Hermitian PSD")
    try:
        W = cmat2_inv(K)
    except SingularSystemError as err:
        raise SingularSystemError("non-invertible covariance", err.condition) from None
    W = 0.5 * (W + W.conj().T)
    return GaussianBelief(W @ m, W)


def belief_product(a: GaussianBelief, b: GaussianBelief) -> GaussianBelief:
    """Product of two Gaussian densities, normalisation dropped."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return GaussianBelief(a.xi + b.xi, a.W + b.W)


# Closed-form kernels for the hot loops. Plain complex scalars in and out so
# numba keeps everything in registers.

@njit(cache=True)
def herm2_inv(a00, a01, a11):
    """Inverse of the Hermitian matrix [[a00, a01], [conj(a01), a11]]."""
    det = (a00 * a11 - a01 * np.conj(a01)).real
    return a11 / det, -a01 / det, a00 / det


@njit(cache=True)
def herm2_matvec(a00, a01, a11, v0, v1):
    return a00 * v0 + a01 * v1, np.conj(a01) * v0 + a11 * v1
