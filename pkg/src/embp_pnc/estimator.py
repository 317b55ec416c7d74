"""Channel estimation by Gaussian message passing on the Gauss-Markov chain.

Messages are kept in information form ``(W, xi)``. At pilot positions the
EM message has a rank-1 precision, so its moment form does not exist; the
information form handles that without any regularisation. Prediction steps
need a moment form of the filtered belief, which always exists because the
prior precision is full rank.

Array conventions: ``W`` is ``(L, 2, 2)`` and ``xi`` is ``(L, 2)`` for the
joint channel; the SAGE (one user) versions use ``(L,)`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .numerics import GaussianBelief, SingularSystemError, cmat2_hermitian_solve, is_hermitian_psd
from .txchain import Constellation, FrameLayout, get_constellation


@dataclass
class ChannelEstimate:
    """Per-position channel estimate; ``cov`` is the smoothed covariance."""

    mean: np.ndarray
    cov: np.ndarray | None = None
    iteration: int = 0


def prior_covariance(var_A: float = 1.0, var_B: float = 1.0) -> np.ndarray:
    return np.diag([var_A, var_B]).astype(complex)


# ---------------------------------------------------------------------------
# MMSE pilot initialisation

def nearest_pilot_block(layout: FrameLayout) -> np.ndarray:
    """Index of the pilot pair closest to each position (ties to the earlier)."""
    pilots = np.flatnonzero(layout.is_pilot)
    pos = np.arange(layout.total_len)
    j = np.clip(np.searchsorted(pilots, pos), 1, len(pilots) - 1) if len(pilots) > 1 else np.zeros_like(pos)
    if len(pilots) > 1:
        left, right = pilots[j - 1], pilots[j]
        nearest = np.where(pos - left <= right - pos, left, right)
    else:
        nearest = pilots[j]
    return layout.block_of[nearest]


def mmse_pilot_init(y, layout: FrameLayout, Q, N0: float) -> ChannelEstimate:
    """Linear MMSE estimate from each block's two pilots.

    Every position takes the estimate of the closest pilot pair, so the second
    half of a block uses the next block's pilots.
    """
    y = np.asarray(y)
    Q = np.asarray(Q, dtype=complex)
    Xp = layout.pilot_matrix
    if abs(np.linalg.det(Xp)) < 1e-12:
        raise SingularSystemError("singular pilot matrix")
    yp = y[layout.pilot_index]  # (n_blocks, 2)
    gain = Q @ Xp.conj().T @ np.linalg.inv(Xp @ Q @ Xp.conj().T + N0 * np.eye(2))
    h_blocks = yp @ gain.T
    return ChannelEstimate(h_blocks[nearest_pilot_block(layout)], iteration=0)


# ---------------------------------------------------------------------------
# EM messages

def em_messages(pair_app, y, N0: float, modulation="bpsk"):
    """Canonical EM messages for every position.

    ``W_i = E[x_i^* x_i^T] / N0`` and ``xi_i = E[x_i^*] y_i / N0`` under the
    pair APP. This is ``exp(Q_i(h))`` with ``Q_i`` the expected log-likelihood.
    """
    const = get_constellation(modulation)
    P = np.asarray(pair_app, dtype=float)
    X = const.pair_points
    W = np.einsum("ls,sa,sb->lab", P, X.conj(), X) / N0
    xi = (P @ X.conj()) * np.asarray(y)[:, None] / N0
    return W, xi


def em_message(pair_app, y_i: complex, N0: float, modulation="bpsk") -> GaussianBelief:
    W, xi = em_messages(np.asarray(pair_app, dtype=float)[None, :], np.array([y_i]), N0, modulation)
    return GaussianBelief(xi[0], W[0])


def sage_em_messages(pair_app, y, h_other, N0: float, target: str, modulation="bpsk"):
    """Scalar EM messages for one user's channel, the other channel fixed.

    Returns ``(W, xi)`` with ``W = E|x_t|^2 / N0`` and
    ``xi = (E[x_t^*] y - E[x_t^* x_o] h_o) / N0``, so the mean is
    ``(E[x_t^*] y - E[x_t^* x_o] h_o) / E|x_t|^2`` and the variance
    ``N0 / E|x_t|^2``.
    """
    const = get_constellation(modulation)
    M = const.size
    P = np.asarray(pair_app, dtype=float).reshape(-1, M, M)
    if target == "B":
        P = P.transpose(0, 2, 1)
    elif target != "A":
        raise ValueError("target must be 'A' or 'B'")
    pts = const.points
    m_conj = P.sum(axis=2) @ pts.conj()
    m_cross = np.einsum("lab,a,b->l", P, pts.conj(), pts)
    energy = P.sum(axis=2) @ np.abs(pts) ** 2
    W = energy / N0
    xi = (m_conj * np.asarray(y) - m_cross * np.asarray(h_other)) / N0
    return W, xi


def sage_em_message(pair_app, y_i, h_other_i, N0, target, modulation="bpsk") -> GaussianBelief:
    W, xi = sage_em_messages(np.asarray(pair_app, dtype=float)[None, :], np.array([y_i]),
                             np.array([h_other_i]), N0, target, modulation)
    return GaussianBelief(xi, W.reshape(1, 1))


def frame_em_messages(data_app, y, N0: float, layout: FrameLayout, modulation="bpsk"):
    """EM messages for a whole frame: data rows from the pair APPs, pilot
    rows from the known pilot symbols (a point-mass APP)."""
    y = np.asarray(y)
    W = np.empty((layout.total_len, 2, 2), complex)
    xi = np.empty((layout.total_len, 2), complex)
    d, p = layout.data_index, layout.is_pilot
    W[d], xi[d] = em_messages(data_app, y[d], N0, modulation)
    X = layout.pilot_symbols[p]
    W[p] = X.conj()[:, :, None] * X[:, None, :] / N0
    xi[p] = X.conj() * y[p, None] / N0
    return W, xi


def frame_sage_em_messages(data_app, y, h_other, N0: float, target: str, layout: FrameLayout,
                           modulation="bpsk"):
    """Scalar counterpart of :func:`frame_em_messages`."""
    y, h_other = np.asarray(y), np.asarray(h_other)
    W = np.empty(layout.total_len)
    xi = np.empty(layout.total_len, complex)
    d, p = layout.data_index, layout.is_pilot
    W[d], xi[d] = sage_em_messages(data_app, y[d], h_other[d], N0, target, modulation)
    X = layout.pilot_symbols[p]
    t, o = (X[:, 0], X[:, 1]) if target == "A" else (X[:, 1], X[:, 0])
    W[p] = np.abs(t) ** 2 / N0
    xi[p] = (t.conj() * y[p] - t.conj() * o * h_other[p]) / N0
    return W, xi


# ---------------------------------------------------------------------------
# numba kernels

# 2x2 Hermitian matrices travel as (a, b, d) = [[a, b], [conj(b), d]] with
# a, d real, so the kernels never allocate inside the loops.

@njit(cache=True)
def _hinv(a, b, d):
    det = a * d - (b.real * b.real + b.imag * b.imag)
    return d / det, -b / det, a / det


@njit(cache=True)
def _hmv(a, b, d, v0, v1):
    return a * v0 + b * v1, np.conj(b) * v0 + d * v1


@njit(cache=True)
def _forward2(W, xi, alpha, Q):
    L = W.shape[0]
    Wf = np.zeros((L, 2, 2), np.complex128)
    xif = np.zeros((L, 2), np.complex128)
    qa, qb, qd = Q[0, 0].real, Q[0, 1], Q[1, 1].real
    fa, fb, fd = _hinv(qa, qb, qd)
    ra, rb, rd = (1 - alpha * alpha) * qa, (1 - alpha * alpha) * qb, (1 - alpha * alpha) * qd
    x0 = 0j
    x1 = 0j
    for i in range(L):
        Wf[i, 0, 0] = fa
        Wf[i, 0, 1] = fb
        Wf[i, 1, 0] = np.conj(fb)
        Wf[i, 1, 1] = fd
        xif[i, 0] = x0
        xif[i, 1] = x1
        if i == L - 1:
            break
        # measurement update, then back to moments for the AR(1) step
        ka, kb, kd = _hinv(fa + W[i, 0, 0].real, fb + 0.5 * (W[i, 0, 1] + np.conj(W[i, 1, 0])),
                           fd + W[i, 1, 1].real)
        m0, m1 = _hmv(ka, kb, kd, x0 + xi[i, 0], x1 + xi[i, 1])
        fa, fb, fd = _hinv(alpha * alpha * ka + ra, alpha * alpha * kb + rb, alpha * alpha * kd + rd)
        x0, x1 = _hmv(fa, fb, fd, alpha * m0, alpha * m1)
    return Wf, xif


@njit(cache=True)
def _backward2(W, xi, alpha, Q):
    L = W.shape[0]
    Wb = np.zeros((L, 2, 2), np.complex128)
    xib = np.zeros((L, 2), np.complex128)
    c = 1 - alpha * alpha
    ra, rb, rd = c * Q[0, 0].real, c * Q[0, 1], c * Q[1, 1].real
    ba, bb, bd = 0.0, 0j, 0.0
    x0 = 0j
    x1 = 0j
    for i in range(L - 2, -1, -1):
        # belief on h_{i+1} from everything after i, pushed back through
        # h_{i+1} = alpha h_i + noise(R): W' = alpha^2 (I + Wn R)^-1 Wn
        na = ba + W[i + 1, 0, 0].real
        nb = bb + 0.5 * (W[i + 1, 0, 1] + np.conj(W[i + 1, 1, 0]))
        nd = bd + W[i + 1, 1, 1].real
        v0 = x0 + xi[i + 1, 0]
        v1 = x1 + xi[i + 1, 1]
        # T = I + Wn R (not Hermitian in general)
        t00 = 1 + na * ra + nb * np.conj(rb)
        t01 = na * rb + nb * rd
        t10 = np.conj(nb) * ra + nd * np.conj(rb)
        t11 = 1 + np.conj(nb) * rb + nd * rd
        det = t00 * t11 - t01 * t10
        i00, i01, i10, i11 = t11 / det, -t01 / det, -t10 / det, t00 / det
        a2 = alpha * alpha
        ba = (a2 * (i00 * na + i01 * np.conj(nb))).real
        bb = a2 * 0.5 * ((i00 * nb + i01 * nd) + np.conj(i10 * na + i11 * np.conj(nb)))
        bd = (a2 * (i10 * nb + i11 * nd)).real
        x0 = alpha * (i00 * v0 + i01 * v1)
        x1 = alpha * (i10 * v0 + i11 * v1)
        Wb[i, 0, 0] = ba
        Wb[i, 0, 1] = bb
        Wb[i, 1, 0] = np.conj(bb)
        Wb[i, 1, 1] = bd
        xib[i, 0] = x0
        xib[i, 1] = x1
    return Wb, xib


@njit(cache=True)
def _combine2(Wf, xif, W, xi, Wb, xib):
    L = W.shape[0]
    mean = np.empty((L, 2), np.complex128)
    cov = np.empty((L, 2, 2), np.complex128)
    for i in range(L):
        a = (Wf[i, 0, 0] + W[i, 0, 0] + Wb[i, 0, 0]).real
        b = 0.5 * (Wf[i, 0, 1] + W[i, 0, 1] + Wb[i, 0, 1]
                   + np.conj(Wf[i, 1, 0] + W[i, 1, 0] + Wb[i, 1, 0]))
        d = (Wf[i, 1, 1] + W[i, 1, 1] + Wb[i, 1, 1]).real
        ka, kb, kd = _hinv(a, b, d)
        cov[i, 0, 0] = ka
        cov[i, 0, 1] = kb
        cov[i, 1, 0] = np.conj(kb)
        cov[i, 1, 1] = kd
        m0, m1 = _hmv(ka, kb, kd, xif[i, 0] + xi[i, 0] + xib[i, 0], xif[i, 1] + xi[i, 1] + xib[i, 1])
        mean[i, 0] = m0
        mean[i, 1] = m1
    return mean, cov


@njit(cache=True)
def _forward1(W, xi, alpha, var):
    L = W.shape[0]
    Wf = np.empty(L)
    xif = np.zeros(L, np.complex128)
    Wf[0] = 1.0 / var
    r = (1.0 - alpha * alpha) * var
    for i in range(L - 1):
        k = 1.0 / (Wf[i] + W[i])
        m = k * (xif[i] + xi[i])
        Wf[i + 1] = 1.0 / (alpha * alpha * k + r)
        xif[i + 1] = Wf[i + 1] * alpha * m
    return Wf, xif


@njit(cache=True)
def _backward1(W, xi, alpha, var):
    L = W.shape[0]
    Wb = np.zeros(L)
    xib = np.zeros(L, np.complex128)
    r = (1.0 - alpha * alpha) * var
    for i in range(L - 2, -1, -1):
        wn = Wb[i + 1] + W[i + 1]
        t = 1.0 / (1.0 + wn * r)
        Wb[i] = alpha * alpha * t * wn
        xib[i] = alpha * t * (xib[i + 1] + xi[i + 1])
    return Wb, xib


# ---------------------------------------------------------------------------
# sweeps

def _check_inputs(W, xi, alpha, Q):
    W = np.ascontiguousarray(W, dtype=np.complex128)
    xi = np.ascontiguousarray(xi, dtype=np.complex128)
    Q = np.ascontiguousarray(Q, dtype=np.complex128)
    if W.ndim != 3 or W.shape[1:] != (2, 2) or xi.shape != W.shape[:2]:
        raise ValueError("expected W of shape (L, 2, 2) and xi of shape (L, 2)")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not is_hermitian_psd(Q) or abs(np.linalg.det(Q)) == 0:
        raise ValueError("Q must be Hermitian positive definite")
    return W, xi, float(alpha), Q


def forward_sweep(W, xi, alpha: float, Q):
    """Predictive (forward) messages into each ``h_i`` from everything before it.

    Entry 0 is the prior ``CN(0, Q)``. Returns ``(W_f, xi_f)``.
    """
    return _forward2(*_check_inputs(W, xi, alpha, Q))


def backward_sweep(W, xi, alpha: float, Q):
    """Messages into each ``h_i`` from everything after it; entry ``L-1`` is flat."""
    return _backward2(*_check_inputs(W, xi, alpha, Q))


def combine_estimate(forward, backward, em, i: int) -> np.ndarray:
    """Mean of forward x EM x backward at position ``i``."""
    (Wf, xif), (Wb, xib), (W, xi) = forward, backward, em
    Wt = Wf[i] + W[i] + Wb[i]
    try:
        return cmat2_hermitian_solve(Wt, xif[i] + xi[i] + xib[i])
    except SingularSystemError as err:
        raise SingularSystemError("unidentifiable position", err.condition) from None


def smooth(W, xi, alpha: float, Q, iteration: int = 0) -> ChannelEstimate:
    """Forward sweep, backward sweep and per-position combination."""
    W, xi, alpha, Q = _check_inputs(W, xi, alpha, Q)
    Wf, xif = _forward2(W, xi, alpha, Q)
    Wb, xib = _backward2(W, xi, alpha, Q)
    mean, cov = _combine2(Wf, xif, W, xi, Wb, xib)
    if not np.all(np.isfinite(mean)):
        raise SingularSystemError("unidentifiable position")
    return ChannelEstimate(mean, cov, iteration)


def sage_sweep(W, xi, alpha: float, var: float, iteration: int = 0) -> ChannelEstimate:
    """Scalar smoother for one user's channel."""
    W = np.ascontiguousarray(W, dtype=float)
    xi = np.ascontiguousarray(xi, dtype=np.complex128)
    if W.shape != xi.shape or W.ndim != 1:
        raise ValueError("expected matching 1-d W and xi")
    if not 0 < alpha <= 1 or var <= 0:
        raise ValueError("need 0 < alpha <= 1 and var > 0")
    Wf, xif = _forward1(W, xi, float(alpha), float(var))
    Wb, xib = _backward1(W, xi, float(alpha), float(var))
    Wt = Wf + W + Wb
    return ChannelEstimate((xif + xi + xib) / Wt, 1.0 / Wt, iteration)
