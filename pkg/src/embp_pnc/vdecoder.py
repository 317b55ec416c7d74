"""Sum-product decoding of the RA code over clustered symbol pairs.

The virtual decoder treats the two same-code transmissions as one code over
bit pairs ``(c_A, c_B)``. A check node constrains the A bits and the B bits
by XOR independently, so the pair-alphabet check convolution is an XOR
convolution on Z2 x Z2, i.e. over 2-bit states combined by ``s ^ t``.
All messages live in the log domain. The same machinery with one user gives the single-user decoder
used by the PIC and SIC receivers.

Table conventions
-----------------
* bit-tuple state ``s = 2*a + b`` for a pair ``(a, b)``; single user ``s = a``.
* pair symbol index ``a_sym * M + b_sym`` (see ``Constellation.pair_points``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .txchain import CodeConfig, Constellation, FrameLayout, get_constellation

FLOOR = 1e-300
SIMPLEX_TOL = 1e-9


def normalize(p: np.ndarray) -> np.ndarray:
    """Rows to the simplex, with a floor so later products never vanish.

    Rows that underflow completely (contradictory inputs) become uniform.
    """
    p = np.maximum(p, 0.0)
    s = p.sum(axis=-1, keepdims=True)
    bad = ~(s > 0)
    if np.any(bad):
        p = np.where(bad, 1.0, p)
        s = p.sum(axis=-1, keepdims=True)
    return np.maximum(p / s, FLOOR)


def _logits_to_probs(logits: np.ndarray) -> np.ndarray:
    logits = logits - logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=-1, keepdims=True)


def init_symbol_loglik(y, h_hat, N0: float, layout: FrameLayout, modulation="bpsk") -> np.ndarray:
    """Log of :func:`init_symbol_likelihoods`, up to a per-row constant.

    Pilot rows are 0 on the pilot pair and ``-inf`` elsewhere (all ``-inf``
    when the pilots are not constellation points). Feed this to
    the decoder with ``log_domain=True`` to avoid underflow at high SNR.
    """
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    const = get_constellation(modulation)
    y = np.asarray(y)
    h_hat = np.asarray(h_hat)
    if y.shape != (layout.total_len,) or h_hat.shape != (layout.total_len, 2):
        raise ValueError("y and h_hat must cover the whole frame")
    ll = -np.abs(y[:, None] - h_hat @ const.pair_points.T) ** 2 / N0
    ll -= ll.max(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        ll[layout.is_pilot] = np.log(pilot_pair_tables(layout, const)[layout.is_pilot])
    return ll


def init_symbol_likelihoods(y, h_hat, N0: float, layout: FrameLayout, modulation="bpsk") -> np.ndarray:
    """Per-position normalised likelihood tables over the pair alphabet.

    Data rows are proportional to ``exp(-|y_i - h_i^T x|^2 / N0)``; pilot rows
    are point masses on the known pilot pair, or zero when the pilot symbols
    are not constellation points. Only data rows ever reach the decoder.
    """
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    const = get_constellation(modulation)
    y = np.asarray(y)
    h_hat = np.asarray(h_hat)
    if y.shape != (layout.total_len,) or h_hat.shape != (layout.total_len, 2):
        raise ValueError("y and h_hat must cover the whole frame")
    X = const.pair_points
    resid = y[:, None] - h_hat @ X.T
    lik = _logits_to_probs(-np.abs(resid) ** 2 / N0)
    lik[layout.is_pilot] = pilot_pair_tables(layout, const)[layout.is_pilot]
    return lik


def pilot_pair_tables(layout: FrameLayout, const: Constellation) -> np.ndarray:
    """Point-mass tables at pilot positions, zero rows elsewhere.

    Pilots outside the constellation (the BPSK-valued pilots of a QPSK frame)
    have no entry in the pair alphabet, so their rows stay zero.
    """
    M = const.size
    tab = np.zeros((layout.total_len, M * M))
    for slot in range(2):
        try:
            pa = const.index_of(layout.pilot_values["A"][slot])
            pb = const.index_of(layout.pilot_values["B"][slot])
        except ValueError:
            continue
        tab[layout.pilot_index[:, slot], pa * M + pb] = 1.0
    return tab


def single_user_loglik(y_eff, h, noise_var, modulation="bpsk") -> np.ndarray:
    """Log tables over one user's symbols for ``y_eff = h x + noise``."""
    const = get_constellation(modulation)
    resid = np.asarray(y_eff)[:, None] - np.asarray(h)[:, None] * const.points[None, :]
    ll = -np.abs(resid) ** 2 / np.asarray(noise_var)[..., None]
    return ll - ll.max(axis=-1, keepdims=True)


def single_user_likelihoods(y_eff, h, noise_var, modulation="bpsk") -> np.ndarray:
    """Tables over one user's symbols for ``y_eff = h x + noise``."""
    return _logits_to_probs(single_user_loglik(y_eff, h, noise_var, modulation))


@dataclass
class DecodeResult:
    """Outputs of one decoder run.

    symbol_app, extrinsic : (l, M**U)  APP and extrinsic per data symbol
    bit_app : (k, 2**U)  APP of the info-bit tuple
    coded_app : (n, 2**U)  APP of the coded-bit tuple
    """

    symbol_app: np.ndarray
    extrinsic: np.ndarray
    bit_app: np.ndarray
    coded_app: np.ndarray
    iterations: int
    log_extrinsic: np.ndarray | None = None


@njit(cache=True)
def _lse_normalize(row):
    """Shift a log table so its max is 0; an all ``-inf`` row becomes flat."""
    m = -np.inf
    for v in row:
        if v > m:
            m = v
    if m == -np.inf:
        row[:] = 0.0
    else:
        row -= m


@njit(cache=True)
def _xor_conv(a, b, out):
    """``out[s] = log sum_x exp(a[x] + b[s ^ x])`` over bit-tuple states."""
    S = a.shape[0]
    for s in range(S):
        m = -np.inf
        for x in range(S):
            v = a[x] + b[s ^ x]
            if v > m:
                m = v
        if m == -np.inf:
            out[s] = -np.inf
            continue
        acc = 0.0
        for x in range(S):
            acc += np.exp(a[x] + b[s ^ x] - m)
        out[s] = m + np.log(acc)
    _lse_normalize(out)


@njit(cache=True)
def _lse_pair(lik_ss, i, s, e, transpose):
    S = e.shape[0]
    m = -np.inf
    for t in range(S):
        v = (lik_ss[i, t, s] if transpose else lik_ss[i, s, t]) + e[t]
        if v > m:
            m = v
    if m == -np.inf:
        return -np.inf
    acc = 0.0
    for t in range(S):
        acc += np.exp((lik_ss[i, t, s] if transpose else lik_ss[i, s, t]) + e[t] - m)
    return m + np.log(acc)


@njit(cache=True)
def _symbol_to_coded(lik_ss, ext, q, out):
    """Log message from each symbol node to its coded bits."""
    n, S = out.shape
    if q == 1:
        for t in range(n):
            for s in range(S):
                out[t, s] = lik_ss[t, s, 0]
            _lse_normalize(out[t])
        return
    for i in range(n // 2):
        # each bit sees the symbol table marginalised against the other bit's extrinsic
        for s in range(S):
            out[2 * i, s] = _lse_pair(lik_ss, i, s, ext[2 * i + 1], False)
            out[2 * i + 1, s] = _lse_pair(lik_ss, i, s, ext[2 * i], True)
        _lse_normalize(out[2 * i])
        _lse_normalize(out[2 * i + 1])


@njit(cache=True)
def _coded_extrinsic(chk_to_c, chk_to_prev, out):
    n, S = out.shape
    for t in range(n):
        for s in range(S):
            out[t, s] = chk_to_c[t, s] + (chk_to_prev[t + 1, s] if t + 1 < n else 0.0)
        _lse_normalize(out[t])


@njit(cache=True)
def _flood(lik_ss, q, edges, u_of_check, chk_to_c, chk_to_prev, chk_to_u, n_iters):
    n, S = chk_to_c.shape
    k, r = edges.shape
    ext = np.empty((n, S))
    chan = np.empty((n, S))
    c_left = np.empty((n, S))
    c_right = np.empty((n + 1, S))
    u_msgs = np.empty((n, S))
    u_total = np.empty((k, S))
    # row 0 of c_right stands for the accumulator's known initial state 0
    c_right[0, :] = -np.inf
    c_right[0, 0] = 0.0
    for _ in range(n_iters):
        _coded_extrinsic(chk_to_c, chk_to_prev, ext)
        _symbol_to_coded(lik_ss, ext, q, chan)
        # variables -> checks
        for t in range(n):
            for s in range(S):
                c_left[t, s] = chan[t, s] + (chk_to_prev[t + 1, s] if t + 1 < n else 0.0)
                c_right[t + 1, s] = chan[t, s] + chk_to_c[t, s]
            _lse_normalize(c_left[t])
            _lse_normalize(c_right[t + 1])
        u_total[:] = 0.0
        for j in range(k):
            for e in range(r):
                for s in range(S):
                    u_total[j, s] += chk_to_u[edges[j, e], s]
        for t in range(n):
            for s in range(S):
                u_msgs[t, s] = u_total[u_of_check[t], s] - chk_to_u[t, s]
            _lse_normalize(u_msgs[t])
        # checks -> variables; check t enforces v_t ^ c_{t-1} ^ c_t = 0
        for t in range(n):
            _xor_conv(c_left[t], c_right[t], chk_to_u[t])
            _xor_conv(u_msgs[t], c_right[t], chk_to_c[t])
            if t > 0:
                _xor_conv(u_msgs[t], c_left[t], chk_to_prev[t])


def _to_probs(logp: np.ndarray) -> np.ndarray:
    return normalize(np.exp(logp - logp.max(axis=-1, keepdims=True)))


def _log(p) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(p, dtype=float))


class RADecoder:
    """Flooding sum-product decoder on the Tanner graph of a regular RA code.

    Check ``t`` ties ``v_t`` (the interleaved copy of an info bit), ``c_{t-1}``
    and ``c_t``. Messages are log tables shifted to a zero maximum, so
    confident but conflicting evidence is compared exactly instead of being
    clipped. The decoder object is the reusable message workspace: call
    :meth:`reset` then :meth:`run`, or :meth:`run` again to keep iterating
    from the current messages with fresh channel likelihoods.
    """

    def __init__(self, code: CodeConfig, modulation="bpsk", n_users: int = 2):
        if n_users not in (1, 2):
            raise ValueError("n_users must be 1 or 2")
        self.code = code
        self.const = get_constellation(modulation)
        self.n_users = n_users
        self.S = 2 ** n_users
        self.q = self.const.bits_per_symbol
        self.n = code.coded_len
        self.k = code.info_len
        if self.n % self.q:
            raise ValueError("coded length is not a whole number of symbols")
        if self.q > 2:
            raise ValueError("only 1 or 2 bits per symbol are supported")
        self.l = self.n // self.q

        self.u_of_check = (code.permutation // code.repetition).astype(np.int64)
        self.edges = np.argsort(self.u_of_check, kind="stable").reshape(self.k, code.repetition)

        M, U = self.const.size, n_users
        sigma = np.arange(M ** U)
        syms = [(sigma // M ** (U - 1 - u)) % M for u in range(U)]
        states = np.zeros((M ** U, self.q), dtype=np.int64)
        for u, sym in enumerate(syms):
            states += self.const.labels[sym].astype(np.int64) << (U - 1 - u)
        self.bit_states = states  # bit_states[sigma, j] = state of bit j
        if self.q > 1:
            ss = states[:, 0] * self.S + states[:, 1]
            self.ss_to_sigma = np.argsort(ss)
            self.sigma_to_ss = ss
        self.reset()

    def reset(self):
        """Flat messages (log 0 everywhere)."""
        shape = (self.n, self.S)
        self.chk_to_c = np.zeros(shape)       # check t -> c_t
        self.chk_to_prev = np.zeros(shape)    # check t -> c_{t-1}; row 0 unused
        self.chk_to_u = np.zeros(shape)       # check t -> its info bit
        self.iterations = 0

    def _log_tables(self, likelihoods, log_domain):
        tab = np.asarray(likelihoods, dtype=float)
        width = self.const.size ** self.n_users
        if tab.shape != (self.l, width):
            raise ValueError(f"likelihoods must have shape {(self.l, width)}")
        if log_domain:
            loglik = tab.copy()
        else:
            if np.any(tab < 0):
                raise ValueError("likelihoods must be non-negative")
            loglik = _log(tab)
        top = loglik.max(axis=1, keepdims=True)
        top[~np.isfinite(top)] = 0.0
        loglik = loglik - top
        loglik[np.all(np.isneginf(loglik), axis=1)] = 0.0
        if self.q == 1:
            lik_ss = np.ascontiguousarray(loglik[:, :, None])
        else:
            lik_ss = np.ascontiguousarray(loglik[:, self.ss_to_sigma].reshape(self.l, self.S, self.S))
        return loglik, lik_ss

    def run(self, likelihoods, n_iters: int, log_domain: bool = False) -> DecodeResult:
        """Continue decoding for ``n_iters`` flooding iterations.

        ``likelihoods`` is ``(l, M**U)`` over the data symbols, in the
        constellation's tuple ordering; with ``log_domain`` it holds
        unnormalised log-likelihoods. Zero entries are exact exclusions.
        """
        if n_iters < 0:
            raise ValueError("n_iters must be non-negative")
        loglik, lik_ss = self._log_tables(likelihoods, log_domain)
        _flood(lik_ss, self.q, self.edges, self.u_of_check,
               self.chk_to_c, self.chk_to_prev, self.chk_to_u, n_iters)
        self.iterations += n_iters
        return self._result(loglik, lik_ss)

    def _result(self, loglik, lik_ss) -> DecodeResult:
        ext_c = np.empty((self.n, self.S))
        _coded_extrinsic(self.chk_to_c, self.chk_to_prev, ext_c)
        chan = np.empty_like(ext_c)
        _symbol_to_coded(lik_ss, ext_c, self.q, chan)
        if self.q == 1:
            log_ext = ext_c
        else:
            e = ext_c.reshape(self.l, self.q, self.S)
            log_ext = (e[:, 0, :, None] + e[:, 1, None, :]).reshape(self.l, -1)[:, self.sigma_to_ss]
        g = self.chk_to_u[self.edges].sum(axis=1)
        return DecodeResult(
            symbol_app=_to_probs(loglik + log_ext),
            extrinsic=_to_probs(log_ext),
            bit_app=_to_probs(g),
            coded_app=_to_probs(chan + ext_c),
            iterations=self.iterations,
            log_extrinsic=log_ext,
        )


# Alias for the reusable message store.
DecoderWorkspace = RADecoder


def bp_decode(workspace: RADecoder, likelihoods, n_iters: int, log_domain: bool = False) -> DecodeResult:
    """Fresh decode: reset the workspace, then run ``n_iters`` iterations."""
    if n_iters < 1:
        raise ValueError("n_iters must be at least 1")
    workspace.reset()
    return workspace.run(likelihoods, n_iters, log_domain)


def xor_reduce(bit_pair_apps, return_posterior: bool = False):
    """Network-coded decisions from ``(k, 4)`` joint bit-pair APPs.

    Ties go to 0.
    """
    p = np.asarray(bit_pair_apps, dtype=float)
    p_one = p[:, 1] + p[:, 2]
    p_zero = p[:, 0] + p[:, 3]
    bits = (p_one > p_zero).astype(np.uint8)
    if return_posterior:
        return bits, np.where(bits == 1, p_one, p_zero) / (p_one + p_zero)
    return bits


@dataclass
class MultiUserResult:
    """Per-user decoding outputs of PIC/SIC.

    symbol_app_A/B : (l, M) ; bit_app_A/B : (k, 2)
    pair_app : (l, M*M) product of marginals ; bit_pair_app : (k, 4)
    """

    symbol_app_A: np.ndarray
    symbol_app_B: np.ndarray
    bit_app_A: np.ndarray
    bit_app_B: np.ndarray
    iterations: int

    @property
    def pair_app(self) -> np.ndarray:
        return np.einsum("ia,ib->iab", self.symbol_app_A, self.symbol_app_B).reshape(len(self.symbol_app_A), -1)

    @property
    def bit_pair_app(self) -> np.ndarray:
        return np.einsum("ia,ib->iab", self.bit_app_A, self.bit_app_B).reshape(len(self.bit_app_A), 4)

    def hard_bits(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            (self.bit_app_A[:, 1] > self.bit_app_A[:, 0]).astype(np.uint8),
            (self.bit_app_B[:, 1] > self.bit_app_B[:, 0]).astype(np.uint8),
        )


def _soft_stats(app, const: Constellation):
    mean = app @ const.points
    var = app @ np.abs(const.points) ** 2 - np.abs(mean) ** 2
    return mean, np.maximum(var, 0.0)


def _single_decode(dec, y_d, h, interf_h, interf_mean, interf_var, N0, n_iters):
    ll = single_user_loglik(y_d - interf_h * interf_mean, h, N0 + np.abs(interf_h) ** 2 * interf_var, dec.const)
    return bp_decode(dec, ll, n_iters, log_domain=True)


def pic_decode(y, h_hat_A, h_hat_B, N0: float, layout: FrameLayout, decoder: RADecoder,
               n_iters: int, n_exchanges: int) -> MultiUserResult:
    """Parallel interference cancellation between two single-user decoders.

    In each exchange both users are decoded (fresh, ``n_iters`` iterations)
    against the other user's posterior-mean interference from the previous
    exchange; the residual interference variance is added to the noise.
    """
    if decoder.n_users != 1:
        raise ValueError("PIC needs a single-user decoder")
    if n_exchanges < 1:
        raise ValueError("n_exchanges must be at least 1")
    const = decoder.const
    d = layout.data_index
    y_d, hA, hB = np.asarray(y)[d], np.asarray(h_hat_A)[d], np.asarray(h_hat_B)[d]
    es = float(np.mean(np.abs(const.points) ** 2))
    mean_A = mean_B = np.zeros(len(d), complex)
    var_A = var_B = np.full(len(d), es)
    for _ in range(n_exchanges):
        res_A = _single_decode(decoder, y_d, hA, hB, mean_B, var_B, N0, n_iters)
        res_B = _single_decode(decoder, y_d, hB, hA, mean_A, var_A, N0, n_iters)
        mean_A, var_A = _soft_stats(res_A.symbol_app, const)
        mean_B, var_B = _soft_stats(res_B.symbol_app, const)
    return MultiUserResult(res_A.symbol_app, res_B.symbol_app, res_A.bit_app, res_B.bit_app,
                           2 * n_exchanges * n_iters)


def sic_decode(y, h_hat_A, h_hat_B, N0: float, layout: FrameLayout, decoder: RADecoder,
               n_iters: int) -> MultiUserResult:
    """MMSE successive interference cancellation.

    The stronger user (larger mean ``|h|`` over the frame) is decoded first
    with the weaker one treated as Gaussian noise; its soft estimate is
    subtracted to decode the weaker user, whose soft estimate in turn is
    subtracted to re-decode the stronger one.
    """
    if decoder.n_users != 1:
        raise ValueError("SIC needs a single-user decoder")
    const = decoder.const
    d = layout.data_index
    y_d = np.asarray(y)[d]
    h = {"A": np.asarray(h_hat_A)[d], "B": np.asarray(h_hat_B)[d]}
    strong, weak = ("A", "B") if np.mean(np.abs(h["A"])) >= np.mean(np.abs(h["B"])) else ("B", "A")
    es = float(np.mean(np.abs(const.points) ** 2))
    zero = np.zeros(len(d), complex)

    first = _single_decode(decoder, y_d, h[strong], h[weak], zero, np.full(len(d), es), N0, n_iters)
    m_s, v_s = _soft_stats(first.symbol_app, const)
    res_w = _single_decode(decoder, y_d, h[weak], h[strong], m_s, v_s, N0, n_iters)
    m_w, v_w = _soft_stats(res_w.symbol_app, const)
    res_s = _single_decode(decoder, y_d, h[strong], h[weak], m_w, v_w, N0, n_iters)

    res = {strong: res_s, weak: res_w}
    return MultiUserResult(res["A"].symbol_app, res["B"].symbol_app, res["A"].bit_app, res["B"].bit_app,
                           3 * n_iters)
