"""Complete relay receivers: joint channel estimation and XOR decoding.

Every scheme starts from the pilot-only MMSE estimate ``h^(0)`` and then
alternates between decoding at the current channel estimate (E-step) and
re-estimating the channel from the decoder's symbol APPs (M-step).

Schemes
-------
em_bp
    Joint 2-D EM messages with the virtual (pair) decoder.
sage_bp
    Alternates scalar updates of ``h_A`` and ``h_B``, decoding before each.
sage_bp_pic
    As ``sage_bp`` with a PIC multiuser decoder supplying the APPs.
em_sic
    2-D EM with APPs from an SIC multiuser decoder; hard XOR of the users.
multi_em_single_bp
    One BP iteration per outer step, several EM updates per BP iteration.
mmse_only, full_csi
    Single decode at the MMSE estimate or at the true channel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .estimator import (
    frame_em_messages,
    frame_sage_em_messages,
    mmse_pilot_init,
    prior_covariance,
    sage_sweep,
    smooth,
)
from .txchain import CodeConfig, FrameLayout, get_constellation, layout_for
from .vdecoder import (
    RADecoder,
    bp_decode,
    init_symbol_loglik,
    normalize,
    pic_decode,
    sic_decode,
    xor_reduce,
)

SCHEMES = ("em_bp", "sage_bp", "sage_bp_pic", "em_sic", "multi_em_single_bp", "mmse_only", "full_csi")


@dataclass(frozen=True)
class ReceiverConfig:
    """Iteration counts for one receiver.

    ``K`` is the number of EM (or SAGE) iterations; for ``multi_em_single_bp``
    it is the number of single-iteration BP passes. ``early_stop`` enables a
    relative-change stop on ``mean|dh| / mean|h|``; off by default.
    """

    scheme: str = "em_bp"
    K: int = 5
    ncd1: int = 6
    ncd2: int = 6
    pic_exchanges: int = 2
    inner_em_per_bp: int = 1
    early_stop: float | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {', '.join(SCHEMES)}")
        if self.K < 0:
            raise ValueError("K must be non-negative")
        if self.ncd1 < 1 or self.ncd2 < 1:
            raise ValueError("decoder iteration counts must be at least 1")
        if self.pic_exchanges < 1:
            raise ValueError("pic_exchanges must be at least 1")
        if self.inner_em_per_bp < 1:
            raise ValueError("inner_em_per_bp must be at least 1")

    @property
    def effective_K(self) -> int:
        """Iterations the scheme actually runs; the one-shot baselines ignore ``K``."""
        return 0 if self.scheme in ("mmse_only", "full_csi") else self.K


@dataclass(frozen=True)
class ChannelModel:
    """What the receiver assumes about the channel process."""

    alpha: float = 0.99
    var_A: float = 1.0
    var_B: float = 1.0

    @property
    def Q(self) -> np.ndarray:
        return prior_covariance(self.var_A, self.var_B)


@dataclass
class ReceiverReport:
    """Result of one receiver run.

    ``estimates[k]`` is ``h^(k)`` as an ``(L, 2)`` array. ``decisions[k]`` are
    the XOR-bit decisions of the decode run at ``h^(k)``; the last entry comes
    from the final decode. ``mse[k]`` is filled when the true channel is given.
    """

    decoded_xor_bits: np.ndarray
    estimates: list[np.ndarray]
    decisions: list[np.ndarray]
    bp_iterations: int
    mse: list[float] = field(default_factory=list)

    def score(self, h_true) -> "ReceiverReport":
        h_true = np.asarray(h_true)
        self.mse = [float(np.mean(np.abs(h - h_true) ** 2)) for h in self.estimates]
        return self


class Receiver:
    """Decoder workspaces and frame geometry shared by all schemes.

    Build once per (code, modulation, pilot interval) and reuse across frames.
    """

    def __init__(self, code: CodeConfig, modulation="bpsk", pilot_interval: int = 16,
                 model: ChannelModel = ChannelModel()):
        self.code = code
        self.const = get_constellation(modulation)
        self.layout: FrameLayout = layout_for(code, self.const, pilot_interval)
        self.model = model
        self.pair_decoder = RADecoder(code, self.const, n_users=2)
        self.single_decoder = RADecoder(code, self.const, n_users=1)

    # helpers ---------------------------------------------------------------

    def loglik(self, y, h, N0):
        """Data-position log-likelihood tables at channel estimate ``h``."""
        return init_symbol_loglik(y, h, N0, self.layout, self.const)[self.layout.data_index]

    def decode(self, y, h, N0, n_iters):
        return bp_decode(self.pair_decoder, self.loglik(y, h, N0), n_iters, log_domain=True)

    def _em_update(self, y, data_app, N0):
        W, xi = frame_em_messages(data_app, y, N0, self.layout, self.const)
        return smooth(W, xi, self.model.alpha, self.model.Q).mean

    def _sage_update(self, y, data_app, h, N0, target):
        t, o = (0, 1) if target == "A" else (1, 0)
        W, xi = frame_sage_em_messages(data_app, y, h[:, o], N0, target, self.layout, self.const)
        var = self.model.var_A if target == "A" else self.model.var_B
        h = h.copy()
        h[:, t] = sage_sweep(W, xi, self.model.alpha, var).mean
        return h

    def init_estimate(self, y, N0):
        return mmse_pilot_init(y, self.layout, self.model.Q, N0).mean

    # schemes ---------------------------------------------------------------

    def run(self, y, N0: float, cfg: ReceiverConfig, h_true=None) -> ReceiverReport:
        """Dispatch on ``cfg.scheme``; ``h_true`` is needed by ``full_csi`` and
        used for MSE scoring when given."""
        y = np.asarray(y)
        if cfg.scheme == "full_csi":
            if h_true is None:
                raise ValueError("full_csi needs the true channel")
            report = self.run_em_bp(y, N0, cfg, h_init=np.asarray(h_true), K=0)
        elif cfg.scheme == "mmse_only":
            report = self.run_em_bp(y, N0, cfg, K=0)
        else:
            report = getattr(self, f"run_{cfg.scheme}")(y, N0, cfg)
        return report.score(h_true) if h_true is not None else report

    def run_mmse_only(self, y, N0, cfg):
        return self.run_em_bp(y, N0, cfg, K=0)

    def run_full_csi(self, y, N0, cfg, h_true):
        return self.run_em_bp(y, N0, cfg, h_init=np.asarray(h_true), K=0)

    def run_em_bp(self, y, N0: float, cfg: ReceiverConfig, h_init=None, K: int | None = None,
                  estep: Callable | None = None) -> ReceiverReport:
        """EM-BP. ``estep(loglik)`` replaces the BP E-step when given; it gets
        the data log-likelihood tables and must return an object with
        ``symbol_app`` and ``bit_app``."""
        K = cfg.K if K is None else K
        if estep is None:
            def estep(loglik):
                return bp_decode(self.pair_decoder, loglik, cfg.ncd1, log_domain=True)
        h = self.init_estimate(y, N0) if h_init is None else np.array(h_init, dtype=complex)
        estimates, decisions, iters = [h], [], 0
        for _ in range(K):
            res = estep(self.loglik(y, h, N0))
            iters += cfg.ncd1
            decisions.append(xor_reduce(res.bit_app))
            h_new = self._em_update(y, res.symbol_app, N0)
            estimates.append(h_new)
            if _converged(h, h_new, cfg.early_stop):
                h = h_new
                break
            h = h_new
        final = self.decode(y, h, N0, cfg.ncd2)
        decisions.append(xor_reduce(final.bit_app))
        return ReceiverReport(decisions[-1], estimates, decisions, iters + cfg.ncd2)

    def run_sage_bp(self, y, N0: float, cfg: ReceiverConfig) -> ReceiverReport:
        h = self.init_estimate(y, N0)
        estimates, decisions, iters = [h], [], 0
        for _ in range(cfg.K):
            h_prev = h
            res = self.decode(y, h, N0, cfg.ncd1)
            decisions.append(xor_reduce(res.bit_app))
            h = self._sage_update(y, res.symbol_app, h, N0, "A")
            res = self.decode(y, h, N0, cfg.ncd1)
            h = self._sage_update(y, res.symbol_app, h, N0, "B")
            iters += 2 * cfg.ncd1
            estimates.append(h)
            if _converged(h_prev, h, cfg.early_stop):
                break
        final = self.decode(y, h, N0, cfg.ncd2)
        decisions.append(xor_reduce(final.bit_app))
        return ReceiverReport(decisions[-1], estimates, decisions, iters + cfg.ncd2)

    def _pic(self, y, h, N0, n_iters, cfg):
        return pic_decode(y, h[:, 0], h[:, 1], N0, self.layout, self.single_decoder, n_iters, cfg.pic_exchanges)

    def run_sage_bp_pic(self, y, N0: float, cfg: ReceiverConfig) -> ReceiverReport:
        h = self.init_estimate(y, N0)
        estimates, decisions, iters = [h], [], 0
        for _ in range(cfg.K):
            h_prev = h
            res = self._pic(y, h, N0, cfg.ncd1, cfg)
            decisions.append(_hard_xor(res))
            h = self._sage_update(y, res.pair_app, h, N0, "A")
            res2 = self._pic(y, h, N0, cfg.ncd1, cfg)
            h = self._sage_update(y, res2.pair_app, h, N0, "B")
            iters += res.iterations + res2.iterations
            estimates.append(h)
            if _converged(h_prev, h, cfg.early_stop):
                break
        final = self._pic(y, h, N0, cfg.ncd2, cfg)
        decisions.append(_hard_xor(final))
        return ReceiverReport(decisions[-1], estimates, decisions, iters + final.iterations)

    def run_em_sic(self, y, N0: float, cfg: ReceiverConfig) -> ReceiverReport:
        h = self.init_estimate(y, N0)
        estimates, decisions, iters = [h], [], 0
        for _ in range(cfg.K):
            res = sic_decode(y, h[:, 0], h[:, 1], N0, self.layout, self.single_decoder, cfg.ncd1)
            decisions.append(_hard_xor(res))
            iters += res.iterations
            h_new = self._em_update(y, res.pair_app, N0)
            estimates.append(h_new)
            stop = _converged(h, h_new, cfg.early_stop)
            h = h_new
            if stop:
                break
        final = sic_decode(y, h[:, 0], h[:, 1], N0, self.layout, self.single_decoder, cfg.ncd2)
        decisions.append(_hard_xor(final))
        return ReceiverReport(decisions[-1], estimates, decisions, iters + final.iterations)

    def run_multi_em_single_bp(self, y, N0: float, cfg: ReceiverConfig) -> ReceiverReport:
        """``K`` single BP iterations on persistent decoder messages; after
        each, ``inner_em_per_bp`` EM updates that refresh the local likelihood
        but keep that iteration's extrinsic."""
        dec = self.pair_decoder
        dec.reset()
        h = self.init_estimate(y, N0)
        estimates, decisions = [h], []
        for _ in range(cfg.K):
            res = dec.run(self.loglik(y, h, N0), 1, log_domain=True)
            decisions.append(xor_reduce(res.bit_app))
            app = res.symbol_app
            for j in range(cfg.inner_em_per_bp):
                if j:
                    app = _log_probs(self.loglik(y, h, N0) + res.log_extrinsic)
                h = self._em_update(y, app, N0)
            estimates.append(h)
        iters = dec.iterations
        final = self.decode(y, h, N0, cfg.ncd2)
        decisions.append(xor_reduce(final.bit_app))
        return ReceiverReport(decisions[-1], estimates, decisions, iters + cfg.ncd2)


def _log_probs(logp) -> np.ndarray:
    return normalize(np.exp(logp - logp.max(axis=1, keepdims=True)))


def _hard_xor(res) -> np.ndarray:
    a, b = res.hard_bits()
    return a ^ b


def _converged(h_old, h_new, tol) -> bool:
    if tol is None:
        return False
    scale = np.mean(np.abs(h_new))
    return bool(scale > 0 and np.mean(np.abs(h_new - h_old)) / scale < tol)
