"""Time-varying two-user flat fading and the superimposed relay observation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.special import j0

from .txchain import FramePair


@dataclass(frozen=True)
class GaussMarkovConfig:
    alpha: float
    length: int
    var_A: float = 1.0
    var_B: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.var_A <= 0 or self.var_B <= 0:
            raise ValueError("channel variances must be positive")
        if self.length <= 0:
            raise ValueError("length must be positive")


@dataclass(frozen=True)
class ClarkeConfig:
    normalized_doppler: float
    length: int
    num_scatterers: int = 64
    var_A: float = 1.0
    var_B: float = 1.0

    def __post_init__(self):
        if not 0 < self.normalized_doppler < 0.5:
            raise ValueError("normalized Doppler must lie in (0, 0.5)")
        if self.num_scatterers < 8:
            raise ValueError("need at least 8 scatterers")
        if self.var_A <= 0 or self.var_B <= 0:
            raise ValueError("channel variances must be positive")


@dataclass(frozen=True)
class ChannelTrace:
    h_A: np.ndarray
    h_B: np.ndarray
    noise: np.ndarray
    N0: float

    @property
    def h(self) -> np.ndarray:
        """``(L, 2)`` stacked gains."""
        return np.stack([self.h_A, self.h_B], axis=1)

    def with_noise_level(self, N0: float) -> "ChannelTrace":
        """Same gains, noise rescaled from the current level to ``N0``."""
        scale = np.sqrt(N0 / self.N0) if self.N0 > 0 else 0.0
        return ChannelTrace(self.h_A, self.h_B, self.noise * scale, N0)


def complex_normal(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    return np.sqrt(var / 2) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def _ar1(alpha: float, var: float, length: int, rng) -> np.ndarray:
    z = complex_normal(rng, length, var)
    z[1:] *= np.sqrt(1 - alpha ** 2)
    # h_i = alpha h_{i-1} + sqrt(1 - alpha^2) z_i, with h_1 = z_1
    return lfilter([1.0], [1.0, -alpha], z)


def gen_gauss_markov(cfg: GaussMarkovConfig, rng: np.random.Generator):
    h_A = _ar1(cfg.alpha, cfg.var_A, cfg.length, rng)
    h_B = _ar1(cfg.alpha, cfg.var_B, cfg.length, rng)
    return h_A, h_B


def _sum_of_sinusoids(fd: float, n: int, var: float, length: int, rng) -> np.ndarray:
    theta = rng.uniform(-np.pi, np.pi, n)
    phi = rng.uniform(-np.pi, np.pi, n)
    t = np.arange(length)[:, None]
    return np.sqrt(var / n) * np.exp(1j * (2 * np.pi * fd * np.cos(theta) * t + phi)).sum(axis=1)


def gen_clarke(cfg: ClarkeConfig, rng: np.random.Generator):
    """Sum-of-sinusoids Clarke fading; autocorrelation tends to J0(2 pi fd k)."""
    h_A = _sum_of_sinusoids(cfg.normalized_doppler, cfg.num_scatterers, cfg.var_A, cfg.length, rng)
    h_B = _sum_of_sinusoids(cfg.normalized_doppler, cfg.num_scatterers, cfg.var_B, cfg.length, rng)
    return h_A, h_B


def clarke_autocorrelation(normalized_doppler: float, lag) -> np.ndarray:
    return j0(2 * np.pi * normalized_doppler * np.asarray(lag))


def alpha_from_doppler(normalized_doppler: float) -> float:
    """AR(1) coefficient whose lag-1 correlation matches Clarke's J0."""
    return float(j0(2 * np.pi * normalized_doppler))


def snr_to_n0(snr_db: float, es: float = 1.0) -> float:
    return es * 10 ** (-snr_db / 10)


def esn0_to_ebn0(snr_db, rate: float = 1 / 3):
    """E_s = rate * E_b, so E_b/N0 is E_s/N0 minus 10 log10(rate)."""
    return np.asarray(snr_db) - 10 * np.log10(rate)


def gen_trace(cfg, N0: float, rng: np.random.Generator) -> ChannelTrace:
    if isinstance(cfg, GaussMarkovConfig):
        h_A, h_B = gen_gauss_markov(cfg, rng)
    elif isinstance(cfg, ClarkeConfig):
        h_A, h_B = gen_clarke(cfg, rng)
    else:
        raise TypeError(f"unsupported channel config {type(cfg).__name__}")
    noise = complex_normal(rng, cfg.length, N0)
    return ChannelTrace(h_A, h_B, noise, N0)


def transmit(frame: FramePair, trace: ChannelTrace) -> np.ndarray:
    L = frame.layout.total_len
    lengths = {len(frame.symbols_A), len(frame.symbols_B), len(trace.h_A), len(trace.h_B), len(trace.noise)}
    if lengths != {L}:
        raise ValueError(f"length mismatch between frame ({L}) and trace {sorted(lengths)}")
    return trace.h_A * frame.symbols_A + trace.h_B * frame.symbols_B + trace.noise
