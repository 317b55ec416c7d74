"""Transmitter side: RA encoding, symbol mapping and pilot framing.

Both terminals share one RA code (same interleaver). Each frame block is
``[P1, P2, D_1 .. D_delta]``; node A sends pilots (1, 1), node B (1, -1).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

PILOTS_A = (1.0 + 0j, 1.0 + 0j)
PILOTS_B = (1.0 + 0j, -1.0 + 0j)


@dataclass(frozen=True)
class CodeConfig:
    """Regular repeat-accumulate code.

    ``interleaver_seed=None`` selects the identity permutation, which is only
    useful for hand-checked examples.
    """

    info_len: int
    repetition: int = 3
    interleaver_seed: int | None = 0

    def __post_init__(self):
        if self.info_len <= 0:
            raise ValueError("info_len must be positive")
        if self.repetition < 2:
            raise ValueError("repetition must be at least 2")

    @property
    def coded_len(self) -> int:
        return self.repetition * self.info_len

    @cached_property
    def permutation(self) -> np.ndarray:
        return interleaver_permutation(self.coded_len, self.interleaver_seed)


def interleaver_permutation(n: int, seed: int | None) -> np.ndarray:
    if seed is None:
        return np.arange(n)
    # numpy's permutation is a Fisher-Yates shuffle
    return np.random.default_rng(seed).permutation(n)


def interleave(bits, seed: int | None) -> np.ndarray:
    bits = np.asarray(bits)
    return bits[interleaver_permutation(bits.size, seed)]


def deinterleave(bits, seed: int | None) -> np.ndarray:
    bits = np.asarray(bits)
    out = np.empty_like(bits)
    out[interleaver_permutation(bits.size, seed)] = bits
    return out


def ra_encode(bits, cfg: CodeConfig) -> np.ndarray:
    """Repeat, interleave, accumulate. The accumulator starts at 0 and the
    codeword is not terminated."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (cfg.info_len,):
        raise ValueError(f"expected {cfg.info_len} info bits, got shape {bits.shape}")
    repeated = np.repeat(bits, cfg.repetition)
    return np.bitwise_xor.accumulate(repeated[cfg.permutation])


@dataclass(frozen=True)
class Constellation:
    """Unit-energy constellation with a fixed bit labelling.

    ``points[s]`` is the symbol whose label, read MSB first, is ``s``.
    """

    name: str
    points: np.ndarray

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.size))

    @cached_property
    def labels(self) -> np.ndarray:
        """``labels[s, k]`` is bit ``k`` (MSB first) of symbol index ``s``."""
        q = self.bits_per_symbol
        s = np.arange(self.size)[:, None]
        return ((s >> (q - 1 - np.arange(q))) & 1).astype(np.uint8)

    @cached_property
    def pair_points(self) -> np.ndarray:
        """``(M*M, 2)`` array of ``(x_A, x_B)``; pair index is ``a*M + b``."""
        a, b = np.meshgrid(self.points, self.points, indexing="ij")
        return np.stack([a.ravel(), b.ravel()], axis=1)

    def index_of(self, symbol: complex) -> int:
        d = np.abs(self.points - symbol)
        i = int(np.argmin(d))
        if d[i] > 1e-9:
            raise ValueError(f"{symbol} is not a constellation point")
        return i


BPSK = Constellation("bpsk", np.array([1.0 + 0j, -1.0 + 0j]))
# Gray: first bit picks the sign of the imaginary part, second bit the real part
QPSK = Constellation(
    "qpsk", np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2)
)
MODULATIONS = {"bpsk": BPSK, "qpsk": QPSK}


def get_constellation(modulation) -> Constellation:
    if isinstance(modulation, Constellation):
        return modulation
    try:
        return MODULATIONS[str(modulation).lower()]
    except KeyError:
        raise ValueError(f"unknown modulation {modulation!r}") from None


def map_symbols(bits, modulation) -> np.ndarray:
    const = get_constellation(modulation)
    bits = np.asarray(bits, dtype=np.int64)
    q = const.bits_per_symbol
    if bits.size % q:
        raise ValueError(f"{const.name} needs a multiple of {q} bits, got {bits.size}")
    groups = bits.reshape(-1, q)
    idx = groups @ (1 << np.arange(q - 1, -1, -1))
    return const.points[idx]


@dataclass(frozen=True)
class FrameLayout:
    data_len: int
    pilot_interval: int

    def __post_init__(self):
        if self.data_len <= 0 or self.pilot_interval <= 0:
            raise ValueError("data_len and pilot_interval must be positive")
        if self.data_len % self.pilot_interval:
            raise ValueError(
                f"pilot interval {self.pilot_interval} does not divide data length {self.data_len}"
            )

    @property
    def n_blocks(self) -> int:
        return self.data_len // self.pilot_interval

    @property
    def block_len(self) -> int:
        return self.pilot_interval + 2

    @property
    def total_len(self) -> int:
        return self.data_len + 2 * self.n_blocks

    @cached_property
    def is_pilot(self) -> np.ndarray:
        mask = np.zeros(self.total_len, bool)
        starts = np.arange(self.n_blocks) * self.block_len
        mask[starts] = mask[starts + 1] = True
        return mask

    @cached_property
    def data_index(self) -> np.ndarray:
        return np.flatnonzero(~self.is_pilot)

    @cached_property
    def pilot_index(self) -> np.ndarray:
        """``(n_blocks, 2)`` positions of (P1, P2) in each block."""
        return np.flatnonzero(self.is_pilot).reshape(-1, 2)

    @cached_property
    def block_of(self) -> np.ndarray:
        return np.arange(self.total_len) // self.block_len

    @property
    def pilot_values(self) -> dict[str, tuple[complex, complex]]:
        return {"A": PILOTS_A, "B": PILOTS_B}

    @property
    def pilot_matrix(self) -> np.ndarray:
        """Rows are pilot slots, columns users: ``y_p = X_p @ h + n``."""
        return np.array([[PILOTS_A[0], PILOTS_B[0]], [PILOTS_A[1], PILOTS_B[1]]])

    @cached_property
    def pilot_symbols(self) -> np.ndarray:
        """``(L, 2)`` known ``(x_A, x_B)`` at pilot positions, zero at data positions."""
        out = np.zeros((self.total_len, 2), complex)
        for slot in range(2):
            out[self.pilot_index[:, slot]] = self.pilot_matrix[slot]
        return out


def layout_for(cfg: CodeConfig, modulation, pilot_interval: int) -> FrameLayout:
    const = get_constellation(modulation)
    if cfg.coded_len % const.bits_per_symbol:
        raise ValueError("coded length is not a whole number of symbols")
    return FrameLayout(cfg.coded_len // const.bits_per_symbol, pilot_interval)


@dataclass(frozen=True)
class FramePair:
    source_bits_A: np.ndarray
    source_bits_B: np.ndarray
    codeword_A: np.ndarray
    codeword_B: np.ndarray
    symbols_A: np.ndarray
    symbols_B: np.ndarray
    layout: FrameLayout
    modulation: str = field(default="bpsk")

    @property
    def xor_bits(self) -> np.ndarray:
        return self.source_bits_A ^ self.source_bits_B


def _frame_symbols(data: np.ndarray, pilots, layout: FrameLayout) -> np.ndarray:
    out = np.empty(layout.total_len, complex)
    out[layout.data_index] = data
    out[layout.pilot_index[:, 0]] = pilots[0]
    out[layout.pilot_index[:, 1]] = pilots[1]
    return out


def build_frame_pair(bits_A, bits_B, cfg: CodeConfig, layout: FrameLayout, modulation="bpsk") -> FramePair:
    const = get_constellation(modulation)
    if cfg.coded_len != layout.data_len * const.bits_per_symbol:
        raise ValueError(
            f"code length {cfg.coded_len} does not fill {layout.data_len} "
            f"{const.name} data symbols"
        )
    bits_A = np.asarray(bits_A, dtype=np.uint8)
    bits_B = np.asarray(bits_B, dtype=np.uint8)
    cw_A, cw_B = ra_encode(bits_A, cfg), ra_encode(bits_B, cfg)
    return FramePair(
        source_bits_A=bits_A,
        source_bits_B=bits_B,
        codeword_A=cw_A,
        codeword_B=cw_B,
        symbols_A=_frame_symbols(map_symbols(cw_A, const), PILOTS_A, layout),
        symbols_B=_frame_symbols(map_symbols(cw_B, const), PILOTS_B, layout),
        layout=layout,
        modulation=const.name,
    )
