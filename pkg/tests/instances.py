"""Small random PNC instances shared by the decoder and acceptance tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from embp_pnc.txchain import CodeConfig, build_frame_pair, layout_for, ra_encode
from embp_pnc.vdecoder import init_symbol_likelihoods
from oracles import all_codewords


@dataclass
class TinyInstance:
    cfg: CodeConfig
    layout: object
    frame: object
    h: np.ndarray
    y: np.ndarray
    N0: float
    lik: np.ndarray  # data rows only
    codewords: np.ndarray | None  # enumerated only for tiny codes
    infos: np.ndarray | None


def tiny_instance(rng, snr_db=6.0, info_len=4, modulation="bpsk", seed=5, delta=None, h=None):
    cfg = CodeConfig(info_len, interleaver_seed=seed)
    layout = layout_for(cfg, modulation, delta or cfg.coded_len // (1 if modulation == "bpsk" else 2))
    bits = rng.integers(0, 2, (2, info_len))
    frame = build_frame_pair(bits[0], bits[1], cfg, layout, modulation)
    L = layout.total_len
    N0 = 10 ** (-snr_db / 10)
    if h is None:
        h = (rng.standard_normal((L, 2)) + 1j * rng.standard_normal((L, 2))) / np.sqrt(2)
    h = np.broadcast_to(h, (L, 2)).astype(complex)
    noise = np.sqrt(N0 / 2) * (rng.standard_normal(L) + 1j * rng.standard_normal(L))
    y = h[:, 0] * frame.symbols_A + h[:, 1] * frame.symbols_B + noise
    lik = init_symbol_likelihoods(y, h, N0, layout, modulation)[layout.data_index]
    infos = cws = None
    if info_len <= 8:
        infos, cws = all_codewords(lambda w: ra_encode(w, cfg), info_len)
    return TinyInstance(cfg, layout, frame, h, y, N0, lik, cws, infos)


def true_pair_index(inst, modulation="bpsk"):
    from embp_pnc.txchain import get_constellation

    const = get_constellation(modulation)
    d = inst.layout.data_index
    a = np.array([const.index_of(s) for s in inst.frame.symbols_A[d]])
    b = np.array([const.index_of(s) for s in inst.frame.symbols_B[d]])
    return a * const.size + b


def clamped_tree_positions(cfg: CodeConfig):
    """Smallest prefix of coded positions whose clamping leaves a cycle-free graph.

    Clamped coded bits are known, so BP messages through them cannot carry
    loops. Union-find over the remaining check, info and coded nodes.
    """
    n, k = cfg.coded_len, cfg.info_len
    u_of_check = cfg.permutation // cfg.repetition
    for n_clamped in range(n + 1):
        parent = list(range(n + k + n))  # checks, info bits, coded bits

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for t in range(n):
            nbrs = [n + u_of_check[t]]
            nbrs += [n + k + c for c in (t - 1, t) if c >= n_clamped and c >= 0]
            for v in nbrs:
                rt, rv = find(t), find(v)
                if rt == rv:
                    ok = False
                    break
                parent[rt] = rv
            if not ok:
                break
        if ok:
            return np.arange(n_clamped)
    raise AssertionError("unreachable")


def kl(p, q):
    p = np.asarray(p)
    q = np.maximum(np.asarray(q), 1e-300)
    m = p > 0
    return float(np.sum(p[m] * np.log(p[m] / q[m])))
