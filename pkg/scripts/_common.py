"""Shared argument handling and table printing for the experiment scripts."""
from __future__ import annotations

import argparse
from pathlib import Path

from embp_pnc.harness import emit_csv


def base_parser(description: str, frames: int, snr: tuple[float, ...]) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--frames", type=int, default=frames)
    p.add_argument("--snr", type=float, nargs="+", default=list(snr), help="Es/N0 points in dB")
    p.add_argument("--info-len", type=int, default=512)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, help="also write the metric rows as CSV")
    return p


def report(result, out=None, metric="ber"):
    """Print final-iteration BER (or per-iteration MSE) with 95% intervals."""
    cfg = result.config
    for label in cfg.scheme_labels:
        for snr in cfg.snr_db:
            if metric == "ber":
                lo, hi = result.ber_ci(label, snr)
                print(f"{label:>22s} {snr:6.1f} dB  BER {result.ber(label, snr):.3e}  [{lo:.2e}, {hi:.2e}]")
            else:
                n_it = result.sq_err[(label, snr)].shape[1]
                mses = " ".join(f"{result.mse(label, snr, k):.3e}" for k in range(n_it))
                print(f"{label:>22s} {snr:6.1f} dB  MSE by k: {mses}")
    if out is not None:
        emit_csv(result.rows, out)
        print(f"wrote {out}")
