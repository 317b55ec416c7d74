"""Monte-Carlo driver, metrics, CSV output and the command line.

Random streams: frame ``f`` draws everything (source bits, channel gains,
unit-variance noise) from ``SeedSequence(master_seed, spawn_key=(f,))``.
The noise is scaled by ``sqrt(N0)`` per SNR point, so every scheme and every
SNR sees the same bits, gains and noise shape for a given frame.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import ClarkeConfig, GaussMarkovConfig, gen_trace, snr_to_n0
from .receiver import SCHEMES, ChannelModel, Receiver, ReceiverConfig
from .txchain import CodeConfig, build_frame_pair, get_constellation, layout_for

CSV_HEADER = ("scheme", "snr_db", "iteration", "ber", "mse", "frames", "seconds")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep. ``alpha`` is what the estimator assumes; it is also the true
    AR(1) coefficient unless ``clarke_doppler`` selects Clarke fading."""

    snr_db: tuple[float, ...] = (6.0,)
    modulation: str = "bpsk"
    info_len: int = 512
    pilot_interval: int = 16
    alpha: float = 0.99
    clarke_doppler: float | None = None
    receivers: tuple[ReceiverConfig, ...] = (ReceiverConfig("em_bp"),)
    labels: tuple[str, ...] | None = None
    num_frames: int = 2000
    master_seed: int = 1
    interleaver_seed: int = 0
    threads: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.num_frames < 1:
            raise ValueError("num_frames must be at least 1")
        if not self.receivers:
            raise ValueError("need at least one receiver")
        if self.labels is not None and len(self.labels) != len(self.receivers):
            raise ValueError("labels must match receivers")
        if len(set(self.scheme_labels)) != len(self.scheme_labels):
            raise ValueError("receiver labels must be unique")
        # raises if the pilot interval does not divide the data length
        layout_for(self.code, self.modulation, self.pilot_interval)

    @property
    def code(self) -> CodeConfig:
        return CodeConfig(self.info_len, 3, self.interleaver_seed)

    @property
    def scheme_labels(self) -> tuple[str, ...]:
        return self.labels if self.labels is not None else tuple(r.scheme for r in self.receivers)


@dataclass(frozen=True)
class MetricRow:
    scheme: str
    snr_db: float
    iteration: int
    ber: float
    mse: float
    frames: int
    seconds: float = 0.0

    def __post_init__(self):
        if not 0 <= self.ber <= 1:
            raise ValueError("ber must lie in [0, 1]")
        if self.mse < 0:
            raise ValueError("mse must be non-negative")


@dataclass
class ExperimentResult:
    """Rows plus per-frame counts for confidence intervals.

    ``errors[(label, snr)]`` is ``(frames, K+1)`` XOR-bit error counts and
    ``sq_err[(label, snr)]`` the matching per-frame channel MSE.
    """

    config: ExperimentConfig
    rows: list[MetricRow]
    errors: dict = field(default_factory=dict)
    sq_err: dict = field(default_factory=dict)
    bits_per_frame: int = 0

    def ber(self, label: str, snr: float, iteration: int = -1) -> float:
        return float(self.errors[(label, snr)][:, iteration].sum() / (self.bits_per_frame * len(self.errors[(label, snr)])))

    def ber_ci(self, label: str, snr: float, iteration: int = -1, z: float = 1.96) -> tuple[float, float]:
        """Normal-approximation interval over frames (errors cluster within frames),
        clipped at zero."""
        per_frame = self.errors[(label, snr)][:, iteration] / self.bits_per_frame
        m = per_frame.mean()
        half = z * per_frame.std(ddof=1) / np.sqrt(len(per_frame)) if len(per_frame) > 1 else np.inf
        return max(float(m - half), 0.0), float(m + half)

    def mse(self, label: str, snr: float, iteration: int = -1) -> float:
        return float(self.sq_err[(label, snr)][:, iteration].mean())

    def mse_ci(self, label: str, snr: float, iteration: int = -1, z: float = 1.96) -> tuple[float, float]:
        x = self.sq_err[(label, snr)][:, iteration]
        half = z * x.std(ddof=1) / np.sqrt(len(x)) if len(x) > 1 else np.inf
        return max(float(x.mean() - half), 0.0), float(x.mean() + half)


def compute_ber(decoded, truth) -> float:
    decoded, truth = np.asarray(decoded), np.asarray(truth)
    if decoded.shape != truth.shape:
        raise ValueError(f"length mismatch: {decoded.shape} vs {truth.shape}")
    if decoded.size == 0:
        raise ValueError("empty bit vectors")
    return float(np.count_nonzero(decoded != truth) / decoded.size)


def compute_mse(estimate, h_true) -> float:
    """Mean of ``|h_hat - h|^2`` over positions and both taps."""
    estimate, h_true = np.asarray(estimate), np.asarray(h_true)
    if estimate.shape != h_true.shape:
        raise ValueError(f"length mismatch: {estimate.shape} vs {h_true.shape}")
    return float(np.mean(np.abs(estimate - h_true) ** 2))


def frame_rng(master_seed: int, frame: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(frame,)))


def _channel_config(cfg: ExperimentConfig, length: int):
    if cfg.clarke_doppler is not None:
        return ClarkeConfig(cfg.clarke_doppler, length)
    return GaussMarkovConfig(cfg.alpha, length)


# worker-side state, rebuilt once per process
_RECEIVER: dict = {}


def _receiver_for(cfg: ExperimentConfig) -> Receiver:
    key = (cfg.info_len, cfg.interleaver_seed, cfg.modulation, cfg.pilot_interval, cfg.alpha)
    if key not in _RECEIVER:
        _RECEIVER.clear()
        _RECEIVER[key] = Receiver(cfg.code, cfg.modulation, cfg.pilot_interval, ChannelModel(cfg.alpha))
    return _RECEIVER[key]


def _pad(values, n):
    values = list(values)
    return np.array(values + [values[-1]] * (n - len(values)))


def run_frame(cfg: ExperimentConfig, frame: int):
    """All receivers at all SNRs on one frame; returns per (label, snr)
    ``(errors per k, mse per k, seconds)``."""
    rx = _receiver_for(cfg)
    rng = frame_rng(cfg.master_seed, frame)
    k = cfg.info_len
    bits_A = rng.integers(0, 2, k, dtype=np.uint8)
    bits_B = rng.integers(0, 2, k, dtype=np.uint8)
    fp = build_frame_pair(bits_A, bits_B, cfg.code, rx.layout, cfg.modulation)
    trace = gen_trace(_channel_config(cfg, rx.layout.total_len), 1.0, rng)
    clean = trace.h_A * fp.symbols_A + trace.h_B * fp.symbols_B
    truth = fp.xor_bits
    out = {}
    for snr in cfg.snr_db:
        N0 = snr_to_n0(snr)
        y = clean + np.sqrt(N0) * trace.noise
        for label, rcfg in zip(cfg.scheme_labels, cfg.receivers):
            t0 = time.perf_counter()
            rep = rx.run(y, N0, rcfg, h_true=trace.h)
            dt = time.perf_counter() - t0
            n = rcfg.effective_K + 1
            errs = _pad([np.count_nonzero(d != truth) for d in rep.decisions], n)
            mse = _pad(rep.mse, n)
            out[(label, snr)] = (errs, mse, dt)
    return out


def _run_chunk(args):
    cfg, frames = args
    return [run_frame(cfg, f) for f in frames]


def simulate(cfg: ExperimentConfig) -> ExperimentResult:
    frames = list(range(cfg.num_frames))
    if cfg.threads > 1:
        chunks = [frames[i::cfg.threads] for i in range(cfg.threads)]
        with ProcessPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
        by_frame = {}
        for c, part in zip(chunks, parts):
            by_frame.update(zip(c, part))
        per_frame = [by_frame[f] for f in frames]
    else:
        per_frame = _run_chunk((cfg, frames))

    result = ExperimentResult(cfg, [], bits_per_frame=cfg.info_len)
    for label, rcfg in zip(cfg.scheme_labels, cfg.receivers):
        for snr in cfg.snr_db:
            errs = np.array([pf[(label, snr)][0] for pf in per_frame])
            sq = np.array([pf[(label, snr)][1] for pf in per_frame])
            secs = sum(pf[(label, snr)][2] for pf in per_frame) if cfg.timing else 0.0
            result.errors[(label, snr)] = errs
            result.sq_err[(label, snr)] = sq
            for it in range(rcfg.effective_K + 1):
                result.rows.append(MetricRow(
                    label, float(snr), it,
                    float(errs[:, it].sum() / (cfg.info_len * cfg.num_frames)),
                    float(sq[:, it].mean()), cfg.num_frames, float(secs),
                ))
    result.rows.sort(key=lambda r: (r.scheme, r.snr_db, r.iteration))
    return result


def run_experiment(cfg: ExperimentConfig) -> list[MetricRow]:
    return simulate(cfg).rows


def emit_csv(rows, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in sorted(rows, key=lambda r: (r.scheme, r.snr_db, r.iteration)):
                w.writerow([r.scheme, f"{r.snr_db:.6g}", r.iteration, f"{r.ber:.6g}",
                            f"{r.mse:.6g}", r.frames, f"{r.seconds:.6g}"])
    except OSError as err:
        raise OSError(f"cannot write results to {path}: {err}") from err
    return path


def read_csv(path) -> list[MetricRow]:
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [MetricRow(r["scheme"], float(r["snr_db"]), int(r["iteration"]), float(r["ber"]),
                          float(r["mse"]), int(r["frames"]), float(r["seconds"])) for r in reader]


def emit_gnuplot(csv_path, script_path, metric: str = "ber") -> Path:
    """Gnuplot script plotting ``metric`` vs SNR at the last iteration of each scheme."""
    rows = read_csv(csv_path)
    col = {"ber": 4, "mse": 5}[metric]
    last = {}
    for r in rows:
        last[r.scheme] = max(last.get(r.scheme, 0), r.iteration)
    plots = [
        f"'{csv_path}' every ::1 using (strcol(1) eq \"{s}\" && $3 == {k} ? $2 : 1/0):{col} "
        f"with linespoints title '{s}'"
        for s, k in sorted(last.items())
    ]
    lines = [
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'Es/N0 (dB)'",
        f"set ylabel '{metric.upper()}'",
        "set grid",
        "plot " + ", \\\n     ".join(plots),
        "",
    ]
    script_path = Path(script_path)
    script_path.write_text("\n".join(lines))
    return script_path


# ---------------------------------------------------------------------------
# command line

def parse_sweep(spec: str) -> tuple[float, ...]:
    """``lo:hi:step`` inclusive of ``hi`` (within half a step)."""
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {spec!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("need step > 0 and hi >= lo")
    n = int(np.floor((hi - lo) / step + 0.5)) + 1
    return tuple(round(lo + i * step, 10) for i in range(n))


def read_config_file(path) -> dict[str, str]:
    """Simple ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="embp-pnc",
        description="Monte-Carlo BER/MSE sweeps for joint channel estimation and XOR decoding at a two-way relay.",
    )
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--scheme", default="em_bp", help=f"comma-separated list from: {', '.join(SCHEMES)}")
    snr = p.add_mutually_exclusive_group()
    snr.add_argument("--snr", type=float, nargs="+", help="Es/N0 points in dB")
    snr.add_argument("--snr-sweep", type=parse_sweep, help="lo:hi:step in dB")
    p.add_argument("--mod", choices=["bpsk", "qpsk"], default="bpsk")
    p.add_argument("--info-len", type=int, default=512)
    p.add_argument("--delta", type=int, default=16, help="data symbols per pilot pair")
    p.add_argument("--alpha", type=float, default=0.99, help="AR(1) coefficient assumed by the estimator")
    p.add_argument("--clarke-doppler", type=float, help="normalised Doppler; selects Clarke fading")
    p.add_argument("--em-iters", type=int, default=5, help="K")
    p.add_argument("--ncd1", type=int, default=6)
    p.add_argument("--ncd2", type=int, default=6)
    p.add_argument("--pic-exchanges", type=int, default=2)
    p.add_argument("--inner-em", type=int, default=1, help="EM updates per BP iteration (multi_em_single_bp)")
    p.add_argument("--frames", type=int, default=2000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--interleaver-seed", type=int, default=0)
    p.add_argument("--out", default="results.csv")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="fill the seconds column (breaks byte-identical reruns)")
    p.add_argument("--gnuplot-script", help="also write a gnuplot script for the BER curves")
    return p


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    pre, _ = parser.parse_known_args(argv)
    if pre.config:
        values = read_config_file(pre.config)
        known = {a.dest: a for a in parser._actions}
        defaults = {}
        for key, raw in values.items():
            if key not in known or key == "config":
                parser.error(f"unknown key {key!r} in {pre.config}")
            action = known[key]
            if key == "snr":
                defaults[key] = [float(v) for v in raw.replace(",", " ").split()]
            elif action.type is not None:
                defaults[key] = action.type(raw)
            elif isinstance(action, argparse._StoreTrueAction):
                defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = raw
        parser.set_defaults(**defaults)
    args = parser.parse_args(argv)
    if args.snr is not None and args.snr_sweep is not None:
        # one of the two came from the file; the command-line one wins
        if pre.snr_sweep is not None and pre.snr is None:
            args.snr = None
        else:
            args.snr_sweep = None
    return args


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    schemes = [s.strip() for s in args.scheme.split(",") if s.strip()]
    snrs = args.snr_sweep or tuple(args.snr or (6.0,))
    get_constellation(args.mod)
    receivers = []
    for s in schemes:
        base = ReceiverConfig(s, args.em_iters, args.ncd1, args.ncd2, args.pic_exchanges, args.inner_em)
        if s in ("mmse_only", "full_csi"):
            base = replace(base, K=0)
        receivers.append(base)
    return ExperimentConfig(
        snr_db=tuple(float(x) for x in snrs), modulation=args.mod, info_len=args.info_len,
        pilot_interval=args.delta, alpha=args.alpha, clarke_doppler=args.clarke_doppler,
        receivers=tuple(receivers), num_frames=args.frames, master_seed=args.seed,
        interleaver_seed=args.interleaver_seed, threads=args.threads, timing=args.timing,
    )


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    rows = run_experiment(cfg)
    path = emit_csv(rows, args.out)
    if args.gnuplot_script:
        emit_gnuplot(path, args.gnuplot_script)
    for r in rows:
        print(f"{r.scheme:>20s}  {r.snr_db:6.2f} dB  k={r.iteration}  ber={r.ber:.3e}  mse={r.mse:.3e}")
    print(f"wrote {os.fspath(path)}")
    return 0
