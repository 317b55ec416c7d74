"""EM-BP BER against pilot interval for several channel correlations.

    python scripts/pilot_interval.py --frames 200 --snr 10
"""
from embp_pnc import ExperimentConfig, ReceiverConfig, simulate
from _common import base_parser


def main():
    p = base_parser(__doc__.splitlines()[0], frames=200, snr=(10,))
    p.add_argument("--deltas", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    p.add_argument("--alphas", type=float, nargs="+", default=[0.9, 0.99, 0.999])
    args = p.parse_args()
    rx = (ReceiverConfig("em_bp", K=5, ncd1=6, ncd2=6),)
    print("alpha  delta  " + "  ".join(f"{s:>9.1f}dB" for s in args.snr))
    for alpha in args.alphas:
        for delta in args.deltas:
            cfg = ExperimentConfig(snr_db=tuple(args.snr), info_len=args.info_len, pilot_interval=delta,
                                   alpha=alpha, receivers=rx, num_frames=args.frames,
                                   master_seed=args.seed, threads=args.threads)
            r = simulate(cfg)
            print(f"{alpha:5.3f}  {delta:5d}  " + "  ".join(f"{r.ber('em_bp', s):11.3e}" for s in args.snr))


if __name__ == "__main__":
    main()
