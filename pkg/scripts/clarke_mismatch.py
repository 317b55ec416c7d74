"""Channel MSE under Clarke fading with a mismatched AR(1) estimator.

The channel follows Clarke's model at normalised Doppler 0.005 while the
estimator assumes alpha=0.989. A Gauss-Markov run at alpha=0.99 with the
same frames and seed is printed for reference.

    python scripts/clarke_mismatch.py --frames 300 --snr 4 8 12 16
"""
from embp_pnc import ExperimentConfig, ReceiverConfig, simulate
from _common import base_parser, report


def main():
    p = base_parser(__doc__.splitlines()[0], frames=300, snr=(4, 8, 12, 16))
    p.add_argument("--doppler", type=float, default=0.005)
    p.add_argument("--alpha", type=float, default=0.989, help="AR(1) coefficient assumed under Clarke fading")
    args = p.parse_args()
    common = dict(snr_db=tuple(args.snr), info_len=args.info_len,
                  receivers=(ReceiverConfig("em_bp", K=5, ncd1=6, ncd2=6),),
                  num_frames=args.frames, master_seed=args.seed, threads=args.threads)
    print("Clarke fading")
    report(simulate(ExperimentConfig(alpha=args.alpha, clarke_doppler=args.doppler, **common)), args.out, metric="mse")
    print("Gauss-Markov fading, alpha=0.99")
    report(simulate(ExperimentConfig(alpha=0.99, **common)), metric="mse")


if __name__ == "__main__":
    main()
