"""BER and channel MSE of EM-BP against the MMSE and full-CSI baselines.

Gauss-Markov fading with alpha=0.99, BPSK, two pilots every 16 data symbols.

    python scripts/gauss_markov_sweep.py --frames 500 --snr 4 8 12 16
"""
from embp_pnc import ExperimentConfig, ReceiverConfig, simulate
from _common import base_parser, report


def main():
    p = base_parser(__doc__.splitlines()[0], frames=500, snr=(4, 8, 12, 16, 20))
    p.add_argument("--mod", choices=["bpsk", "qpsk"], default="bpsk")
    args = p.parse_args()
    receivers = (
        ReceiverConfig("em_bp", K=5, ncd1=6, ncd2=6),
        ReceiverConfig("mmse_only", ncd2=6),
        ReceiverConfig("mmse_only", ncd2=36),
        ReceiverConfig("full_csi", ncd2=6),
    )
    cfg = ExperimentConfig(
        snr_db=tuple(args.snr), modulation=args.mod, info_len=args.info_len,
        receivers=receivers, labels=("em_bp", "mmse_ncd6", "mmse_ncd36", "full_csi"),
        num_frames=args.frames, master_seed=args.seed, threads=args.threads,
    )
    result = simulate(cfg)
    report(result, args.out)
    print()
    report(result, metric="mse")


if __name__ == "__main__":
    main()
