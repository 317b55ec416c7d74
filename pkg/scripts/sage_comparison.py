"""SAGE-BP against EM-BP, at equal and at halved decoder iterations.

    python scripts/sage_comparison.py --frames 400 --snr 6 9 12
"""
from embp_pnc import ExperimentConfig, ReceiverConfig, simulate
from _common import base_parser, report


def main():
    p = base_parser(__doc__.splitlines()[0], frames=400, snr=(6, 9, 12))
    args = p.parse_args()
    receivers = (
        ReceiverConfig("em_bp", K=5, ncd1=6, ncd2=6),
        ReceiverConfig("sage_bp", K=5, ncd1=6, ncd2=6),
        ReceiverConfig("sage_bp", K=5, ncd1=3, ncd2=6),
    )
    cfg = ExperimentConfig(
        snr_db=tuple(args.snr), info_len=args.info_len, receivers=receivers,
        labels=("em_bp", "sage_bp", "sage_bp_ncd1_3"),
        num_frames=args.frames, master_seed=args.seed, threads=args.threads,
    )
    report(simulate(cfg), args.out)


if __name__ == "__main__":
    main()
