"""Converged EM-BP and SAGE-BP against the PIC, SIC and multiple-EM baselines.

All receivers use 18 decoder iterations. multi_em_single_bp gets 90
single-iteration BP passes with 3 EM updates each, the same BP budget
as em_bp with K=5.

    python scripts/baselines.py --frames 400 --snr 8 12 16
"""
from embp_pnc import ExperimentConfig, ReceiverConfig, simulate
from _common import base_parser, report


def main():
    p = base_parser(__doc__.splitlines()[0], frames=400, snr=(8, 12, 16))
    args = p.parse_args()
    receivers = (
        ReceiverConfig("em_bp", K=5, ncd1=18, ncd2=18),
        ReceiverConfig("sage_bp", K=5, ncd1=18, ncd2=18),
        ReceiverConfig("sage_bp_pic", K=5, ncd1=18, ncd2=18, pic_exchanges=2),
        ReceiverConfig("em_sic", K=5, ncd1=18, ncd2=18),
        ReceiverConfig("multi_em_single_bp", K=90, ncd2=18, inner_em_per_bp=3),
    )
    cfg = ExperimentConfig(
        snr_db=tuple(args.snr), info_len=args.info_len, receivers=receivers,
        num_frames=args.frames, master_seed=args.seed, threads=args.threads,
    )
    report(simulate(cfg), args.out)


if __name__ == "__main__":
    main()
