"""Joint channel estimation and network-coded decoding for a two-way relay.

Submodules: ``numerics`` (small Gaussian algebra), ``txchain`` (RA code,
mapping, pilots), ``channel`` (fading and noise), ``vdecoder`` (pair-alphabet
BP and multiuser decoders), ``estimator`` (EM messages and Gaussian
smoothing), ``receiver`` (complete schemes) and ``harness`` (Monte-Carlo
driver and CLI).
"""
from .receiver import ChannelModel, Receiver, ReceiverConfig, ReceiverReport
from .harness import ExperimentConfig, MetricRow, run_experiment, simulate

__all__ = [
    "ChannelModel",
    "ExperimentConfig",
    "MetricRow",
    "Receiver",
    "ReceiverConfig",
    "ReceiverReport",
    "run_experiment",
    "simulate",
]
__version__ = "0.1.0"
