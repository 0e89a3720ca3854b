"""Bit-error-rate simulator for decode-and-forward relay networks."""

from .channel import ChannelSpec, KnownCsi, KnownStats, ber_first_hop, llr_csi, llr_stats
from .detectors import Detector, DetectorKind, PmfSource
from .engine import BerEstimate, PmfPipeline, SimConfig, build_pipeline, simulate_ber, sweep
from .pmf import JointPmf, estimate_mcs, estimate_ps, pjp_pmf, project_simplex
from .topology import build_mesh, build_multihop

__version__ = "0.1.0"

__all__ = [
    "BerEstimate",
    "ChannelSpec",
    "Detector",
    "DetectorKind",
    "JointPmf",
    "KnownCsi",
    "KnownStats",
    "PmfPipeline",
    "PmfSource",
    "SimConfig",
    "ber_first_hop",
    "build_mesh",
    "build_multihop",
    "build_pipeline",
    "estimate_mcs",
    "estimate_ps",
    "llr_csi",
    "llr_stats",
    "pjp_pmf",
    "project_simplex",
    "simulate_ber",
    "sweep",
]
