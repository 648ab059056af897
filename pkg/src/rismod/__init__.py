"""Codebook design and BER simulation for MIMO links where a reconfigurable
reflecting surface carries part of each transmitted bit label."""

__version__ = "0.1.0"

from .ber import BerBoundReport, all_ones_hamming, ber_report, hamming_matrix, \
    pairwise_sq_distances, q_function, union_bound
from .continuous import CorProblem, CosJrmProblem, CosSrmProblem, OptTrace, \
    PenaltyConfig, build_cor, build_cos_jrm, build_cos_srm, cjmsr, cor_gradient, \
    cor_optimize, cos_jrm_optimize, cos_srm_optimize
from .discrete import ComplexityEstimate, DepletionTrace, bsa_map, complexity_counts, \
    deplete_jrm, deplete_patterns_srm, deplete_signals_srm, djmsr_jrm, djmsr_srm, \
    exhaustive_jrm, exhaustive_srm
from .model import BitMapping, ChannelSet, Codebook, SystemConfig, effective_channel, \
    noise_free_points, normalize_power, random_candidates, random_channels
from .simulate import BerCurve, SimPlan, channel_stream, estimate_ber, ml_detect, \
    snr_db_to_sigma, sweep, sweep_with_channel_errors

__all__ = [
    "__version__",
    "BerBoundReport", "all_ones_hamming", "ber_report", "hamming_matrix",
    "pairwise_sq_distances", "q_function", "union_bound",
    "CorProblem", "CosJrmProblem", "CosSrmProblem", "OptTrace", "PenaltyConfig",
    "build_cor", "build_cos_jrm", "build_cos_srm", "cjmsr", "cor_gradient",
    "cor_optimize", "cos_jrm_optimize", "cos_srm_optimize",
    "ComplexityEstimate", "DepletionTrace", "bsa_map", "complexity_counts",
    "deplete_jrm", "deplete_patterns_srm", "deplete_signals_srm", "djmsr_jrm",
    "djmsr_srm", "exhaustive_jrm", "exhaustive_srm",
    "BitMapping", "ChannelSet", "Codebook", "SystemConfig", "effective_channel",
    "noise_free_points", "normalize_power", "random_candidates", "random_channels",
    "BerCurve", "SimPlan", "channel_stream", "estimate_ber", "ml_detect",
    "snr_db_to_sigma", "sweep", "sweep_with_channel_errors",
]
