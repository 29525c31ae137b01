"""Capacity and optimal beamforming under joint total and per-antenna power constraints."""

__version__ = "0.1.0"

from .core import (ChannelVector, InvalidBudgetError, PowerBudget, TruncatedChannel,
                   capacity_egt, capacity_mrt, channel_from_json)
from .fading import (CovariancePolicy, ErgodicEstimate, FadingKind, FadingModel,
                     ergodic_capacity, isotropic_dominance_test, sample_channel,
                     tx_correlated_counterexample)
from .kkt import KktCertificate, certify, reconstruct_multipliers
from .miso import (BeamformingSolution, capacity_approx, find_active_count, is_egt_optimal,
                   is_mrt_optimal, solve, solve_heterogeneous, solve_uniform)
from .oracle import OracleResult, maximize_snr, validate_k_search

__all__ = [
    "ChannelVector", "PowerBudget", "TruncatedChannel", "InvalidBudgetError",
    "capacity_mrt", "capacity_egt", "channel_from_json",
    "BeamformingSolution", "solve", "solve_uniform", "solve_heterogeneous",
    "find_active_count", "is_mrt_optimal", "is_egt_optimal", "capacity_approx",
    "KktCertificate", "reconstruct_multipliers", "certify",
    "OracleResult", "maximize_snr", "validate_k_search",
    "FadingKind", "FadingModel", "CovariancePolicy", "ErgodicEstimate",
    "sample_channel", "ergodic_capacity", "isotropic_dominance_test",
    "tx_correlated_counterexample",
]
