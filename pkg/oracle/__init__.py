"""
Explicit feature-space oracle for the kernel-trick computations
"""

from .feature_oracle import (
    SigmaEstimate,
    batched_kgr_features,
    draw_actions,
    effective_dim_trace,
    explicit_sigma_plus,
    feature_map,
    oracle_kgr,
    rank_one_updates,
    sigma_estimate,
)

__all__ = [
    'SigmaEstimate', 'batched_kgr_features', 'draw_actions', 'effective_dim_trace',
    'explicit_sigma_plus', 'feature_map', 'oracle_kgr', 'rank_one_updates', 'sigma_estimate',
]
