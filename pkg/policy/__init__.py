"""
Log-barrier FTRL policy solver
"""

from .log_barrier import (
    PolicyDistribution,
    RegretAudit,
    ftrl_objective,
    log_barrier,
    regret_audit,
    sample_action,
    solve_policy,
    solve_policy_batch,
    uniform_policy,
)

__all__ = [
    'PolicyDistribution', 'RegretAudit', 'ftrl_objective', 'log_barrier', 'regret_audit',
    'sample_action', 'solve_policy', 'solve_policy_batch', 'uniform_policy',
]
