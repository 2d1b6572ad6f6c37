"""
Kernel Geometric Resampling loss estimators
"""

from .audits import (
    AuditInstance,
    AuditResult,
    AuditViolation,
    bias_audit,
    overestimation_audit,
    second_moment_audit,
    trace_audit,
    underestimation_audit,
)
from .buffer_io import load_buffer, save_buffer
from .compiled import CompiledBuffer, compile_block
from .kgr import (
    BlockGramCache,
    CoefficientState,
    KgrResult,
    ResampleBlock,
    cumulative_estimate,
    kgr,
    kgr_eval_budget,
    point_estimate,
)

__all__ = [
    'AuditInstance', 'AuditResult', 'AuditViolation', 'bias_audit', 'overestimation_audit',
    'second_moment_audit', 'trace_audit', 'underestimation_audit',
    'load_buffer', 'save_buffer',
    'CompiledBuffer', 'compile_block',
    'BlockGramCache', 'CoefficientState', 'KgrResult', 'ResampleBlock', 'cumulative_estimate', 'kgr',
    'kgr_eval_budget', 'point_estimate',
]
