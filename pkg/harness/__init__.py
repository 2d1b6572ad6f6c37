"""
Simulation harness: configs, RNG streams, the KernelFTRL loop, regret and result files
"""

from .config import (
    AdversarySpec,
    ConfigError,
    ContextSpec,
    ExperimentConfig,
    KernelSpec,
    OutputSpec,
    ScheduleSpec,
    SeedSpec,
    SweepSpec,
    build_contexts,
    build_kernel,
    config_from_dict,
    load_config,
    resolve_schedule,
    truncation_for,
)
from .output import write_json, write_regret_csv, write_run_outputs
from .regret import (
    RegretCurve,
    SlopeFit,
    checkpoints,
    decomposition_diagnostic,
    empirical_regret,
    slope_fit,
)
from .rng import STREAMS, RngStreams
from .schedules import (
    ScheduleParams,
    auxiliary_regret_bound,
    overestimation_bound,
    regret_bound,
    tuned_epsilon,
    tuned_params,
    underestimation_bound,
)
from .simulator import RunRecord, accounting_bound, run
from .suites import audit_suite, oracle_check, sweep

__all__ = [
    'AdversarySpec', 'ConfigError', 'ContextSpec', 'ExperimentConfig', 'KernelSpec', 'OutputSpec',
    'ScheduleSpec', 'SeedSpec', 'SweepSpec', 'build_contexts', 'build_kernel', 'config_from_dict',
    'load_config', 'resolve_schedule', 'truncation_for',
    'write_json', 'write_regret_csv', 'write_run_outputs',
    'RegretCurve', 'SlopeFit', 'checkpoints', 'decomposition_diagnostic', 'empirical_regret',
    'slope_fit',
    'STREAMS', 'RngStreams',
    'ScheduleParams', 'auxiliary_regret_bound', 'overestimation_bound', 'regret_bound', 'tuned_epsilon',
    'tuned_params', 'underestimation_bound',
    'RunRecord', 'accounting_bound', 'run',
    'audit_suite', 'oracle_check', 'sweep',
]
