"""
Mercer kernels with controlled eigendecay
"""

from .decay import (
    EXPONENTIAL,
    POLYNOMIAL,
    DecayProfile,
    direct_tail_sum,
    tail_bound,
    truncation_index,
)
from .mercer import (
    ContextDomainError,
    CosineMercerKernel,
    GaussianKernel,
    MaternKernel,
    MercerKernel,
    UnsupportedKernelError,
    kernel_eval,
    synthetic_kernel,
)

__all__ = [
    'EXPONENTIAL', 'POLYNOMIAL', 'DecayProfile', 'direct_tail_sum', 'tail_bound', 'truncation_index',
    'ContextDomainError', 'CosineMercerKernel', 'GaussianKernel', 'MaternKernel', 'MercerKernel',
    'UnsupportedKernelError', 'kernel_eval', 'synthetic_kernel',
]
