"""
harness/schedules.py

Parameter schedule tuned to the kernel's eigendecay, and the finite-horizon
regret bounds that schedule is designed against.
"""

import math
from dataclasses import asdict, dataclass
from typing import Optional

from kernels.decay import EXPONENTIAL, DecayProfile

DEFAULT_MAX_M = 16


@dataclass(frozen=True)
class ScheduleParams:
    """Resolved (M, eta, beta) for one horizon, with the eps the schedule targets."""

    M: int
    eta: float
    beta: float
    eps: float
    M_uncapped: int

    def to_dict(self) -> dict:
        return asdict(self)


def tuned_epsilon(T: float, profile: DecayProfile) -> float:
    """
    eps the schedule balances against: g/(cT) (exponential), g/(c-1) T^{(1-c)/c} (polynomial).
    """
    if T < 2:
        raise ValueError(f"T must be >= 2, got {T}")
    if profile.kind == EXPONENTIAL:
        return profile.g / (profile.c * T)
    return profile.g / (profile.c - 1.0) * T ** ((1.0 - profile.c) / profile.c)


def tuned_params(T: float, profile: DecayProfile, max_m: Optional[int] = DEFAULT_MAX_M) -> ScheduleParams:
    """
    The decay-tuned schedule M = T, eta = beta.

    exponential: eta = beta = sqrt(c ln T / (g T))
    polynomial:  eta = beta = T^{-(1 + 1/c)/2} sqrt((c - 1) ln T / g)

    Args:
        T: Horizon (>= 2; real values allowed)
        profile: Eigendecay profile of the kernel
        max_m: Cap on M for desk-scale runs (None for M = floor(T))

    Returns:
        ScheduleParams: M is min(floor(T), max_m); M_uncapped keeps floor(T)

    Examples:
        >>> round(tuned_params(10000, DecayProfile("exponential", 1.0, 1.0)).eta, 6)
        0.030349
    """
    if T < 2:
        raise ValueError(f"T must be >= 2, got {T}")
    if max_m is not None and max_m < 0:
        raise ValueError(f"max_m must be >= 0, got {max_m}")
    log_t = math.log(T)
    if profile.kind == EXPONENTIAL:
        rate = math.sqrt(profile.c * log_t / (profile.g * T))
    else:
        if profile.c <= 1:
            raise ValueError(f"polynomial schedule needs c > 1, got {profile.c}")
        rate = T ** (-0.5 * (1.0 + 1.0 / profile.c)) * math.sqrt((profile.c - 1.0) * log_t / profile.g)
    M_full = int(math.floor(T))
    M = M_full if max_m is None else min(M_full, int(max_m))
    return ScheduleParams(M=M, eta=rate, beta=rate, eps=tuned_epsilon(T, profile), M_uncapped=M_full)


# ==============================
# REGRET BOUNDS
# ==============================

def overestimation_bound(T: int, M: int, beta: float) -> float:
    """B*_T <= T / (beta (M + 1))."""
    if beta <= 0:
        return math.inf
    return T / (beta * (M + 1))


def underestimation_bound(T: int, K: int, M: int, beta: float, eps: float, m_eps: int) -> float:
    """B_T <= T / (beta (M + 1)) + 2 beta K T (m(eps) + M eps)."""
    if beta <= 0:
        return math.inf
    return T / (beta * (M + 1)) + 2.0 * beta * K * T * (m_eps + M * eps)


def auxiliary_regret_bound(T: int, K: int, M: int, eta: float, beta: float, eps: float, m_eps: int) -> float:
    """
    Regret of FTRL against the estimated losses:
    K ln T / eta + 2 + 2 beta (M+1) + 2 / (beta (M+1)) + 2 eta K T (2 + m + M eps)(2 + beta^2 M).
    """
    if beta <= 0 or eta <= 0:
        return math.inf
    return (
        K * math.log(max(T, 1)) / eta
        + 2.0
        + 2.0 * beta * (M + 1)
        + 2.0 / (beta * (M + 1))
        + 2.0 * eta * K * T * (2.0 + m_eps + M * eps) * (2.0 + beta * beta * M)
    )


def regret_bound(T: int, K: int, M: int, eta: float, beta: float, eps: float, m_eps: int) -> float:
    """Sum of the auxiliary-regret, over-estimation and under-estimation bounds."""
    return (
        auxiliary_regret_bound(T, K, M, eta, beta, eps, m_eps)
        + overestimation_bound(T, M, beta)
        + underestimation_bound(T, K, M, beta, eps, m_eps)
    )
