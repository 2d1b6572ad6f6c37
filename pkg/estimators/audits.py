"""
estimators/audits.py

Monte Carlo property audits of the KGR estimator on fixed instances.

Every audit draws N independent rounds (X_t ~ D, A_t ~ policy, M resampled
pairs) and evaluates the estimator in feature space, so the kernel must carry
an explicit eigensystem. Each result reports the Monte Carlo standard error;
an audit passes when its statistic is within 3 standard errors of the bound.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from environments.contexts import UniformContexts
from kernels.decay import DecayProfile, truncation_index
from kernels.mercer import MercerKernel, synthetic_kernel
from oracle.feature_oracle import (
    Policy,
    batched_kgr_features,
    draw_actions,
    effective_dim_trace,
    sigma_estimate,
)

logger = logging.getLogger(__name__)

AUDIT_CHUNK = 10_000
MC_SIGMAS = 3.0
EPS_GRID = (1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 3e-4, 1e-4)


class AuditViolation(AssertionError):
    """A property audit found its statistic above the bound."""


# ==============================
# INSTANCES AND RESULTS
# ==============================

@dataclass(frozen=True, eq=False)
class AuditInstance:
    """
    A frozen estimation problem: one round's policy, losses and KGR parameters.

    Args:
        kernel: Kernel with explicit eigensystem
        contexts: Context distribution exposing sample(rng, n)
        policy: Batch policy X (n, d) -> probabilities (n, K)
        coeffs: (K, D) loss-function coordinates f_a, each of norm <= 1
        beta: Bonus scale
        M: Resample count
        query: Fixed query context x for the bias audits
        a: Audited action
    """

    kernel: MercerKernel
    contexts: object
    policy: Policy
    coeffs: np.ndarray
    beta: float
    M: int
    query: np.ndarray
    a: int = 0

    @property
    def K(self) -> int:
        return int(np.asarray(self.coeffs).shape[0])


@dataclass(frozen=True)
class AuditResult:
    """Statistic, bound and Monte Carlo error of one audit."""

    name: str
    statistic: float
    bound: float
    mc_stderr: float
    n_samples: int
    flags: List[str] = field(default_factory=list)
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.statistic <= self.bound + MC_SIGMAS * self.mc_stderr

    def check(self) -> "AuditResult":
        if not self.holds:
            raise AuditViolation(
                f"{self.name}: statistic {self.statistic:.6g} exceeds bound {self.bound:.6g} "
                f"+ {MC_SIGMAS:g} x stderr {self.mc_stderr:.3g}"
            )
        return self

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "bound": self.bound,
            "mc_stderr": self.mc_stderr,
            "n_samples": self.n_samples,
            "holds": self.holds,
            "flags": list(self.flags),
            **self.details,
        }


class _Moments:
    """Running sum and sum of squares for a mean with standard error."""

    def __init__(self):
        self.n = 0
        self.total = 0.0
        self.total_sq = 0.0

    def add(self, values: np.ndarray) -> None:
        self.n += values.size
        self.total += float(values.sum())
        self.total_sq += float(np.dot(values, values))

    @property
    def mean(self) -> float:
        return self.total / self.n

    @property
    def stderr(self) -> float:
        var = max(self.total_sq / self.n - self.mean ** 2, 0.0)
        return math.sqrt(var / self.n)


def _draw_rounds(instance: AuditInstance, n: int, rng: np.random.Generator):
    """Features of n independent (X_t, A_t, resample block) realizations."""
    kernel = instance.kernel
    X_t = instance.contexts.sample(rng, n)
    A_t = draw_actions(rng, instance.policy(X_t))
    X_res = instance.contexts.sample(rng, n * instance.M)
    A_res = draw_actions(rng, instance.policy(X_res)) if instance.M else np.zeros(0, dtype=int)
    phi_t = kernel.features(X_t)
    phi_res = kernel.features(X_res).reshape(n, instance.M, kernel.dimension)
    return X_t, A_t, phi_t, phi_res, A_res.reshape(n, instance.M)


def _chunks(N: int):
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    remaining = N
    while remaining > 0:
        n = min(remaining, AUDIT_CHUNK)
        yield n
        remaining -= n


# ==============================
# BIAS AUDITS
# ==============================

def bias_audit(instance: AuditInstance, N: int, rng: np.random.Generator) -> AuditResult:
    """
    |E <phi(x), f - f_tilde>| <= beta E ||phi(x)||^2_{Sigma+} + 1/(beta (M + 1)).

    <phi(x), f_tilde> = q(x, a) <phi(X_t), f_a> 1{A_t = a} is averaged over N
    rounds. With beta = 0 the bound is +inf and the result is flagged.

    Returns:
        AuditResult: statistic |empirical_bias|, the bound, MC standard error
    """
    kernel, a = instance.kernel, instance.a
    f = np.asarray(instance.coeffs, dtype=float)[a]
    phi_q = kernel.features(instance.query)
    target = float(phi_q[0] @ f)

    values, norms = _Moments(), _Moments()
    for n in _chunks(N):
        _, A_t, phi_t, phi_res, A_res = _draw_rounds(instance, n, rng)
        phi_x = np.broadcast_to(phi_q, phi_t.shape)
        q, norm = batched_kgr_features(phi_x, phi_t, phi_res, A_res == a)
        values.add(q * (phi_t @ f) * (A_t == a))
        norms.add(norm)

    bias = values.mean - target
    flags = []
    if instance.beta > 0:
        bound = instance.beta * norms.mean + 1.0 / (instance.beta * (instance.M + 1))
    else:
        bound = math.inf
        flags.append("beta=0: bound is infinite")
    logger.debug("bias audit: bias=%.6g bound=%.6g stderr=%.3g", bias, bound, values.stderr)
    return AuditResult("bias", abs(bias), bound, values.stderr, N, flags, {"empirical_bias": bias, "target": target})


def overestimation_audit(instance: AuditInstance, N: int, rng: np.random.Generator) -> AuditResult:
    """
    E[l_hat(x, a)] - l(x, a) <= 1/(beta (M + 1)).

    The bonus makes the estimate optimistic: it may under-estimate by a lot
    but over-estimates by at most the truncation remainder.
    """
    kernel, a = instance.kernel, instance.a
    f = np.asarray(instance.coeffs, dtype=float)[a]
    phi_q = kernel.features(instance.query)
    target = float(phi_q[0] @ f)

    values = _Moments()
    for n in _chunks(N):
        _, A_t, phi_t, phi_res, A_res = _draw_rounds(instance, n, rng)
        phi_x = np.broadcast_to(phi_q, phi_t.shape)
        q, norm = batched_kgr_features(phi_x, phi_t, phi_res, A_res == a)
        values.add(q * (phi_t @ f) * (A_t == a) - instance.beta * norm)

    flags = []
    if instance.beta > 0:
        bound = 1.0 / (instance.beta * (instance.M + 1))
    else:
        bound = math.inf
        flags.append("beta=0: bound is infinite")
    return AuditResult("overestimation", values.mean - target, bound, values.stderr, N, flags)


def underestimation_audit(instance: AuditInstance, N: int, rng: np.random.Generator) -> AuditResult:
    """
    l(x, a) - E[l_hat(x, a)] <= 2 beta E ||phi(x)||^2_{Sigma+} + 1/(beta (M + 1)).

    The shortfall is the bias plus the bonus, so the bound is the bias bound
    with the bonus term counted twice.
    """
    kernel, a = instance.kernel, instance.a
    f = np.asarray(instance.coeffs, dtype=float)[a]
    phi_q = kernel.features(instance.query)
    target = float(phi_q[0] @ f)

    values, norms = _Moments(), _Moments()
    for n in _chunks(N):
        _, A_t, phi_t, phi_res, A_res = _draw_rounds(instance, n, rng)
        phi_x = np.broadcast_to(phi_q, phi_t.shape)
        q, norm = batched_kgr_features(phi_x, phi_t, phi_res, A_res == a)
        values.add(q * (phi_t @ f) * (A_t == a) - instance.beta * norm)
        norms.add(norm)

    flags = []
    if instance.beta > 0:
        bound = 2.0 * instance.beta * norms.mean + 1.0 / (instance.beta * (instance.M + 1))
    else:
        bound = math.inf
        flags.append("beta=0: bound is infinite")
    return AuditResult("underestimation", target - values.mean, bound, values.stderr, N, flags,
                       {"mean_sigma_norm": norms.mean})


# ==============================
# SECOND MOMENT
# ==============================

def second_moment_audit(
    instance: AuditInstance,
    N: int,
    eps: float,
    rng: np.random.Generator,
) -> AuditResult:
    """
    E[sum_a pi(a | X_0) <phi(X_0), f_tilde_a>^2] <= 2K (1 + m(eps) + M eps).

    Only a = A_t contributes, so each realization adds
    pi(A_t | X_0) (q_{A_t}(X_0) l(X_t, A_t))^2 with a fresh X_0 ~ D.
    """
    kernel, K, M = instance.kernel, instance.K, instance.M
    coeffs = np.asarray(instance.coeffs, dtype=float)
    m_eps = truncation_index(kernel.eigenvalues, eps)

    values = _Moments()
    for n in _chunks(N):
        _, A_t, phi_t, phi_res, A_res = _draw_rounds(instance, n, rng)
        X_0 = instance.contexts.sample(rng, n)
        phi_0 = kernel.features(X_0)
        probs_0 = instance.policy(X_0)
        active = A_res == A_t[:, None]
        q, _ = batched_kgr_features(phi_0, phi_t, phi_res, active)
        played_loss = np.einsum("nd,nd->n", phi_t, coeffs[A_t])
        pi_played = probs_0[np.arange(n), A_t]
        values.add(pi_played * (q * played_loss) ** 2)

    bound = 2.0 * K * (1.0 + m_eps + M * eps)
    return AuditResult("second_moment", values.mean, bound, values.stderr, N, [], {"eps": float(eps), "m_eps": m_eps})


# ==============================
# TRACE AUDIT
# ==============================

def default_trace_profiles() -> List[DecayProfile]:
    """g = 1 profiles with c in {1, 2, 3}; the polynomial family needs c > 1."""
    profiles = [DecayProfile("exponential", 1.0, c) for c in (1.0, 2.0, 3.0)]
    profiles += [DecayProfile("polynomial", 1.0, c) for c in (2.0, 3.0)]
    return profiles


def trace_audit(
    profiles: Optional[Sequence[DecayProfile]] = None,
    M_values: Sequence[int] = (4, 16, 64),
    eps_grid: Sequence[float] = EPS_GRID,
    N: int = 1_000_000,
    rng: Optional[np.random.Generator] = None,
    D_trunc: int = 32,
) -> List[Dict]:
    """
    tr(I - (I - Sigma)^{M+1}) <= m(eps) + (M + 1) eps on a profile x M x eps grid.

    Sigma is estimated once per profile under uniform contexts and a policy
    that always plays the audited action. The exponent M is reported next to
    M + 1 and checked against m(eps) + M eps.

    Returns:
        list of dict: one cell per (profile, M, eps) with traces, bounds and pass flags
    """
    rng = np.random.default_rng() if rng is None else rng
    profiles = default_trace_profiles() if profiles is None else list(profiles)
    cells = []
    for profile in profiles:
        kernel = synthetic_kernel(profile, D_trunc)
        contexts = UniformContexts(d=kernel.d)
        est = sigma_estimate(kernel, contexts, lambda X: np.ones((X.shape[0], 1)), 0, N, rng)
        for M in M_values:
            trace_m = effective_dim_trace(est.sigma, M)
            trace_m1 = effective_dim_trace(est.sigma, M + 1)
            allow_m = MC_SIGMAS * est.trace_allowance(M)
            allow_m1 = MC_SIGMAS * est.trace_allowance(M + 1)
            for eps in eps_grid:
                m_eps = truncation_index(profile, eps)
                cell = {
                    "profile": profile.to_dict(),
                    "M": int(M),
                    "eps": float(eps),
                    "m_eps": int(m_eps),
                    "trace_M": trace_m,
                    "bound_M": m_eps + M * eps,
                    "allowance_M": allow_m,
                    "trace_M_plus_1": trace_m1,
                    "bound_M_plus_1": m_eps + (M + 1) * eps,
                    "allowance_M_plus_1": allow_m1,
                }
                cell["holds_M"] = bool(trace_m <= cell["bound_M"] + allow_m)
                cell["holds"] = bool(trace_m1 <= cell["bound_M_plus_1"] + allow_m1)
                cells.append(cell)
        logger.info("trace audit %s(g=%g, c=%g): %d cells", profile.kind, profile.g, profile.c,
                    len(M_values) * len(eps_grid))
    return cells
