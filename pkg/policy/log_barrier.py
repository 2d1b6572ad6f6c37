"""
policy/log_barrier.py

Follow-the-regularized-leader over the simplex with the log-barrier
regularizer Psi(p) = sum_a ln(1/p_a).

The minimizer of Psi(p) + eta <p, L> satisfies p_a = 1/(eta L_a + lambda),
with lambda the unique root of sum_a 1/(eta L_a + lambda) = 1 on
lambda > -eta min_a L. Shifting s_a = eta (L_a - min L) >= 0 and
lambda' = lambda + eta min L, the root lies in [1, K]: the s_a = 0 term
forces lambda' >= 1, and every term is <= 1/K at lambda' = K.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-13
MAX_ITER = 200
AUDIT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PolicyDistribution:
    """A point of the K-simplex together with its dual multiplier and KKT residual."""

    probs: np.ndarray
    dual_lambda: float
    kkt_residual: float

    @property
    def K(self) -> int:
        return int(self.probs.shape[0])


def log_barrier(p) -> float:
    """Psi(p) = sum_a ln(1/p_a); +inf on the boundary of the simplex."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        return math.inf
    return float(-np.sum(np.log(p)))


def ftrl_objective(p, L, eta: float) -> float:
    """Psi(p) + eta <p, L>."""
    return log_barrier(p) + eta * float(np.dot(p, L))


def uniform_policy(K: int) -> PolicyDistribution:
    """The minimizer of Psi alone (zero cumulative loss)."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return PolicyDistribution(probs=np.full(K, 1.0 / K), dual_lambda=float(K), kkt_residual=0.0)


def _check_eta(eta: float) -> None:
    if not (eta > 0 and math.isfinite(eta)):
        raise ValueError(f"eta must be finite and > 0, got {eta}")


def _shifted_roots(s: np.ndarray) -> np.ndarray:
    """Row-wise root lambda' in [1, K] of sum_a 1/(s_a + lambda') = 1 for shifts s >= 0."""
    n, K = s.shape
    lo = np.ones(n)
    hi = np.full(n, float(K))
    lam = lo.copy()
    active = np.ones(n, dtype=bool)
    g = np.zeros(n)
    for _ in range(MAX_ITER):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        inv = 1.0 / (s[idx] + lam[idx, None])
        g_idx = inv.sum(axis=1) - 1.0
        g[idx] = g_idx
        converged = np.abs(g_idx) <= ROOT_TOL
        lo[idx] = np.where(g_idx > 0, lam[idx], lo[idx])
        hi[idx] = np.where(g_idx > 0, hi[idx], lam[idx])
        newton = lam[idx] + g_idx / np.sum(inv * inv, axis=1)
        inside = (lo[idx] < newton) & (newton < hi[idx])
        if not np.all(inside | converged):
            logger.debug("newton step left the bracket on %d rows, bisecting", int(np.sum(~(inside | converged))))
        step = np.where(inside, newton, 0.5 * (lo[idx] + hi[idx]))
        lam[idx] = np.where(converged, lam[idx], step)
        collapsed = hi[idx] - lo[idx] <= 4 * np.finfo(float).eps * hi[idx]
        active[idx] = ~(converged | collapsed)
    else:
        if np.any(active):
            logger.warning("log-barrier solve hit %d iterations on %d rows (max residual %.3g)",
                           MAX_ITER, int(active.sum()), float(np.max(np.abs(g[active]))))
    return lam


def solve_policy_batch(L, eta: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Row-wise log-barrier FTRL solve for an (n, K) matrix of cumulative losses.

    Returns:
        (probs, dual_lambda, kkt_residual) with shapes (n, K), (n,), (n,)
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[1] == 0:
        raise ValueError(f"need an (n, K) loss matrix with K >= 1, got shape {L.shape}")
    if not np.all(np.isfinite(L)):
        raise ValueError("cumulative losses must be finite")
    _check_eta(eta)

    L_min = L.min(axis=1)
    s = eta * (L - L_min[:, None])
    lam = _shifted_roots(s)
    probs = 1.0 / (s + lam[:, None])
    probs = probs / probs.sum(axis=1, keepdims=True)
    dual = lam - eta * L_min
    residual = np.max(np.abs(eta * L + dual[:, None] - 1.0 / probs), axis=1)
    return probs, dual, residual


def solve_policy(L, eta: float) -> PolicyDistribution:
    """
    argmin_{p in simplex} Psi(p) + eta sum_a p_a L_a.

    Safeguarded Newton on the dual variable with bisection fallback, to
    |sum_a p_a - 1| <= 1e-13.

    Args:
        L: Cumulative loss estimates, length K (any finite reals)
        eta: Learning rate (> 0)

    Returns:
        PolicyDistribution

    Examples:
        >>> solve_policy([0.0, 0.0, 0.0, 0.0], 1.0).probs
        array([0.25, 0.25, 0.25, 0.25])
    """
    L = np.asarray(L, dtype=float).ravel()
    if L.size == 0:
        raise ValueError("need at least one action")
    if not np.all(np.isfinite(L)):
        raise ValueError(f"cumulative losses must be finite, got {L.tolist()}")
    probs, dual, residual = solve_policy_batch(L[None, :], eta)
    return PolicyDistribution(probs=probs[0], dual_lambda=float(dual[0]), kkt_residual=float(residual[0]))


def sample_action(policy: PolicyDistribution, rng: np.random.Generator) -> int:
    """Categorical draw from a policy distribution (0-based action index)."""
    if policy.K == 1:
        return 0
    return int(rng.choice(policy.K, p=policy.probs))


# ==============================
# LOG-BARRIER REGRET AUDIT
# ==============================

@dataclass(frozen=True)
class RegretAudit:
    """Measured regret of the replayed iterates against y, and the guaranteed bound."""

    measured_regret: float
    bound: float
    T: int

    @property
    def holds(self) -> bool:
        return self.measured_regret <= self.bound + AUDIT_TOL * (1.0 + abs(self.bound))


def regret_audit(losses, eta: float, comparator, K: Optional[int] = None) -> RegretAudit:
    """
    Replay log-barrier FTRL on an arbitrary loss sequence and check its regret bound.

    The iterate of round t minimizes over the losses of rounds 1..t (its own
    round included). The bound is
        (Psi(y) - Psi(p_1)) / eta + eta sum_t sum_a p_{t,a} c_{t,a}^2.

    Args:
        losses: (T, K) loss vectors c_t, any real values
        eta: Learning rate (> 0)
        comparator: y, strictly inside the simplex

    Returns:
        RegretAudit
    """
    y = np.asarray(comparator, dtype=float).ravel()
    K = y.size if K is None else K
    c = np.asarray(losses, dtype=float).reshape(-1, K)
    if y.size != K:
        raise ValueError(f"comparator has {y.size} entries, losses have {K} actions")
    if np.any(y <= 0) or abs(y.sum() - 1.0) > 1e-9:
        raise ValueError("comparator must lie strictly inside the simplex")

    cumulative = np.zeros(K)
    measured = 0.0
    stability = 0.0
    first = uniform_policy(K).probs
    for t in range(c.shape[0]):
        cumulative += c[t]
        p = solve_policy(cumulative, eta).probs
        if t == 0:
            first = p
        measured += float(np.dot(p - y, c[t]))
        stability += float(np.dot(p, c[t] ** 2))

    bound = (log_barrier(y) - log_barrier(first)) / eta + eta * stability
    return RegretAudit(measured_regret=measured, bound=bound, T=int(c.shape[0]))
