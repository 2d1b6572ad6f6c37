"""
harness/regret.py

Regret curves, the three-term regret decomposition and log-log slope fits.

Regret at horizon T compares the learner's expected loss (under the stored
policies, not the sampled actions) with the best fixed context-to-action map
pi*_T(x) = argmin_a sum_{t<=T} l_t(x, a), evaluated pointwise on the run's
evaluation contexts. With a finite context support those contexts are the
support itself and the expectation over X is exact.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from environments.adversaries import LossSequence
from estimators.compiled import CompiledBuffer
from kernels.mercer import MercerKernel
from policy.log_barrier import solve_policy_batch

from .rng import DIAGNOSTIC, STREAMS, RngStreams
from .schedules import auxiliary_regret_bound, overestimation_bound, underestimation_bound
from .simulator import RunRecord

logger = logging.getLogger(__name__)

MC_SIGMAS = 3.0


def checkpoints(T: int, custom: Optional[Sequence[int]] = None) -> List[int]:
    """
    Powers of two up to T, plus T itself. Custom marks beyond T are dropped
    and the final round is always kept.

    Examples:
        >>> checkpoints(10)
        [1, 2, 4, 8, 10]
        >>> checkpoints(10, custom=[3, 7, 12])
        [3, 7, 10]
    """
    if T < 1:
        return []
    if custom:
        return sorted({int(c) for c in custom if 1 <= c <= T} | {T})
    out = []
    c = 1
    while c <= T:
        out.append(c)
        c *= 2
    if out[-1] != T:
        out.append(T)
    return out


@dataclass(frozen=True)
class RegretCurve:
    checkpoints: np.ndarray
    regret: np.ndarray
    stderr: np.ndarray
    exact: bool

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "T_checkpoint": self.checkpoints.astype(int),
            "cum_regret": self.regret,
            "stderr": self.stderr,
        })

    @property
    def final(self) -> float:
        return float(self.regret[-1]) if self.regret.size else 0.0

    @property
    def final_stderr(self) -> float:
        return float(self.stderr[-1]) if self.stderr.size else 0.0


def _mean_and_stderr(values: np.ndarray, weights: np.ndarray, exact: bool):
    mean = float(np.dot(weights, values))
    if exact or values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


def empirical_regret(
    record: RunRecord,
    kernel: MercerKernel,
    sequence: Optional[LossSequence] = None,
    at: Optional[Sequence[int]] = None,
) -> RegretCurve:
    """
    Cumulative regret at every checkpoint.

    Args:
        record: A finished (or partial) run
        kernel: The run's kernel, used to evaluate the loss functions
        sequence: Loss sequence to score against; defaults to the one the run recorded
        at: Custom checkpoints; defaults to powers of two and the final round

    Returns:
        RegretCurve: exact (stderr 0) for finite context supports, otherwise the
        mean over evaluation contexts with its standard error
    """
    sequence = record.loss_sequence if sequence is None else sequence
    if sequence is None:
        raise ValueError("empirical regret needs the adversary's loss sequence")
    T = record.rounds
    if sequence.T < T:
        raise ValueError(f"loss sequence covers {sequence.T} rounds, the run has {T}")
    marks = checkpoints(T, at)
    if T == 0:
        return RegretCurve(np.zeros(0, dtype=int), np.zeros(0), np.zeros(0), record.eval_discrete)

    values = sequence.values(record.eval_points, kernel)[:T]
    learner = np.cumsum(np.sum(record.eval_policies[:T] * values, axis=2), axis=0)
    totals = np.cumsum(values, axis=0)

    regret, stderr = [], []
    for c in marks:
        per_point = learner[c - 1] - totals[c - 1].min(axis=1)
        mean, se = _mean_and_stderr(per_point, record.eval_weights, record.eval_discrete)
        regret.append(mean)
        stderr.append(se)
    return RegretCurve(np.array(marks), np.array(regret), np.array(stderr), record.eval_discrete)


# ==============================
# DECOMPOSITION
# ==============================

def decomposition_diagnostic(
    record: RunRecord,
    kernel: MercerKernel,
    contexts,
    n_eval: int,
    streams: Optional[RngStreams] = None,
) -> Dict:
    """
    Monte Carlo estimates of R = R_tilde + B* + B on fresh contexts X_0 ~ D.

    Per context, with l_hat the buffer's estimates and pi_t the policy they induce:
        R_tilde = sum_t <pi_t, l_hat_t> - l_hat_t(pi*)
        B*      = sum_t l_hat_t(pi*) - l_t(pi*)
        B       = sum_t <pi_t, l_t - l_hat_t>

    The three terms add up to the conditional regret at X_0; their mean is
    checked against empirical_regret within the combined standard error.
    """
    if n_eval < 1:
        raise ValueError(f"n_eval must be >= 1, got {n_eval}")
    if not record.buffer and record.rounds > 0:
        raise ValueError("the decomposition needs a run that kept a resample buffer")
    params = record.params
    T, K = record.rounds, record.K
    if streams is None:
        streams = RngStreams(record.seeds["master"], {name: record.seeds[name] for name in STREAMS})
    X0 = contexts.sample(streams.generator("context", DIAGNOSTIC), n_eval)

    compiled = CompiledBuffer(kernel, K, params.M, params.beta)
    for block in record.buffer:
        compiled.append(block)
    est = compiled.per_block_estimates(X0)
    before = np.cumsum(est, axis=1) - est
    policies, _, _ = solve_policy_batch(before.reshape(-1, K), params.eta)
    policies = policies.reshape(n_eval, T, K)
    true = record.loss_sequence.values(X0, kernel)[:T].transpose(1, 0, 2)

    star = np.argmin(true.sum(axis=1), axis=1)
    rows = np.arange(n_eval)
    est_star = est[rows, :, star].sum(axis=1) if T else np.zeros(n_eval)
    true_star = true[rows, :, star].sum(axis=1) if T else np.zeros(n_eval)
    pi_est = np.sum(policies * est, axis=(1, 2))
    pi_true = np.sum(policies * true, axis=(1, 2))

    terms = {
        "R_tilde": pi_est - est_star,
        "B_star": est_star - true_star,
        "B": pi_true - pi_est,
    }
    terms["total"] = terms["R_tilde"] + terms["B_star"] + terms["B"]
    out = {}
    for name, values in terms.items():
        se = float(np.std(values, ddof=1) / math.sqrt(n_eval)) if n_eval > 1 else 0.0
        out[name] = {"mean": float(values.mean()), "stderr": se}

    curve = empirical_regret(record, kernel)
    combined = math.hypot(out["total"]["stderr"], curve.final_stderr)
    gap = abs(out["total"]["mean"] - curve.final)
    out["regret"] = {"mean": curve.final, "stderr": curve.final_stderr}
    out["sum_gap"] = gap
    out["consistent"] = bool(gap <= MC_SIGMAS * combined + 1e-9 * (1.0 + abs(curve.final)))

    eps, m_eps = params.eps, record.m_eps
    bounds = {"overestimation": overestimation_bound(T, params.M, params.beta)}
    if m_eps is not None:
        bounds["underestimation"] = underestimation_bound(T, K, params.M, params.beta, eps, m_eps)
        bounds["auxiliary_regret"] = auxiliary_regret_bound(T, K, params.M, params.eta, params.beta, eps, m_eps)
    out["bounds"] = bounds
    out["B_star_within_bound"] = bool(
        out["B_star"]["mean"] <= bounds["overestimation"] + MC_SIGMAS * out["B_star"]["stderr"]
    )
    if "underestimation" in bounds:
        out["B_within_bound"] = bool(
            out["B"]["mean"] <= bounds["underestimation"] + MC_SIGMAS * out["B"]["stderr"]
        )
    out["n_eval"] = int(n_eval)
    out["T"] = int(T)
    logger.info("decomposition: R_tilde=%.4g B*=%.4g B=%.4g regret=%.4g consistent=%s",
                out["R_tilde"]["mean"], out["B_star"]["mean"], out["B"]["mean"], curve.final, out["consistent"])
    return out


# ==============================
# RATE FITS
# ==============================

@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    n_used: int
    dropped: int


def slope_fit(horizons: Sequence[float], regrets: Sequence[float]) -> SlopeFit:
    """
    Least-squares slope of log R against log T.

    Non-positive regrets are dropped; fewer than three remaining points is an error.

    Examples:
        >>> round(slope_fit([100, 400, 1600], [10, 20, 40]).slope, 12)
        0.5
    """
    T = np.asarray(horizons, dtype=float)
    R = np.asarray(regrets, dtype=float)
    if T.shape != R.shape:
        raise ValueError("horizons and regrets must have the same length")
    keep = (R > 0) & (T > 0) & np.isfinite(R)
    if keep.sum() < 3:
        raise ValueError(f"need at least 3 positive regret values, got {int(keep.sum())}")
    slope, intercept = np.polyfit(np.log(T[keep]), np.log(R[keep]), 1)
    return SlopeFit(float(slope), float(intercept), int(keep.sum()), int((~keep).sum()))
