"""
harness/suites.py

Batch suites behind the command-line subcommands:
- audit_suite: FTRL correctness, log-barrier regret audits and the Monte Carlo
  estimator audits on fixed instances
- oracle_check: kgr and the compiled buffer against the feature-space oracle
- sweep: independent runs over a (horizon, seed) grid with a log-log slope fit
"""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from environments.adversaries import random_directions
from environments.contexts import UniformContexts
from estimators.audits import (
    AuditInstance,
    bias_audit,
    overestimation_audit,
    second_moment_audit,
    trace_audit,
    underestimation_audit,
)
from estimators.compiled import CompiledBuffer
from estimators.kgr import ResampleBlock, kgr, kgr_eval_budget, point_estimate
from kernels.decay import DecayProfile
from kernels.mercer import CosineMercerKernel, synthetic_kernel
from oracle.feature_oracle import oracle_kgr
from policy.log_barrier import ftrl_objective, regret_audit, solve_policy

from .config import ExperimentConfig, build_kernel
from .regret import empirical_regret, slope_fit
from .simulator import run

logger = logging.getLogger(__name__)

SUITES = ("ftrl", "ftrl_regret", "trace", "estimator")
ORACLE_RTOL = 1e-10
ORACLE_REL_FLOOR = 1e-3


def _scaled(n: int, scale: float) -> int:
    return max(1, int(round(n * scale)))


# ==============================
# FTRL
# ==============================

def ftrl_audit(rng: np.random.Generator, n_solves: int = 10_000, n_grid_checks: int = 100) -> Dict:
    """Normalization and KKT residual on random solves; K = 2 solutions against a 10^4-point grid."""
    worst_norm = 0.0
    worst_kkt = 0.0
    for _ in range(n_solves):
        K = int(rng.integers(1, 9))
        L = rng.uniform(-100.0, 100.0, K)
        eta = float(10 ** rng.uniform(-4.0, 1.0))
        pol = solve_policy(L, eta)
        worst_norm = max(worst_norm, abs(pol.probs.sum() - 1.0))
        worst_kkt = max(worst_kkt, pol.kkt_residual)

    grid = np.linspace(0.0, 1.0, 10_002)[1:-1]
    grid_failures = 0
    for _ in range(n_grid_checks):
        L = rng.uniform(-100.0, 100.0, 2)
        eta = float(10 ** rng.uniform(-4.0, 1.0))
        best = ftrl_objective(solve_policy(L, eta).probs, L, eta)
        grid_values = -np.log(grid) - np.log1p(-grid) + eta * (grid * L[0] + (1.0 - grid) * L[1])
        if best > grid_values.min() + 1e-12 * (1.0 + abs(best)):
            grid_failures += 1
    return {
        "n_solves": n_solves,
        "max_normalization_error": worst_norm,
        "max_kkt_residual": worst_kkt,
        "grid_failures": grid_failures,
        "passed": worst_norm <= 1e-12 and worst_kkt <= 1e-9 and grid_failures == 0,
    }


def ftrl_regret_audit(
    rng: np.random.Generator,
    n_sequences: int = 1000,
    T: int = 200,
    scales: Sequence[float] = (5.0, 50.0),
) -> Dict:
    """Log-barrier regret inequality on random loss sequences, bounded and stress-range."""
    out = {"T": T, "n_sequences": n_sequences, "scales": {}}
    passed = True
    for scale in scales:
        violations = 0
        worst_slack = -math.inf
        for _ in range(n_sequences):
            K = int(rng.choice([2, 3, 5]))
            losses = rng.uniform(-scale, scale, (T, K))
            eta = float(10 ** rng.uniform(-2.0, 0.0))
            y = 0.5 * rng.dirichlet(np.ones(K)) + 0.5 / K
            audit = regret_audit(losses, eta, y)
            worst_slack = max(worst_slack, audit.measured_regret - audit.bound)
            violations += not audit.holds
        out["scales"][str(scale)] = {"violations": violations, "max_measured_minus_bound": worst_slack}
        passed = passed and violations == 0
    out["passed"] = passed
    return out


# ==============================
# ESTIMATOR AUDITS
# ==============================

def smooth_policy(X: np.ndarray) -> np.ndarray:
    """Two-action policy leaning towards action 0 as the first coordinate grows."""
    p0 = 0.25 + 0.5 * np.clip(X[:, 0], 0.0, 1.0)
    return np.column_stack([p0, 1.0 - p0])


def estimator_instance(beta: float, M: int, rng: np.random.Generator, D: int = 8, query: float = 0.3) -> AuditInstance:
    """K = 2 audit instance on an exponential-decay kernel with D_trunc = D."""
    kernel = synthetic_kernel(DecayProfile("exponential", 1.0, 1.0), D)
    return AuditInstance(
        kernel=kernel,
        contexts=UniformContexts(d=1),
        policy=smooth_policy,
        coeffs=random_directions(rng, 2, D),
        beta=beta,
        M=M,
        query=np.array([query]),
        a=0,
    )


def estimator_audits(
    rng: np.random.Generator,
    N: int = 100_000,
    betas: Sequence[float] = (0.05, 0.2),
    Ms: Sequence[int] = (4, 16),
    eps: float = 0.1,
) -> Dict:
    """Bias, over-estimation, under-estimation and second-moment audits on every (beta, M) instance."""
    results = []
    for beta in betas:
        for M in Ms:
            instance = estimator_instance(beta, M, rng)
            for result in (
                bias_audit(instance, N, rng),
                overestimation_audit(instance, N, rng),
                underestimation_audit(instance, N, rng),
                second_moment_audit(instance, N, eps, rng),
            ):
                row = result.to_dict()
                row.update({"beta": beta, "M": M})
                results.append(row)
                logger.info("%s beta=%g M=%d: %.4g <= %.4g (+/- %.2g) %s", result.name, beta, M,
                            result.statistic, result.bound, result.mc_stderr, "ok" if result.holds else "VIOLATED")
    return {"cells": results, "passed": all(r["holds"] for r in results)}


def audit_suite(seed: int = 0, scale: float = 1.0, only: Optional[Iterable[str]] = None) -> Dict:
    """
    Run the property suites.

    Args:
        seed: Seed of the suite's own generator
        scale: Multiplier on every sample and instance count (1.0 = full size)
        only: Subset of SUITES to run

    Returns:
        dict: one entry per suite plus an overall "passed" flag
    """
    selected = list(SUITES if only is None else only)
    unknown = set(selected) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown audit suites: {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    report = {"seed": seed, "scale": scale}
    if "ftrl" in selected:
        report["ftrl"] = ftrl_audit(rng, _scaled(10_000, scale), _scaled(100, scale))
    if "ftrl_regret" in selected:
        report["ftrl_regret"] = ftrl_regret_audit(rng, _scaled(1000, scale))
    if "trace" in selected:
        cells = trace_audit(N=_scaled(1_000_000, scale), rng=rng)
        report["trace"] = {"cells": cells, "passed": all(c["holds"] for c in cells)}
    if "estimator" in selected:
        report["estimator"] = estimator_audits(rng, _scaled(100_000, scale))
    report["passed"] = all(report[name]["passed"] for name in selected)
    return report


# ==============================
# ORACLE CHECK
# ==============================

def random_instance(rng: np.random.Generator, max_D: int = 16, max_M: int = 8, max_K: int = 4) -> Dict:
    """A random kernel, block and query for the equivalence check."""
    D = int(rng.integers(1, max_D + 1))
    M = int(rng.integers(0, max_M + 1))
    K = int(rng.integers(1, max_K + 1))
    mu = rng.random(D) + 1e-3
    mu = mu / mu.sum() * rng.uniform(0.5, 1.0)
    block = ResampleBlock(
        t=1,
        x=rng.random(1),
        a=int(rng.integers(K)),
        loss=float(rng.uniform(-1.0, 1.0)),
        resample_x=rng.random((M, 1)),
        resample_a=rng.integers(0, K, M),
    )
    return {
        "kernel": CosineMercerKernel(mu),
        "block": block,
        "K": K,
        "x": rng.random(1),
        "a": int(rng.integers(K)),
        "beta": float(rng.uniform(0.0, 1.0)),
    }


def _rel_err(value: float, reference: float) -> float:
    return abs(value - reference) / max(ORACLE_REL_FLOOR, abs(reference))


def oracle_check(n_instances: int = 1000, seed: int = 0, max_D: int = 16, max_M: int = 8, max_K: int = 4,
                 dump: bool = False) -> Dict:
    """
    kgr and CompiledBuffer against oracle_kgr on random instances.

    Errors are relative, |value - oracle| / max(|oracle|, 1e-3); the floor only
    matters for references that cancel to nearly zero, where rounding in the
    O(1) kernel terms dominates.
    """
    rng = np.random.default_rng(seed)
    worst_q = worst_b = worst_compiled = 0.0
    budget_violations = 0
    dumped = []
    for i in range(n_instances):
        inst = random_instance(rng, max_D, max_M, max_K)
        kernel, block, x, a, beta = inst["kernel"], inst["block"], inst["x"], inst["a"], inst["beta"]
        result = kgr(x, a, block, beta, kernel)
        q_ref, b_ref = oracle_kgr(x, a, block, beta, kernel)
        err_q, err_b = _rel_err(result.q, q_ref), _rel_err(result.b, b_ref)

        compiled = CompiledBuffer(kernel, inst["K"], block.M, beta)
        compiled.append(block)
        direct = point_estimate(x, a, block, beta, kernel)
        err_c = _rel_err(float(compiled.per_block_estimates(x)[0, 0, a]), direct)

        worst_q, worst_b, worst_compiled = max(worst_q, err_q), max(worst_b, err_b), max(worst_compiled, err_c)
        if result.kernel_eval_count > kgr_eval_budget(block.M):
            budget_violations += 1
        if dump:
            dumped.append({
                "index": i,
                "D": kernel.dimension,
                "M": block.M,
                "K": inst["K"],
                "eigenvalues": kernel.eigenvalues,
                "block": block.to_dict(),
                "x": x,
                "a": a,
                "beta": beta,
                "q": result.q,
                "q_oracle": q_ref,
                "b": result.b,
                "b_oracle": b_ref,
                "kernel_evals": result.kernel_eval_count,
            })
    report = {
        "n_instances": n_instances,
        "seed": seed,
        "max_rel_err_q": worst_q,
        "max_rel_err_b": worst_b,
        "max_rel_err_compiled": worst_compiled,
        "budget_violations": budget_violations,
        "passed": max(worst_q, worst_b, worst_compiled) <= ORACLE_RTOL and budget_violations == 0,
    }
    if dump:
        report["instances"] = dumped
    return report


# ==============================
# SWEEP
# ==============================

def _sweep_cell(config: ExperimentConfig, T: int, seed: int) -> Dict:
    cfg = config.with_overrides(seed=seed, T=T)
    kernel = build_kernel(cfg.kernel)
    record = run(cfg, kernel=kernel)
    curve = empirical_regret(record, kernel, at=cfg.checkpoints)
    return {
        "T": T,
        "seed": seed,
        "regret": curve.final,
        "stderr": curve.final_stderr,
        "M": record.params.M,
        "eta": record.params.eta,
        "beta": record.params.beta,
        "kernel_evals": record.total_kernel_evals,
        "complete": record.complete,
        "fingerprint": record.fingerprint(),
    }


def sweep(config: ExperimentConfig, horizons: Sequence[int], seeds: Sequence[int], n_jobs: int = 1):
    """
    Independent runs over horizons x seeds.

    Returns:
        (pd.DataFrame, dict): one row per run, and a summary with mean regret per
        horizon and the fitted log-log slope
    """
    if not horizons or not seeds:
        raise ValueError("a sweep needs at least one horizon and one seed")
    cells = [(int(T), int(s)) for T in horizons for s in seeds]
    logger.info("sweep: %d runs on %d worker(s)", len(cells), n_jobs)
    rows = Parallel(n_jobs=n_jobs)(delayed(_sweep_cell)(config, T, s) for T, s in cells)
    table = pd.DataFrame(rows).sort_values(["T", "seed"]).reset_index(drop=True)

    grouped = table.groupby("T")["regret"]
    means = grouped.mean()
    summary = {
        "horizons": [int(T) for T in means.index],
        "mean_regret": [float(v) for v in means.values],
        "stderr_across_seeds": [float(v) if math.isfinite(v) else 0.0 for v in grouped.sem().values],
        "n_seeds": len(seeds),
    }
    try:
        fit = slope_fit(means.index.to_numpy(dtype=float), means.to_numpy())
        summary["slope"] = fit.slope
        summary["slope_points"] = fit.n_used
    except ValueError as e:
        logger.warning("slope fit skipped: %s", e)
        summary["slope"] = None
    summary["increasing"] = bool(np.all(np.diff(means.to_numpy()) > 0))
    summary["positive"] = bool(np.all(means.to_numpy() > 0))
    return table, summary
