"""Monte Carlo estimator audits and the property suites."""

import math

import numpy as np
import pytest

from environments.contexts import UniformContexts
from estimators import (
    AuditInstance,
    AuditResult,
    AuditViolation,
    bias_audit,
    overestimation_audit,
    second_moment_audit,
    trace_audit,
    underestimation_audit,
)
from harness.suites import audit_suite, estimator_audits, estimator_instance, smooth_policy
from kernels import DecayProfile


def test_zero_loss_function_has_zero_bias(exp_kernel, rng):
    instance = AuditInstance(
        kernel=exp_kernel,
        contexts=UniformContexts(),
        policy=smooth_policy,
        coeffs=np.zeros((2, exp_kernel.dimension)),
        beta=0.1,
        M=4,
        query=np.array([0.5]),
    )
    result = bias_audit(instance, 5000, rng)
    assert result.statistic == 0.0
    assert result.details["target"] == 0.0
    assert result.holds


@pytest.mark.parametrize("beta,M", [(0.05, 4), (0.2, 8)])
def test_estimator_audits_hold(rng, beta, M):
    instance = estimator_instance(beta, M, rng)
    for result in (
        bias_audit(instance, 20_000, rng),
        overestimation_audit(instance, 20_000, rng),
        underestimation_audit(instance, 20_000, rng),
        second_moment_audit(instance, 20_000, 0.1, rng),
    ):
        assert result.n_samples == 20_000
        assert result.mc_stderr > 0
        result.check()


def test_bias_statistic_is_absolute_bias(rng):
    instance = estimator_instance(0.5, 3, rng)
    result = bias_audit(instance, 2000, rng)
    assert math.isfinite(result.bound)
    assert result.statistic == pytest.approx(abs(result.details["empirical_bias"]))


def test_zero_beta_is_flagged(rng):
    instance = estimator_instance(0.0, 4, rng)
    for audit in (bias_audit, overestimation_audit, underestimation_audit):
        result = audit(instance, 1000, rng)
        assert result.bound == math.inf
        assert result.flags
        assert result.holds


def test_second_moment_reports_truncation(rng):
    instance = estimator_instance(0.1, 4, rng)
    result = second_moment_audit(instance, 1000, 0.1, rng)
    assert result.details["m_eps"] >= 1
    assert result.bound == pytest.approx(2 * 2 * (1 + result.details["m_eps"] + 4 * 0.1))


def test_violation_raises():
    result = AuditResult("bias", statistic=2.0, bound=1.0, mc_stderr=0.1, n_samples=10)
    assert not result.holds
    with pytest.raises(AuditViolation):
        result.check()
    assert result.to_dict()["holds"] is False


def test_audits_need_samples(rng):
    with pytest.raises(ValueError):
        bias_audit(estimator_instance(0.1, 2, rng), 0, rng)


def test_trace_audit_small_grid(rng):
    cells = trace_audit(
        profiles=[DecayProfile("exponential", 1.0, 1.0), DecayProfile("polynomial", 1.0, 2.0)],
        M_values=(4, 16),
        eps_grid=(0.1, 0.01),
        N=20_000,
        rng=rng,
        D_trunc=16,
    )
    assert len(cells) == 8
    for cell in cells:
        assert cell["holds"]
        assert cell["trace_M"] <= cell["trace_M_plus_1"] + 1e-12
        assert cell["bound_M_plus_1"] == pytest.approx(cell["m_eps"] + (cell["M"] + 1) * cell["eps"])


def test_quick_suites():
    report = audit_suite(seed=1, scale=0.01, only=["ftrl", "ftrl_regret"])
    assert report["passed"]
    assert report["ftrl"]["max_normalization_error"] <= 1e-12
    assert set(report["ftrl_regret"]["scales"]) == {"5.0", "50.0"}
    with pytest.raises(ValueError):
        audit_suite(only=["nonsense"])


@pytest.mark.slow
def test_full_estimator_audits():
    report = estimator_audits(np.random.default_rng(0))
    assert report["passed"]
    assert len(report["cells"]) == 16


@pytest.mark.slow
def test_full_trace_audit():
    cells = trace_audit(rng=np.random.default_rng(0))
    assert len(cells) == 5 * 3 * 9
    assert all(cell["holds"] for cell in cells)


def test_underestimation_is_shortfall_of_overestimation(rng):
    instance = estimator_instance(0.2, 4, rng)
    seed = 99
    over = overestimation_audit(instance, 5000, np.random.default_rng(seed))
    under = underestimation_audit(instance, 5000, np.random.default_rng(seed))
    assert under.statistic == pytest.approx(-over.statistic, abs=1e-12)
    assert under.mc_stderr == pytest.approx(over.mc_stderr)
    expected = 2 * 0.2 * under.details["mean_sigma_norm"] + 1.0 / (0.2 * 5)
    assert under.bound == pytest.approx(expected)
    assert under.holds


def test_estimator_suite_includes_underestimation():
    report = audit_suite(seed=2, scale=0.01, only=["estimator"])
    names = {cell["name"] for cell in report["estimator"]["cells"]}
    assert names == {"bias", "overestimation", "underestimation", "second_moment"}
    assert report["passed"]
