"""Schedules, RNG streams, configs, the simulation loop, regret and result files."""

import json
import math
import os

import numpy as np
import pandas as pd
import pytest

from environments import GridContexts, LossSequence, ReplayAdversary
from estimators import cumulative_estimate
from harness import (
    ConfigError,
    ExperimentConfig,
    KernelSpec,
    RngStreams,
    ScheduleSpec,
    SeedSpec,
    accounting_bound,
    build_contexts,
    build_kernel,
    checkpoints,
    config_from_dict,
    decomposition_diagnostic,
    empirical_regret,
    load_config,
    overestimation_bound,
    regret_bound,
    resolve_schedule,
    run,
    slope_fit,
    sweep,
    tuned_params,
    write_run_outputs,
)
from harness.rng import PLAY, RESAMPLE_CONTEXT
from kernels import DecayProfile
from policy import solve_policy

CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


def small_config(**overrides) -> ExperimentConfig:
    base = {
        "T": 24,
        "K": 3,
        "eval_contexts": 16,
        "kernel": {"kind": "synthetic", "decay": "exponential", "g": 1.0, "c": 1.0, "D_trunc": 8},
        "adversary": {"kind": "oblivious", "radius": 1.0, "drift": 0.2},
        "schedule": {"kind": "tuned", "max_m": 4},
        "seeds": {"master": 3},
    }
    base.update(overrides)
    return config_from_dict(base)


# ==============================
# SCHEDULES
# ==============================

def test_decay_tuned_schedule_examples():
    exp = tuned_params(10_000, DecayProfile("exponential", 1.0, 1.0), max_m=None)
    assert exp.eta == pytest.approx(0.030349, abs=5e-7)
    assert exp.beta == exp.eta
    assert exp.M == 10_000
    poly = tuned_params(10_000, DecayProfile("polynomial", 1.0, 2.0))
    assert poly.eta == pytest.approx(0.0030349, abs=5e-8)
    assert poly.M == 16 and poly.M_uncapped == 10_000


def test_schedule_at_horizon_e():
    params = tuned_params(math.e, DecayProfile("exponential", 1.0, 1.0))
    assert params.eta == pytest.approx(math.sqrt(1 / math.e))
    assert params.M == 2


def test_schedule_rejects_short_horizon():
    with pytest.raises(ValueError):
        tuned_params(1, DecayProfile("exponential", 1.0, 1.0))


def test_bounds_infinite_without_bonus():
    assert overestimation_bound(100, 4, 0.0) == math.inf
    assert regret_bound(100, 2, 4, 0.1, 0.0, 0.1, 3) == math.inf
    assert overestimation_bound(100, 4, 0.5) == pytest.approx(40.0)


# ==============================
# RNG STREAMS
# ==============================

def test_streams_are_reproducible_and_separated():
    a = RngStreams(11).generator("policy", PLAY, round=5).random(4)
    b = RngStreams(11).generator("policy", PLAY, round=5).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, RngStreams(11).generator("policy", PLAY, round=6).random(4))
    assert not np.array_equal(a, RngStreams(11).generator("resample", PLAY, round=5).random(4))
    assert not np.array_equal(a, RngStreams(12).generator("policy", PLAY, round=5).random(4))


def test_stream_override_touches_one_stream():
    base = RngStreams(11)
    moved = RngStreams(11, {"resample": 99})
    np.testing.assert_array_equal(
        base.generator("policy", PLAY, 1).random(3), moved.generator("policy", PLAY, 1).random(3)
    )
    assert not np.array_equal(
        base.generator("resample", RESAMPLE_CONTEXT, 1).random(3),
        moved.generator("resample", RESAMPLE_CONTEXT, 1).random(3),
    )
    assert moved.to_dict()["resample"] == 99


def test_unknown_stream_rejected():
    with pytest.raises(ValueError):
        RngStreams(0, {"weather": 1})
    with pytest.raises(ValueError):
        RngStreams(0).seed_of("weather")


# ==============================
# CONFIG
# ==============================

def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"T": 10, "horizon": 10})
    with pytest.raises(ConfigError):
        config_from_dict({"kernel": {"kind": "synthetic", "bandwidth": 2}})


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"K": 0})
    with pytest.raises(ConfigError):
        config_from_dict({"schedule": {"kind": "manual"}, "M": 4})
    with pytest.raises(ConfigError):
        config_from_dict({"learner": "exp4"})


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIGS)))
def test_shipped_configs_load(name):
    config = load_config(os.path.join(CONFIGS, name))
    kernel = build_kernel(config.kernel)
    build_contexts(config.contexts, kernel)


def test_lists_become_tuples():
    config = config_from_dict({"sweep": {"horizons": [8, 16], "seeds": [1]}, "checkpoints": [1, 5]})
    assert config.sweep.horizons == (8, 16)
    assert config.checkpoints == (1, 5)


def test_with_overrides():
    config = small_config(M=10).with_overrides(seed=42, out="elsewhere", max_m=3, threads=2, T=50)
    assert config.seeds.master == 42
    assert config.output.dir == "elsewhere"
    assert config.schedule.max_m == 3 and config.M == 3
    assert config.threads == 2 and config.T == 50


def test_resolve_schedule_prefers_explicit_values():
    config = small_config(eta=0.5)
    params = resolve_schedule(config, build_kernel(config.kernel))
    assert params.eta == 0.5
    assert params.M == 4
    assert params.beta == pytest.approx(math.sqrt(math.log(24) / 24))


def test_unknown_kernel_kind():
    with pytest.raises(ConfigError):
        build_kernel(KernelSpec(kind="laplacian"))


# ==============================
# SIMULATION
# ==============================

def test_first_round_is_uniform():
    config = small_config(T=1, M=2, eta=1.0, beta=0.1, schedule={"kind": "manual"})
    record = run(config)
    assert record.rounds == 1 and record.complete
    np.testing.assert_allclose(record.probs[0], 1 / 3)
    np.testing.assert_allclose(record.eval_policies[0], 1 / 3)


def test_zero_adversary_has_zero_regret():
    config = small_config(adversary={"kind": "fixed", "radius": 0.0})
    record = run(config)
    kernel = build_kernel(config.kernel)
    assert not record.losses.any()
    np.testing.assert_allclose(empirical_regret(record, kernel).regret, 0.0)


def test_runs_are_deterministic():
    config = small_config()
    first, second = run(config), run(config)
    assert first.fingerprint() == second.fingerprint()
    np.testing.assert_array_equal(first.actions, second.actions)
    other = run(config.with_overrides(seed=4))
    assert other.fingerprint() != first.fingerprint()


def test_wall_cap_returns_partial_record():
    config = small_config(T=50, max_wall_seconds=1e-9)
    record = run(config)
    assert not record.complete
    assert record.rounds < 50
    assert record.eval_estimates.shape[0] == record.rounds + 1


def test_uniform_learner_on_single_context(two_term_kernel):
    # f_a = l_a phi(0) / ||phi(0)||^2 realizes loss l_a at x = 0
    T = 10
    ell = np.array([0.2, 0.8])
    phi0 = two_term_kernel.features([0.0])[0]
    coeffs = np.tile(ell[:, None] * phi0[None, :] / 0.75, (T, 1, 1))
    config = config_from_dict({"T": T, "K": 2, "learner": "uniform", "schedule": {"kind": "manual"}})
    record = run(
        config,
        kernel=two_term_kernel,
        contexts=GridContexts(points=[[0.0]]),
        adversary=ReplayAdversary(two_term_kernel, 2, LossSequence(coeffs)),
    )
    curve = empirical_regret(record, two_term_kernel)
    assert curve.exact
    assert curve.checkpoints.tolist() == [1, 2, 4, 8, 10]
    np.testing.assert_allclose(curve.regret, 0.3 * curve.checkpoints, atol=1e-12)
    assert record.total_kernel_evals == 0


def test_regret_matches_brute_force():
    config = small_config(T=20)
    kernel = build_kernel(config.kernel)
    record = run(config, kernel=kernel)
    phi = kernel.features(record.eval_points)
    coeffs = record.loss_sequence.coeffs
    per_point = []
    for n in range(phi.shape[0]):
        values = np.array([[phi[n] @ coeffs[t, a] for a in range(3)] for t in range(20)])
        learner = sum(record.eval_policies[t, n] @ values[t] for t in range(20))
        per_point.append(learner - values.sum(axis=0).min())
    curve = empirical_regret(record, kernel)
    assert curve.final == pytest.approx(np.mean(per_point), abs=1e-12)
    assert curve.final_stderr == pytest.approx(np.std(per_point, ddof=1) / math.sqrt(len(per_point)))


def test_policies_follow_buffered_estimates():
    config = small_config(T=12)
    kernel = build_kernel(config.kernel)
    record = run(config, kernel=kernel)
    p = record.params
    for t in (1, 6, 12):
        blocks = record.buffer[: t - 1]
        for x, stored in ((record.contexts[t - 1], record.probs[t - 1]),
                          (record.eval_points[0], record.eval_policies[t - 1, 0])):
            L = [cumulative_estimate(x, a, blocks, p.beta, kernel) for a in range(3)]
            np.testing.assert_allclose(solve_policy(L, p.eta).probs, stored, atol=1e-9)


def test_kernel_evaluations_within_accounting():
    config = small_config(T=30)
    record = run(config)
    E = record.eval_points.shape[0]
    for t, count in enumerate(record.kernel_evals, start=1):
        assert 0 < count <= accounting_bound(t, record.params.M, E)


def test_eval_only_kernel_cannot_run():
    with pytest.raises(NotImplementedError):
        run(small_config(kernel={"kind": "gaussian"}, M=2, eta=0.1, beta=0.1))


# ==============================
# REGRET TOOLS
# ==============================

def test_checkpoints():
    assert checkpoints(10) == [1, 2, 4, 8, 10]
    assert checkpoints(8) == [1, 2, 4, 8]
    assert checkpoints(0) == []
    assert checkpoints(10, custom=[3, 7, 12]) == [3, 7, 10]
    assert checkpoints(12, custom=[7, 3]) == [3, 7, 12]


def test_slope_fit_exact_rates():
    T = np.array([256, 512, 1024, 2048])
    assert slope_fit(T, np.sqrt(T)).slope == pytest.approx(0.5)
    assert slope_fit(T, 3 * T).slope == pytest.approx(1.0)


def test_slope_fit_noisy_square_root(rng):
    T = 2.0 ** np.arange(8, 15)
    R = np.sqrt(T) * np.exp(rng.normal(0.0, 0.02, T.size))
    assert 0.45 <= slope_fit(T, R).slope <= 0.55


def test_slope_fit_drops_non_positive():
    fit = slope_fit([1, 2, 4, 8], [-1.0, 2.0, 4.0, 8.0])
    assert fit.dropped == 1 and fit.n_used == 3
    with pytest.raises(ValueError):
        slope_fit([1, 2, 4], [0.0, 1.0, 2.0])


def test_decomposition_adds_up():
    config = small_config(T=16, contexts={"kind": "grid", "n_points": 4}, adversary={"kind": "fixed"})
    kernel = build_kernel(config.kernel)
    contexts = build_contexts(config.contexts, kernel)
    record = run(config, kernel=kernel, contexts=contexts)
    diag = decomposition_diagnostic(record, kernel, contexts, 400)
    parts = diag["R_tilde"]["mean"] + diag["B_star"]["mean"] + diag["B"]["mean"]
    assert parts == pytest.approx(diag["total"]["mean"], abs=1e-9)
    assert diag["sum_gap"] <= 5 * diag["total"]["stderr"] + 1e-9
    assert diag["T"] == 16 and diag["n_eval"] == 400
    bound = diag["bounds"]["underestimation"]
    assert diag["B_within_bound"] == (diag["B"]["mean"] <= bound + 3 * diag["B"]["stderr"])


@pytest.mark.slow
def test_decomposition_on_discrete_grid_config():
    config = load_config(os.path.join(CONFIGS, "discrete_grid.json"))
    kernel = build_kernel(config.kernel)
    contexts = build_contexts(config.contexts, kernel)
    record = run(config, kernel=kernel, contexts=contexts)
    diag = decomposition_diagnostic(record, kernel, contexts, config.diagnostics)
    assert diag["consistent"]
    assert diag["B_star_within_bound"]
    assert diag["B_within_bound"]


def test_sweep_table():
    table, summary = sweep(small_config(), horizons=[8, 16, 32], seeds=[1, 2], n_jobs=1)
    assert len(table) == 6
    assert list(table["T"]) == [8, 8, 16, 16, 32, 32]
    assert summary["horizons"] == [8, 16, 32]
    assert len(summary["mean_regret"]) == 3


@pytest.mark.slow
def test_rate_check_config_is_sublinear():
    config = load_config(os.path.join(CONFIGS, "rate_check.json"))
    assert config.sweep.horizons == (256, 512, 1024, 2048)
    assert len(config.sweep.seeds) == 8
    table, summary = sweep(config, config.sweep.horizons, config.sweep.seeds, n_jobs=config.threads)
    assert len(table) == 32 and table["complete"].all()
    assert summary["positive"] and summary["increasing"]
    assert summary["slope_points"] == 4
    assert summary["slope"] <= 0.75


# ==============================
# RESULT FILES
# ==============================

def test_run_outputs_written_and_reproducible(tmp_path):
    config = small_config(T=20, output={"buffer": True})
    kernel = build_kernel(config.kernel)
    contents = []
    for name in ("a", "b"):
        record = run(config, kernel=kernel)
        curve = empirical_regret(record, kernel)
        written = write_run_outputs(record, curve, str(tmp_path / name), buffer=True)
        assert {os.path.basename(p) for p in written} == {
            "regret.csv", "run.json", "buffer.jsonl", "loss_sequence.json"
        }
        contents.append({os.path.basename(p): open(p, "rb").read() for p in written})
    assert contents[0] == contents[1]

    frame = pd.read_csv(tmp_path / "a" / "regret.csv")
    assert list(frame.columns) == ["T_checkpoint", "cum_regret", "stderr"]
    assert frame["T_checkpoint"].tolist() == [1, 2, 4, 8, 16, 20]
    summary = json.loads((tmp_path / "a" / "run.json").read_text())
    assert summary["complete"] and summary["rounds"] == 20
    assert summary["fingerprint"] == record.fingerprint()
    assert "wall_times" not in json.dumps(summary)
    assert len((tmp_path / "a" / "buffer.jsonl").read_text().splitlines()) == 20
    assert summary["params"]["eta"] == record.params.eta
    assert summary["regret"]["cum_regret"] == curve.regret.tolist()
    exact = pd.read_csv(tmp_path / "a" / "regret.csv", float_precision="round_trip")
    assert exact["cum_regret"].tolist() == curve.regret.tolist()


def test_seed_section_override():
    config = small_config(seeds={"master": 3, "adversary": 8})
    assert config.seeds == SeedSpec(master=3, adversary=8)
    assert run(config).seeds["adversary"] == 8


def test_manual_schedule_without_learning_needs_no_parameters():
    config = ExperimentConfig(learner="uniform", schedule=ScheduleSpec(kind="manual"), T=4)
    assert resolve_schedule(config, build_kernel(config.kernel)).M == 0
