"""Kernel Geometric Resampling: closed forms, oracle agreement, compiled buffer."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_block
from estimators import (
    BlockGramCache,
    CompiledBuffer,
    ResampleBlock,
    cumulative_estimate,
    kgr,
    kgr_eval_budget,
    load_buffer,
    point_estimate,
    save_buffer,
)
from harness.suites import oracle_check, random_instance
from oracle import oracle_kgr


def _rel_err(value, reference):
    return abs(value - reference) / max(1e-3, abs(reference))


def _with_actions(block, resample_a):
    return ResampleBlock(block.t, block.x, block.a, block.loss, block.resample_x, resample_a)


# ==============================
# CLOSED FORMS
# ==============================

def test_single_matching_resample_formula(exp_kernel, rng):
    block = _with_actions(make_block(rng, M=1, K=2), [1])
    x = np.array([0.35])
    k = exp_kernel.eval
    result = kgr(x, 1, block, 0.4, exp_kernel)
    X1 = block.resample_x[0]
    assert result.q == pytest.approx(2 * k(x, block.x) - k(x, X1) * k(X1, block.x), abs=1e-14)
    assert result.b == pytest.approx(0.4 * (2 * k(x, x) - k(x, X1) ** 2), abs=1e-14)


@pytest.mark.parametrize("M", [0, 1, 7])
def test_no_matching_resamples(exp_kernel, rng, M):
    block = _with_actions(make_block(rng, M=M, K=3), np.full(M, 2, dtype=int))
    x = np.array([0.8])
    result = kgr(x, 0, block, 0.25, exp_kernel)
    assert result.q == pytest.approx((M + 1) * exp_kernel.eval(x, block.x), abs=1e-14)
    assert result.b == pytest.approx(0.25 * (M + 1) * exp_kernel.eval(x, x), abs=1e-14)


def test_negative_beta_rejected(exp_kernel, rng):
    with pytest.raises(ValueError):
        kgr([0.5], 0, make_block(rng, M=2, K=2), -0.1, exp_kernel)


def test_block_rejects_out_of_range_loss():
    with pytest.raises(ValueError):
        ResampleBlock(t=1, x=[0.5], a=0, loss=1.5, resample_x=np.zeros((0, 1)), resample_a=[])


# ==============================
# ORACLE AGREEMENT
# ==============================

@given(seed=st.integers(0, 2 ** 32 - 1))
@settings(max_examples=200, deadline=None)
def test_kgr_matches_oracle(seed):
    inst = random_instance(np.random.default_rng(seed))
    result = kgr(inst["x"], inst["a"], inst["block"], inst["beta"], inst["kernel"])
    q_ref, b_ref = oracle_kgr(inst["x"], inst["a"], inst["block"], inst["beta"], inst["kernel"])
    assert _rel_err(result.q, q_ref) <= 1e-10
    assert _rel_err(result.b, b_ref) <= 1e-10


def test_small_bonus_matches_oracle_relatively(exp_kernel, rng):
    block = make_block(rng, M=6, K=2)
    for beta in (1e-6, 1e-9):
        result = kgr([0.3], 0, block, beta, exp_kernel)
        _, b_ref = oracle_kgr([0.3], 0, block, beta, exp_kernel)
        assert abs(b_ref) < 1e-3
        assert abs(result.b - b_ref) <= 1e-10 * abs(b_ref)


def test_oracle_check_report():
    report = oracle_check(n_instances=200, seed=7)
    assert report["passed"]
    assert report["budget_violations"] == 0
    assert report["n_instances"] == 200


def test_large_M_against_oracle(exp_kernel, rng):
    block = make_block(rng, M=48, K=2)
    for a in (0, 1):
        result = kgr([0.1], a, block, 0.7, exp_kernel)
        q_ref, b_ref = oracle_kgr([0.1], a, block, 0.7, exp_kernel)
        assert _rel_err(result.q, q_ref) <= 1e-10
        assert _rel_err(result.b, b_ref) <= 1e-10


# ==============================
# KERNEL EVALUATION ACCOUNTING
# ==============================

@pytest.mark.parametrize("M", [1, 2, 5, 16, 64])
def test_eval_count_within_budget(exp_kernel, rng, M):
    # every resample matches the query action: the most expensive case
    block = _with_actions(make_block(rng, M=M, K=2), np.zeros(M, dtype=int))
    result = kgr([0.5], 0, block, 1.0, exp_kernel)
    assert result.kernel_eval_count <= kgr_eval_budget(M)
    assert result.kernel_eval_count == M * (M - 1) // 2 + 2 * M + 2


def test_shared_cache_skips_block_pairs(exp_kernel, rng):
    block = _with_actions(make_block(rng, M=10, K=2), np.zeros(10, dtype=int))
    cache = BlockGramCache()
    first = kgr([0.2], 0, block, 1.0, exp_kernel, cache=cache)
    second = kgr([0.9], 0, block, 1.0, exp_kernel, cache=cache)
    assert second.kernel_eval_count == 2 + 10
    assert second.kernel_eval_count < first.kernel_eval_count
    fresh = kgr([0.9], 0, block, 1.0, exp_kernel)
    assert second.q == pytest.approx(fresh.q, abs=1e-14)


def test_bonus_magnitude_bounded(exp_kernel, rng):
    for _ in range(50):
        M = int(rng.integers(0, 12))
        block = make_block(rng, M=M, K=2)
        x = rng.random(1)
        result = kgr(x, 0, block, 0.5, exp_kernel)
        assert abs(result.b) <= 0.5 * (M + 1) * exp_kernel.eval(x, x) + 1e-12


# ==============================
# POINT AND CUMULATIVE ESTIMATES
# ==============================

def test_point_estimate_drops_loss_for_other_actions(exp_kernel, rng):
    block = make_block(rng, M=4, K=3)
    other = (block.a + 1) % 3
    result = kgr([0.4], other, block, 0.2, exp_kernel)
    assert point_estimate([0.4], other, block, 0.2, exp_kernel) == pytest.approx(-result.b)

    played = kgr([0.4], block.a, block, 0.2, exp_kernel)
    expected = played.q * block.loss - played.b
    assert point_estimate([0.4], block.a, block, 0.2, exp_kernel) == pytest.approx(expected)


def test_cumulative_estimate_empty_buffer(exp_kernel):
    assert cumulative_estimate([0.3], 0, [], 1.0, exp_kernel) == 0.0


def test_cumulative_estimate_sums_blocks(exp_kernel, rng):
    blocks = [make_block(rng, M=3, K=2, t=t) for t in range(1, 6)]
    caches = {}
    total = cumulative_estimate([0.7], 1, blocks, 0.1, exp_kernel, caches=caches)
    expected = sum(point_estimate([0.7], 1, b, 0.1, exp_kernel) for b in blocks)
    assert total == pytest.approx(expected, abs=1e-13)
    assert sorted(caches) == [1, 2, 3, 4, 5]


# ==============================
# COMPILED BUFFER
# ==============================

@pytest.mark.parametrize("M", [0, 1, 6])
def test_compiled_buffer_matches_kgr(exp_kernel, rng, M):
    K, beta = 3, 0.15
    buffer = CompiledBuffer(exp_kernel, K, M, beta)
    blocks = [make_block(rng, M=M, K=K, t=t) for t in range(1, 21)]
    for block in blocks:
        assert buffer.append(block) == M * M + M
    X = rng.random((7, 1))
    est = buffer.per_block_estimates(X)
    assert est.shape == (7, 20, K)
    for q in range(7):
        for i, block in enumerate(blocks):
            for a in range(K):
                assert est[q, i, a] == pytest.approx(point_estimate(X[q], a, block, beta, exp_kernel), abs=1e-11)


def test_compiled_tail_and_prefix_sums(exp_kernel, rng):
    buffer = CompiledBuffer(exp_kernel, 2, 3, 0.3)
    for t in range(1, 40):
        buffer.append(make_block(rng, M=3, K=2, t=t))
    X = rng.random((5, 1))
    full = buffer.per_block_estimates(X)
    np.testing.assert_allclose(buffer.per_block_estimates(X, start=30), full[:, 30:], atol=1e-13)
    assert buffer.per_block_estimates(X, start=39).shape == (5, 0, 2)

    path = buffer.cumulative_path(X)
    assert path.shape == (5, 40, 2)
    assert not path[:, 0].any()
    np.testing.assert_allclose(path[:, -1], buffer.cumulative(X), atol=1e-12)


def test_compiled_eval_counter(exp_kernel, rng):
    buffer = CompiledBuffer(exp_kernel, 2, 4, 0.1)
    for t in range(1, 11):
        buffer.append(make_block(rng, M=4, K=2, t=t))
    before = buffer.kernel_evals
    assert before == 10 * (16 + 4)
    buffer.cumulative(rng.random((3, 1)))
    assert buffer.kernel_evals - before == buffer.query_eval_count(3) == 3 * (10 * 4 + 10 + 1)


def test_compiled_rejects_mismatched_blocks(exp_kernel, rng):
    buffer = CompiledBuffer(exp_kernel, 2, 3, 0.1)
    with pytest.raises(ValueError):
        buffer.append(make_block(rng, M=2, K=2))
    with pytest.raises(ValueError):
        buffer.append(ResampleBlock(1, [0.5], 4, 0.0, np.zeros((3, 1)), [0, 0, 0]))
    with pytest.raises(ValueError):
        CompiledBuffer(exp_kernel, 0, 3, 0.1)


# ==============================
# BUFFER FILES
# ==============================

def test_buffer_file_reload(tmp_path, exp_kernel, rng):
    blocks = [make_block(rng, M=2, K=3, t=t) for t in range(1, 9)]
    path = str(tmp_path / "buffer.jsonl")
    assert save_buffer(blocks, path) == 8
    loaded = load_buffer(path)
    assert [b.t for b in loaded] == list(range(1, 9))
    for original, copy in zip(blocks, loaded):
        assert point_estimate([0.5], 1, copy, 0.2, exp_kernel) == point_estimate([0.5], 1, original, 0.2, exp_kernel)


def test_buffer_file_rejects_disorder(tmp_path, rng):
    path = tmp_path / "buffer.jsonl"
    lines = [json.dumps(make_block(rng, M=1, K=2, t=t).to_dict()) for t in (2, 1)]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        load_buffer(str(path))


def test_buffer_file_rejects_malformed_line(tmp_path):
    path = tmp_path / "buffer.jsonl"
    path.write_text('{"t": 1, "x": [0.5]}\n')
    with pytest.raises(ValueError):
        load_buffer(str(path))


def test_buffer_file_rejects_short_resample_entry(tmp_path):
    path = tmp_path / "buffer.jsonl"
    path.write_text('{"t": 1, "x": [0.5], "a": 0, "loss": 0.1, "resamples": [[[0.2]]]}\n')
    with pytest.raises(ValueError, match="buffer.jsonl:1: malformed"):
        load_buffer(str(path))
