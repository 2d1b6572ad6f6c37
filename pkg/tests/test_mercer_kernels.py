"""Kernels, decay profiles and the truncation index."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernels import (
    ContextDomainError,
    CosineMercerKernel,
    DecayProfile,
    GaussianKernel,
    MaternKernel,
    UnsupportedKernelError,
    direct_tail_sum,
    kernel_eval,
    synthetic_kernel,
    tail_bound,
    truncation_index,
)

unit = st.floats(0.0, 1.0, allow_nan=False)
KERNELS = [
    CosineMercerKernel([0.5, 0.25]),
    synthetic_kernel(DecayProfile("polynomial", 1.0, 2.0), 16),
    GaussianKernel(d=1, lengthscale=0.2),
    MaternKernel(d=1, lengthscale=0.3, nu=2.5),
]


# ==============================
# EVALUATION
# ==============================

def test_two_term_mercer_sum_at_origin(two_term_kernel):
    assert kernel_eval(two_term_kernel, [0.0], [0.0]) == pytest.approx(0.75, abs=1e-12)


def test_gaussian_diagonal_is_one():
    k = GaussianKernel(d=2)
    assert kernel_eval(k, [0.3, 0.7], [0.3, 0.7]) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(k.diag(np.random.default_rng(0).random((5, 2))), 1.0)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
@given(x=unit, y=unit)
@settings(max_examples=200, deadline=None)
def test_symmetry(kernel, x, y):
    assert kernel_eval(kernel, [x], [y]) == pytest.approx(kernel_eval(kernel, [y], [x]), abs=1e-12)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_gram_is_positive_semidefinite(kernel, rng):
    G = kernel.gram(rng.random((60, 1)))
    assert np.linalg.eigvalsh(0.5 * (G + G.T)).min() >= -1e-9


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_diagonal_bounded_by_one(kernel, rng):
    assert np.all(kernel.diag(rng.random((200, 1))) <= 1.0 + 1e-12)


def test_eval_matches_explicit_mercer_sum(rng):
    kernel = synthetic_kernel(DecayProfile("exponential", 1.0, 0.5), 12)
    X, Y = rng.random(1000), rng.random(1000)
    j = np.arange(1, 13)
    expected = np.sum(kernel.eigenvalues * np.cos(np.pi * j * X[:, None]) * np.cos(np.pi * j * Y[:, None]), axis=1)
    got = np.array([kernel.eval([x], [y]) for x, y in zip(X, Y)])
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_point_outside_support_raises(two_term_kernel):
    with pytest.raises(ContextDomainError):
        kernel_eval(two_term_kernel, [1.5], [0.2])
    with pytest.raises(ContextDomainError):
        two_term_kernel.gram([[0.1], [-0.2]])


def test_eval_only_kernels_have_no_features():
    with pytest.raises(UnsupportedKernelError):
        GaussianKernel().features([[0.5]])


def test_eval_only_kernels_carry_decay_tags():
    assert GaussianKernel(d=2).decay_profile == DecayProfile("exponential", 1.0, 0.5)
    assert MaternKernel(d=1, nu=1.5).decay_profile == DecayProfile("polynomial", 1.0, 4.0)


def test_synthetic_kernel_rescales_to_unit_trace():
    kernel = synthetic_kernel(DecayProfile("polynomial", 1.0, 2.0), 50)
    assert kernel.eigenvalues.sum() == pytest.approx(1.0)
    profile_values = DecayProfile("polynomial", 1.0, 2.0).eigenvalues(50)
    assert np.all(kernel.eigenvalues <= profile_values + 1e-15)


def test_cosine_kernel_rejects_oversized_eigenvalues():
    with pytest.raises(ValueError):
        CosineMercerKernel([0.9, 0.5])


# ==============================
# DECAY PROFILES
# ==============================

def test_polynomial_profile_requires_c_above_one():
    with pytest.raises(ValueError):
        DecayProfile("polynomial", 1.0, 1.0)
    with pytest.raises(ValueError):
        DecayProfile("exponential", -1.0, 1.0)


def test_truncation_index_examples():
    assert truncation_index(DecayProfile("exponential", 1.0, 1.0), 0.01) == 5
    assert truncation_index(DecayProfile("polynomial", 1.0, 2.0), 0.1) == 10
    assert truncation_index([0.5, 0.25], 1.0) == 0
    assert truncation_index([0.5, 0.25], 0.3) == 1
    assert truncation_index([0.5, 0.25], 0.2) == 2


def test_truncation_index_rejects_non_positive_eps():
    with pytest.raises(ValueError):
        truncation_index([0.5], 0.0)


@pytest.mark.parametrize("profile", [
    DecayProfile("exponential", 1.0, 1.0),
    DecayProfile("exponential", 2.0, 0.3),
    DecayProfile("polynomial", 1.0, 2.0),
    DecayProfile("polynomial", 0.5, 3.0),
])
def test_truncation_index_monotone_in_eps(profile):
    eps_grid = np.logspace(-5, 0, 30)
    m = [truncation_index(profile, eps) for eps in eps_grid]
    assert all(a >= b for a, b in zip(m, m[1:]))


def test_tail_bound_examples():
    assert tail_bound(DecayProfile("exponential", 1.0, 1.0), 0) == pytest.approx(math.exp(-1) / (1 - math.exp(-1)))
    assert tail_bound(DecayProfile("polynomial", 1.0, 2.0), 10) == pytest.approx(0.1)
    assert tail_bound(DecayProfile("polynomial", 1.0, 2.0), 0) == math.inf


def test_direct_polynomial_tail_below_integral_bound():
    direct = direct_tail_sum(DecayProfile("polynomial", 1.0, 2.0), 10)
    assert direct == pytest.approx(0.09516633, rel=1e-6)
    assert direct <= 0.1


@pytest.mark.parametrize("profile", [
    DecayProfile("exponential", 1.0, 1.0),
    DecayProfile("exponential", 1.0, 3.0),
    DecayProfile("polynomial", 1.0, 3.0),
])
def test_direct_tail_never_exceeds_bound(profile):
    for m in (1, 2, 3, 5, 10, 30, 100):
        assert direct_tail_sum(profile, m) <= tail_bound(profile, m) * (1.0 + 1e-12)


def test_exact_tail_agrees_with_direct_summation():
    for profile in (DecayProfile("exponential", 1.0, 0.7), DecayProfile("polynomial", 1.0, 2.5)):
        for m in (0, 3, 40):
            assert profile.exact_tail(m) == pytest.approx(direct_tail_sum(profile, m), rel=1e-6)
