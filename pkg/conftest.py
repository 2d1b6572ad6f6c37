"""
Shared pytest fixtures.

The repository root goes on sys.path so the domain packages import the same
way the simulate.py script imports them.
"""

import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from estimators.kgr import ResampleBlock  # noqa: E402
from kernels.decay import DecayProfile  # noqa: E402
from kernels.mercer import CosineMercerKernel, synthetic_kernel  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale Monte Carlo runs")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_term_kernel():
    """mu = (0.5, 0.25) with psi_j(x) = cos(j pi x) on [0, 1]."""
    return CosineMercerKernel([0.5, 0.25])


@pytest.fixture
def exp_kernel():
    return synthetic_kernel(DecayProfile("exponential", 1.0, 1.0), 8)


def make_block(rng, M, K, t=1, d=1):
    return ResampleBlock(
        t=t,
        x=rng.random(d),
        a=int(rng.integers(K)),
        loss=float(rng.uniform(-1.0, 1.0)),
        resample_x=rng.random((M, d)),
        resample_a=rng.integers(0, K, M),
    )


@pytest.fixture
def block_factory(rng):
    """Random ResampleBlock builder: block_factory(M, K, t=1)."""
    def build(M, K, t=1):
        return make_block(rng, M, K, t=t)
    return build
