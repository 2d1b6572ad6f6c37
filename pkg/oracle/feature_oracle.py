"""
oracle/feature_oracle.py

Brute-force finite-dimensional oracle.

Works directly with the truncated feature vectors phi(x) in R^D and dense
D x D operators. Slow (O(D^2 M) per query) and only defined for kernels with an
explicit eigensystem; it is the ground truth the kernel-trick recursion is
checked against, and the engine behind the estimator audits.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh

from kernels.mercer import MercerKernel, UnsupportedKernelError

logger = logging.getLogger(__name__)

EIGEN_TOL = 1e-9
SAMPLE_CHUNK = 100_000

# policy(X) -> (n, K) action probabilities
Policy = Callable[[np.ndarray], np.ndarray]


def _require_eigensystem(kernel: MercerKernel) -> None:
    if not kernel.has_eigensystem:
        raise UnsupportedKernelError(f"{kernel.name} kernel has no explicit eigensystem")


def feature_map(kernel: MercerKernel, x) -> np.ndarray:
    """phi(x) = (sqrt(mu_i) psi_i(x))_i as a length-D vector."""
    _require_eigensystem(kernel)
    return kernel.features(x)[0]


def rank_one_updates(kernel: MercerKernel, block, a: int) -> list:
    """B_k = 1{A(k) = a} phi(X(k)) (x) phi(X(k)) for every resample of a block."""
    _require_eigensystem(kernel)
    D = kernel.dimension
    if block.M == 0:
        return []
    phi = kernel.features(block.resample_x)
    out = []
    for k in range(block.M):
        if block.resample_a[k] == a:
            out.append(np.outer(phi[k], phi[k]))
        else:
            out.append(np.zeros((D, D)))
    return out


def explicit_sigma_plus(blocks: Sequence[np.ndarray], dim: int = None) -> np.ndarray:
    """
    I + sum_{k=1}^M prod_{j=1}^k (I - B_j), by dense products.

    Args:
        blocks: The M matrices B_k, each D x D
        dim: D, required when blocks is empty

    Returns:
        np.ndarray: D x D operator

    Examples:
        >>> explicit_sigma_plus([], dim=2)
        array([[1., 0.],
               [0., 1.]])
    """
    if dim is None:
        if not blocks:
            raise ValueError("dim is required when no blocks are given")
        dim = np.asarray(blocks[0]).shape[0]
    eye = np.eye(dim)
    total = eye.copy()
    C = eye.copy()
    for k, B in enumerate(blocks):
        B = np.asarray(B, dtype=float)
        if B.shape != (dim, dim):
            raise ValueError(f"B_{k + 1} has shape {B.shape}, expected {(dim, dim)}")
        C = C @ (eye - B)
        total += C
    return total


def oracle_kgr(x, a: int, block, beta: float, kernel: MercerKernel) -> Tuple[float, float]:
    """
    Ground-truth (q, b) for one query against one block.

    q = <phi(x), Sigma+ phi(X_t)>, b = beta <phi(x), Sigma+ phi(x)>
    """
    _require_eigensystem(kernel)
    sigma_plus = explicit_sigma_plus(rank_one_updates(kernel, block, a), dim=kernel.dimension)
    phi_x = feature_map(kernel, x)
    phi_t = feature_map(kernel, block.x)
    q = float(phi_x @ sigma_plus @ phi_t)
    b = float(beta * (phi_x @ sigma_plus @ phi_x))
    return q, b


def batched_kgr_features(
    phi_x: np.ndarray,
    phi_t: np.ndarray,
    phi_res: np.ndarray,
    active: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    q and the bonus norm <phi(x), Sigma+ phi(x)> for N independent realizations.

    Args:
        phi_x: (N, D) query features
        phi_t: (N, D) played-context features
        phi_res: (N, M, D) resample features
        active: (N, M) boolean 1{A(k) = a}

    Returns:
        (q, norm): arrays of shape (N,)
    """
    z = phi_x.copy()
    q = np.einsum("nd,nd->n", z, phi_t)
    norm = np.einsum("nd,nd->n", z, phi_x)
    for k in range(phi_res.shape[1]):
        v = phi_res[:, k]
        coef = np.einsum("nd,nd->n", z, v) * active[:, k]
        z = z - coef[:, None] * v
        q += np.einsum("nd,nd->n", z, phi_t)
        norm += np.einsum("nd,nd->n", z, phi_x)
    return q, norm


def draw_actions(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Categorical draws, one per row of an (n, K) probability matrix."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    return np.minimum((cdf < u[:, None]).sum(axis=1), probs.shape[1] - 1)


@dataclass(frozen=True)
class SigmaEstimate:
    """Monte Carlo estimate of Sigma_a with its entrywise standard error."""

    sigma: np.ndarray
    stderr: np.ndarray
    n_samples: int

    def trace_allowance(self, M: int) -> float:
        """
        One-sigma error allowance for trace(I - (I - Sigma)^M).

        |tr f(A) - tr f(B)| <= Lip(f) ||A - B||_1 <= M sqrt(D) ||A - B||_F.
        """
        D = self.sigma.shape[0]
        return float(M * np.sqrt(D) * np.linalg.norm(self.stderr))


def sigma_estimate(
    kernel: MercerKernel,
    contexts,
    policy: Policy,
    a: int,
    N: int,
    rng: np.random.Generator,
) -> SigmaEstimate:
    """
    Monte Carlo Sigma_a = E[1{A = a} phi(X) (x) phi(X)], X ~ D, A ~ policy(.|X).

    Args:
        kernel: Kernel with explicit eigensystem
        contexts: Context distribution exposing sample(rng, n)
        policy: Batch policy, X (n, d) -> probabilities (n, K)
        a: Action
        N: Number of draws (>= 1)
        rng: Random generator

    Returns:
        SigmaEstimate
    """
    _require_eigensystem(kernel)
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    D = kernel.dimension
    total = np.zeros((D, D))
    total_sq = np.zeros((D, D))
    remaining = N
    while remaining > 0:
        n = min(remaining, SAMPLE_CHUNK)
        X = contexts.sample(rng, n)
        actions = draw_actions(rng, policy(X))
        ind = (actions == a).astype(float)
        phi = kernel.features(X)
        weighted = phi * ind[:, None]
        total += weighted.T @ phi
        total_sq += (weighted ** 2).T @ (phi ** 2)
        remaining -= n
    mean = total / N
    var = np.maximum(total_sq / N - mean ** 2, 0.0)
    stderr = np.sqrt(var / N)
    return SigmaEstimate(sigma=mean, stderr=stderr, n_samples=N)


def effective_dim_trace(sigma: np.ndarray, M: int) -> float:
    """
    trace(I - (I - Sigma)^M) via the symmetric eigendecomposition.

    Examples:
        >>> effective_dim_trace(np.diag([0.5, 0.25]), 2)
        1.1875
    """
    if M < 0:
        raise ValueError(f"M must be >= 0, got {M}")
    sigma = np.asarray(sigma, dtype=float)
    sym = 0.5 * (sigma + sigma.T)
    lam = eigh(sym, eigvals_only=True)
    if lam.size and (lam.min() < -EIGEN_TOL or lam.max() > 1.0 + EIGEN_TOL):
        raise ValueError(f"Sigma eigenvalues must lie in [0, 1], got [{lam.min()}, {lam.max()}]")
    lam = np.clip(lam, 0.0, 1.0)
    return float(np.sum(1.0 - (1.0 - lam) ** M))
