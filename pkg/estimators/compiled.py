"""
estimators/compiled.py

Vectorized buffer replay for the simulation loop.

The coefficients of one block are linear in the query row u = (kappa(x, X(i)))_i:

    p = P_a u,   P_a = -(I + D_a L)^{-1} D_a,

with L the strictly lower triangle of the resample Gram matrix and D_a the
indicator diagonal 1{A(i) = a}. Because p_i enters every later step, with
weights w_i = M - i (0-based),

    q(x, a) = (M + 1) kappa(x, X_t) + u . P_a^T (w * r),
    b(x, a) = beta ((M + 1) kappa(x, x) + u^T diag(w) P_a u),

where r_i = kappa(X(i), X_t). Each block is compiled once when appended; a
batch of Q query contexts then costs Q (nM + n + 1) kernel evaluations for an
n-block buffer and matches kgr() exactly.
"""

import logging
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from kernels.mercer import MercerKernel

from .kgr import ResampleBlock

logger = logging.getLogger(__name__)

QUERY_CHUNK = 256


def compile_block(G: np.ndarray, r: np.ndarray, resample_a: np.ndarray, K: int):
    """
    Per-action linear forms of one block.

    Args:
        G: (M, M) Gram matrix of the resampled contexts
        r: (M,) kernel values kappa(X(i), X_t)
        resample_a: (M,) resampled actions
        K: Number of actions

    Returns:
        (w, S): w of shape (K, M) and S of shape (K, M, M)
    """
    M = resample_a.shape[0]
    w = np.zeros((K, M))
    S = np.zeros((K, M, M))
    if M == 0:
        return w, S
    weights = (M - np.arange(M)).astype(float)
    lower = np.tril(G, -1)
    eye = np.eye(M)
    for a in range(K):
        ind = (resample_a == a).astype(float)
        if not ind.any():
            continue
        system = eye + ind[:, None] * lower
        P = -solve_triangular(system, np.diag(ind), lower=True, unit_diagonal=True)
        w[a] = P.T @ (weights * r)
        S[a] = weights[:, None] * P
    return w, S


class CompiledBuffer:
    """
    Growing buffer of compiled blocks answering batched L_hat queries.

    Single-writer: append() is called by the simulation loop only. Queries
    read the compiled arrays and bump the evaluation counter.
    """

    def __init__(self, kernel: MercerKernel, K: int, M: int, beta: float):
        if K < 1:
            raise ValueError(f"K must be >= 1, got {K}")
        if M < 0:
            raise ValueError(f"M must be >= 0, got {M}")
        if beta < 0:
            raise ValueError(f"beta must be >= 0, got {beta}")
        self.kernel = kernel
        self.K = int(K)
        self.M = int(M)
        self.beta = float(beta)
        self.n = 0
        self.kernel_evals = 0
        self._capacity = 0
        self._contexts = np.zeros((0, kernel.d))
        self._resample_x = np.zeros((0, kernel.d))
        self._actions = np.zeros(0, dtype=int)
        self._losses = np.zeros(0)
        self._w = np.zeros((0, self.K, self.M))
        self._S = np.zeros((0, self.K, self.M, self.M))

    def __len__(self) -> int:
        return self.n

    def _grow(self) -> None:
        capacity = max(16, 2 * self._capacity)
        d, K, M = self.kernel.d, self.K, self.M

        def resized(arr, shape):
            out = np.zeros(shape, dtype=arr.dtype)
            out[: self.n] = arr[: self.n]
            return out

        self._contexts = resized(self._contexts, (capacity, d))
        self._actions = resized(self._actions, (capacity,))
        self._losses = resized(self._losses, (capacity,))
        self._w = resized(self._w, (capacity, K, M))
        self._S = resized(self._S, (capacity, K, M, M))
        rx = np.zeros((capacity * M, d))
        rx[: self.n * M] = self._resample_x[: self.n * M]
        self._resample_x = rx
        self._capacity = capacity

    def append(self, block: ResampleBlock) -> int:
        """Compile and store one block; returns the kernel evaluations spent."""
        if block.M != self.M:
            raise ValueError(f"block {block.t} has M = {block.M}, buffer expects {self.M}")
        if block.a >= self.K or np.any(block.resample_a >= self.K):
            raise ValueError(f"block {block.t} has an action outside 0..{self.K - 1}")
        if self.n == self._capacity:
            self._grow()

        evals = 0
        if self.M > 0:
            G = self.kernel.gram(block.resample_x)
            r = self.kernel.gram(block.resample_x, block.x[None, :])[:, 0]
            evals = self.M * self.M + self.M
            w, S = compile_block(G, r, block.resample_a, self.K)
            self._w[self.n] = w
            self._S[self.n] = S
            self._resample_x[self.n * self.M:(self.n + 1) * self.M] = block.resample_x

        self._contexts[self.n] = block.x
        self._actions[self.n] = block.a
        self._losses[self.n] = block.loss
        self.n += 1
        self.kernel_evals += evals
        return evals

    def query_eval_count(self, Q: int, start: int = 0) -> int:
        """Kernel evaluations spent by a batch of Q queries against blocks start..n-1."""
        nb = self.n - start
        if nb <= 0:
            return 0
        return Q * (nb * self.M + nb + 1)

    def per_block_estimates(self, X, start: int = 0) -> np.ndarray:
        """
        l_hat_i(x, a) for every query row, block and action.

        Args:
            X: (Q, d) query contexts
            start: First block to evaluate; earlier blocks are skipped

        Returns:
            np.ndarray: shape (Q, n - start, K)
        """
        X = self.kernel.check_points(X)
        if not 0 <= start <= self.n:
            raise ValueError(f"start must lie in 0..{self.n}, got {start}")
        Q, n, M, K = X.shape[0], self.n - start, self.M, self.K
        out = np.zeros((Q, n, K))
        if n == 0:
            return out

        blocks = slice(start, self.n)
        w = self._w[blocks]
        S = self._S[blocks]
        played = self._actions[blocks]
        losses = self._losses[blocks]
        contexts = self._contexts[blocks]
        resample_x = self._resample_x[start * M:self.n * M]
        for lo in range(0, Q, QUERY_CHUNK):
            Xc = X[lo:lo + QUERY_CHUNK]
            kt = self.kernel.gram(Xc, contexts)
            kxx = self.kernel.diag(Xc)
            if M > 0:
                U = self.kernel.gram(Xc, resample_x).reshape(Xc.shape[0], n, M)
                Ut = U.transpose(1, 0, 2)
            for a in range(K):
                q = (M + 1) * kt
                quad = np.zeros_like(kt)
                if M > 0:
                    q = q + np.einsum("qnm,nm->qn", U, w[:, a])
                    V = np.matmul(Ut, S[:, a])
                    quad = np.einsum("nqm,nqm->qn", V, Ut)
                b = self.beta * ((M + 1) * kxx[:, None] + quad)
                out[lo:lo + QUERY_CHUNK, :, a] = q * (losses * (played == a))[None, :] - b

        self.kernel_evals += self.query_eval_count(Q, start)
        return out

    def cumulative(self, X) -> np.ndarray:
        """L_hat(x, a) over the whole buffer; shape (Q, K)."""
        return self.per_block_estimates(X).sum(axis=1)

    def cumulative_path(self, X, upto: Optional[int] = None) -> np.ndarray:
        """
        Prefix sums L_hat_0..L_hat_n at every query row.

        Returns:
            np.ndarray: shape (Q, n + 1, K), index t holds the sum over the first t blocks
        """
        est = self.per_block_estimates(X)
        if upto is not None:
            est = est[:, :upto]
        zeros = np.zeros((est.shape[0], 1, self.K))
        return np.concatenate([zeros, np.cumsum(est, axis=1)], axis=1)
