"""
estimators/kgr.py

Kernel Geometric Resampling loss estimates computed purely through kernel evaluations.

For a query (x, a) and one buffered round (X_t, A_t, loss, {X(k), A(k)}), the
estimator needs

    q(x, a) = <phi(x), Sigma+ phi(X_t)>,   b(x, a) = beta <phi(x), Sigma+ phi(x)>,
    Sigma+  = I + sum_k C_k,               C_k = prod_{j<=k} (I - 1{A(j)=a} phi(X(j)) (x) phi(X(j))).

Row vectors phi(x)^T C_k stay in the span of phi(x) and the resampled contexts:

    phi(x)^T C_k = phi(x)^T + sum_{i<=k} p_i phi(X(i))^T,
    p_k = -1{A(k)=a} (kappa(x, X(k)) + sum_{i<k} p_i kappa(X(i), X(k))),

and p_i never changes once set, so one pass over k costs O(M^2) kernel evaluations.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from kernels.mercer import MercerKernel

logger = logging.getLogger(__name__)

LOSS_TOL = 1e-12


# ==============================
# DATA TYPES
# ==============================

@dataclass(frozen=True, eq=False)
class ResampleBlock:
    """One round of the data buffer: the played pair, its loss and M resampled pairs."""

    t: int
    x: np.ndarray
    a: int
    loss: float
    resample_x: np.ndarray
    resample_a: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).ravel()
        d = x.size
        rx = np.array(self.resample_x, dtype=float).reshape(-1, d)
        ra = np.array(self.resample_a, dtype=int).ravel()
        if rx.shape[0] != ra.shape[0]:
            raise ValueError(f"block {self.t}: {rx.shape[0]} resampled contexts but {ra.shape[0]} actions")
        if not abs(self.loss) <= 1.0 + LOSS_TOL:
            raise ValueError(f"block {self.t}: observed loss {self.loss} outside [-1, 1]")
        if self.a < 0 or np.any(ra < 0):
            raise ValueError(f"block {self.t}: actions must be >= 0")
        for arr in (x, rx, ra):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "resample_x", rx)
        object.__setattr__(self, "resample_a", ra)
        object.__setattr__(self, "a", int(self.a))
        object.__setattr__(self, "loss", float(self.loss))

    @property
    def M(self) -> int:
        return int(self.resample_a.shape[0])

    def to_dict(self) -> dict:
        return {
            "t": int(self.t),
            "x": self.x.tolist(),
            "a": self.a,
            "loss": self.loss,
            "resamples": [[xk.tolist(), int(ak)] for xk, ak in zip(self.resample_x, self.resample_a)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResampleBlock":
        x = np.asarray(data["x"], dtype=float).ravel()
        resamples = data.get("resamples", [])
        rx = np.array([r[0] for r in resamples], dtype=float).reshape(-1, x.size)
        ra = np.array([r[1] for r in resamples], dtype=int)
        return cls(t=int(data["t"]), x=x, a=int(data["a"]), loss=float(data["loss"]), resample_x=rx, resample_a=ra)


@dataclass(frozen=True)
class KgrResult:
    """(q, b) for one query against one block, with the kernel evaluations it took."""

    q: float
    b: float
    kernel_eval_count: int


def kgr_eval_budget(M: int) -> float:
    """Documented ceiling on kernel evaluations of one kgr call: 3M^2/2 + 5M + 4."""
    return 1.5 * M * M + 5 * M + 4


class BlockGramCache:
    """
    Query-independent kernel values of one block, memoized across kgr calls.

    Holds kappa(X(i), X(j)) and kappa(X(i), X_t); filled lazily.
    """

    def __init__(self):
        self.pairs: Dict[Tuple[int, int], float] = {}
        self.to_played: Dict[int, float] = {}


@dataclass
class CoefficientState:
    """Coefficients p_i of phi(x)^T C_k in the resample span, plus call-local kernel caches."""

    p: np.ndarray
    active: List[int] = field(default_factory=list)
    block_cache: BlockGramCache = field(default_factory=BlockGramCache)
    evals: int = 0
    # running sums over active i: p_i kappa(X(i), X_t) and p_i kappa(X(i), x)
    pr: float = 0.0
    pu: float = 0.0

    @classmethod
    def start(cls, M: int, cache: Optional[BlockGramCache] = None) -> "CoefficientState":
        return cls(p=np.zeros(M), block_cache=cache if cache is not None else BlockGramCache())

    def kappa(self, kernel: MercerKernel, x, y) -> float:
        self.evals += 1
        return kernel.eval(x, y)

    def pair(self, kernel: MercerKernel, block: ResampleBlock, i: int, k: int) -> float:
        key = (i, k) if i <= k else (k, i)
        cached = self.block_cache.pairs.get(key)
        if cached is None:
            cached = self.kappa(kernel, block.resample_x[i], block.resample_x[k])
            self.block_cache.pairs[key] = cached
        return cached

    def to_played(self, kernel: MercerKernel, block: ResampleBlock, i: int) -> float:
        cached = self.block_cache.to_played.get(i)
        if cached is None:
            cached = self.kappa(kernel, block.resample_x[i], block.x)
            self.block_cache.to_played[i] = cached
        return cached

    def activate(self, kernel: MercerKernel, x: np.ndarray, block: ResampleBlock, k: int) -> None:
        """Set p_k for a resample whose action matches the query action."""
        u_k = self.kappa(kernel, x, block.resample_x[k])
        s = u_k
        for i in self.active:
            s += self.p[i] * self.pair(kernel, block, i, k)
        self.p[k] = -s
        self.active.append(k)
        self.pr += self.p[k] * self.to_played(kernel, block, k)
        self.pu += self.p[k] * u_k


# ==============================
# ESTIMATES
# ==============================

def kgr(
    x,
    a: int,
    block: ResampleBlock,
    beta: float,
    kernel: MercerKernel,
    cache: Optional[BlockGramCache] = None,
) -> KgrResult:
    """
    Kernel Geometric Resampling for query (x, a) against one block.

    Args:
        x: Query context
        a: Query action (0-based)
        block: Buffered round
        beta: Bonus scale (>= 0)
        kernel: Kernel used for every inner product
        cache: Optional per-block cache shared across queries on the same block

    Returns:
        KgrResult: q = kappa(x, X_t) + sum_k q_k, b = beta (kappa(x, x) + sum_k <phi(x), C_k phi(x)>)

    Examples:
        With M = 1 and A(1) = a:
        q = 2 kappa(x, X_t) - kappa(x, X(1)) kappa(X(1), X_t)
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    x = kernel.check_points(x)[0]
    state = CoefficientState.start(block.M, cache)

    k_xt = state.kappa(kernel, x, block.x)
    k_xx = state.kappa(kernel, x, x)

    q = k_xt
    b = k_xx
    for k in range(block.M):
        if block.resample_a[k] == a:
            state.activate(kernel, x, block, k)
        q += k_xt + state.pr
        b += k_xx + state.pu

    return KgrResult(q=float(q), b=float(beta * b), kernel_eval_count=state.evals)


def point_estimate(
    x,
    a: int,
    block: ResampleBlock,
    beta: float,
    kernel: MercerKernel,
    cache: Optional[BlockGramCache] = None,
) -> float:
    """l_hat(x, a) = q(x, a) * loss * 1{A_t = a} - b(x, a); never clamped."""
    result = kgr(x, a, block, beta, kernel, cache=cache)
    played = 1.0 if block.a == a else 0.0
    return result.q * block.loss * played - result.b


def cumulative_estimate(
    x,
    a: int,
    buffer: Iterable[ResampleBlock],
    beta: float,
    kernel: MercerKernel,
    caches: Optional[Dict[int, BlockGramCache]] = None,
) -> float:
    """
    L_hat(x, a): sum of point estimates over the buffer, in round order.

    Args:
        caches: Optional mapping block.t -> BlockGramCache, reused when the same
            buffer is replayed for several query contexts

    Returns:
        float: 0.0 for an empty buffer
    """
    total = 0.0
    for block in buffer:
        cache = None
        if caches is not None:
            cache = caches.setdefault(block.t, BlockGramCache())
        total += point_estimate(x, a, block, beta, kernel, cache=cache)
    return total
