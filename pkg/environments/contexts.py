"""
environments/contexts.py

Context distributions with sampling access.

Samplers take an explicit numpy Generator on every call, so the same
distribution can serve several independent RNG streams at once.
"""

from abc import ABC, abstractmethod
from typing import Optional, Sequence, Tuple

import numpy as np


class ContextDistribution(ABC):
    """i.i.d. context source over a box support [low, high]^d."""

    kind = "contexts"

    def __init__(self, d: int = 1, low: Optional[Sequence[float]] = None, high: Optional[Sequence[float]] = None):
        if d < 1:
            raise ValueError(f"context dimension d must be >= 1, got {d}")
        self.d = int(d)
        self.low = np.zeros(self.d) if low is None else np.asarray(low, dtype=float).reshape(self.d)
        self.high = np.ones(self.d) if high is None else np.asarray(high, dtype=float).reshape(self.d)

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n i.i.d. contexts, shape (n, d)."""

    @property
    def is_discrete(self) -> bool:
        return False

    def support(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """(points, weights) for finitely supported distributions, else None."""
        return None

    def describe(self) -> dict:
        return {"kind": self.kind, "d": self.d, "low": self.low.tolist(), "high": self.high.tolist()}


class UniformContexts(ContextDistribution):
    """Uniform distribution on the box."""

    kind = "uniform"

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.low + (self.high - self.low) * rng.random((n, self.d))


class GridContexts(ContextDistribution):
    """
    Discrete distribution on a fixed finite set of points.

    The default grid places n_points evenly spaced points on the diagonal of the box.
    """

    kind = "grid"

    def __init__(
        self,
        d: int = 1,
        n_points: int = 8,
        points: Optional[Sequence[Sequence[float]]] = None,
        weights: Optional[Sequence[float]] = None,
        low=None,
        high=None,
    ):
        super().__init__(d=d, low=low, high=high)
        if points is None:
            if n_points < 1:
                raise ValueError(f"n_points must be >= 1, got {n_points}")
            s = np.linspace(0.0, 1.0, n_points)
            points = self.low + np.outer(s, self.high - self.low)
        self.points = np.asarray(points, dtype=float).reshape(-1, self.d)
        if np.any(self.points < self.low) or np.any(self.points > self.high):
            raise ValueError("grid points must lie inside the support box")
        n = self.points.shape[0]
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float).ravel()
        if w.size != n or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("grid weights must be non-negative, one per point, and sum to 1")
        self.weights = w / w.sum()
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def is_discrete(self) -> bool:
        return True

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.points, self.weights

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(self.points.shape[0], size=n, p=self.weights)
        return self.points[idx]

    def describe(self) -> dict:
        out = super().describe()
        out["points"] = self.points.tolist()
        out["weights"] = self.weights.tolist()
        return out


def make_contexts(kind: str, d: int = 1, **params) -> ContextDistribution:
    """Build a context distribution from its config name."""
    kind = str(kind).lower()
    if kind == UniformContexts.kind:
        return UniformContexts(d=d, low=params.get("low"), high=params.get("high"))
    if kind == GridContexts.kind:
        return GridContexts(
            d=d,
            n_points=params.get("n_points", 8),
            points=params.get("points"),
            weights=params.get("weights"),
            low=params.get("low"),
            high=params.get("high"),
        )
    raise ValueError(f"unknown context distribution kind: {kind!r}")
