"""
kernels/mercer.py

Mercer kernels over a box-shaped context support X = [low, high]^d.

Two families:
- CosineMercerKernel: explicit truncated eigensystem
  kappa(x, x') = sum_j mu_j psi_j(x) psi_j(x'), psi_j(x) = cos(j pi xbar),
  where xbar is the first coordinate of x mapped to [0, 1].
- GaussianKernel / MaternKernel: evaluation only (scikit-learn), tagged with
  the decay profile they are known to satisfy.
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np
from sklearn.gaussian_process.kernels import Matern
from sklearn.metrics.pairwise import rbf_kernel

from .decay import EXPONENTIAL, POLYNOMIAL, DecayProfile

logger = logging.getLogger(__name__)

SUPPORT_TOL = 1e-12


class ContextDomainError(ValueError):
    """A context point lies outside the kernel's declared support."""


class UnsupportedKernelError(NotImplementedError):
    """The operation needs an explicit eigensystem the kernel does not have."""


class MercerKernel(ABC):
    """
    Positive-definite kernel on a box support with kappa(x, x) <= 1.

    Instances are immutable after construction and safe to share between threads.
    """

    name = "kernel"

    def __init__(
        self,
        d: int = 1,
        low: Optional[Sequence[float]] = None,
        high: Optional[Sequence[float]] = None,
        decay_profile: Optional[DecayProfile] = None,
    ):
        if d < 1:
            raise ValueError(f"context dimension d must be >= 1, got {d}")
        self.d = int(d)
        self.low = np.zeros(self.d) if low is None else np.asarray(low, dtype=float).reshape(self.d)
        self.high = np.ones(self.d) if high is None else np.asarray(high, dtype=float).reshape(self.d)
        if np.any(self.high <= self.low):
            raise ValueError("support must satisfy low < high in every coordinate")
        self.low.setflags(write=False)
        self.high.setflags(write=False)
        self.decay_profile = decay_profile

    # ------------------------------
    # Support handling
    # ------------------------------

    def check_points(self, X) -> np.ndarray:
        """Return X as an (n, d) array, raising ContextDomainError outside the support."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1, 1)
        elif X.ndim == 1:
            X = X.reshape(1, -1) if X.shape[0] == self.d else X.reshape(-1, 1)
        if X.shape[1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ContextDomainError("context points must be finite")
        outside = np.any((X < self.low - SUPPORT_TOL) | (X > self.high + SUPPORT_TOL), axis=1)
        if np.any(outside):
            bad = X[np.argmax(outside)]
            raise ContextDomainError(f"point {bad.tolist()} lies outside the support [{self.low.tolist()}, {self.high.tolist()}]")
        return X

    # ------------------------------
    # Evaluation
    # ------------------------------

    @abstractmethod
    def _gram(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        ...

    def gram(self, X, Y=None) -> np.ndarray:
        """Kernel matrix [kappa(x_i, y_j)] for point sets X (n, d) and Y (m, d)."""
        X = self.check_points(X)
        Y = X if Y is None else self.check_points(Y)
        return self._gram(X, Y)

    def diag(self, X) -> np.ndarray:
        """kappa(x, x) for every row of X."""
        X = self.check_points(X)
        return np.array([self._gram(row[None, :], row[None, :])[0, 0] for row in X])

    def eval(self, x, y) -> float:
        return float(self.gram(x, y)[0, 0])

    # ------------------------------
    # Eigensystem (explicit kernels only)
    # ------------------------------

    @property
    def eigenvalues(self) -> Optional[np.ndarray]:
        return None

    @property
    def has_eigensystem(self) -> bool:
        return self.eigenvalues is not None

    @property
    def dimension(self) -> int:
        """Length D_trunc of the explicit feature vectors."""
        raise UnsupportedKernelError(f"{self.name} kernel has no explicit eigensystem")

    def eigenfunctions(self, X) -> np.ndarray:
        raise UnsupportedKernelError(f"{self.name} kernel has no explicit eigensystem")

    def features(self, X) -> np.ndarray:
        raise UnsupportedKernelError(f"{self.name} kernel has no explicit eigensystem")

    def describe(self) -> dict:
        out = {"name": self.name, "d": self.d, "low": self.low.tolist(), "high": self.high.tolist()}
        if self.decay_profile is not None:
            out["decay_profile"] = self.decay_profile.to_dict()
        return out


class CosineMercerKernel(MercerKernel):
    """
    Finite Mercer kernel with cosine eigenfunctions psi_j(x) = cos(j pi xbar), j = 1..D.

    The stored eigenvalues are used as given; |psi_j| <= 1, so kappa(x, x) <= sum_j mu_j.
    """

    name = "cosine"

    def __init__(
        self,
        eigenvalues: Sequence[float],
        d: int = 1,
        low: Optional[Sequence[float]] = None,
        high: Optional[Sequence[float]] = None,
        decay_profile: Optional[DecayProfile] = None,
    ):
        super().__init__(d=d, low=low, high=high, decay_profile=decay_profile)
        mu = np.asarray(eigenvalues, dtype=float).ravel()
        if mu.size == 0:
            raise ValueError("eigensystem must have at least one eigenvalue")
        if np.any(mu < 0) or not np.all(np.isfinite(mu)):
            raise ValueError("eigenvalues must be finite and >= 0")
        if mu.sum() > 1.0 + 1e-12:
            raise ValueError(f"eigenvalues must sum to <= 1 so that kappa(x, x) <= 1, got {mu.sum()}")
        mu.setflags(write=False)
        self._mu = mu
        self._sqrt_mu = np.sqrt(mu)
        self._freq = np.pi * np.arange(1, mu.size + 1)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._mu

    @property
    def dimension(self) -> int:
        return int(self._mu.size)

    def _unit_coordinate(self, X: np.ndarray) -> np.ndarray:
        xbar = (X[:, 0] - self.low[0]) / (self.high[0] - self.low[0])
        return np.clip(xbar, 0.0, 1.0)

    def eigenfunctions(self, X) -> np.ndarray:
        """(n, D) matrix of psi_j(x_i)."""
        X = self.check_points(X)
        return np.cos(np.outer(self._unit_coordinate(X), self._freq))

    def features(self, X) -> np.ndarray:
        """(n, D) matrix of phi_j(x_i) = sqrt(mu_j) psi_j(x_i)."""
        return self.eigenfunctions(X) * self._sqrt_mu

    def _gram(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return self.features(X) @ self.features(Y).T

    def diag(self, X) -> np.ndarray:
        phi = self.features(X)
        return np.einsum("ij,ij->i", phi, phi)

    def describe(self) -> dict:
        out = super().describe()
        out["D_trunc"] = self.dimension
        return out


class GaussianKernel(MercerKernel):
    """Squared-exponential kernel exp(-|x - x'|^2 / (2 l^2)); exponential decay with c = 1/d."""

    name = "gaussian"

    def __init__(self, d: int = 1, lengthscale: float = 0.2, low=None, high=None):
        if not lengthscale > 0:
            raise ValueError(f"lengthscale must be > 0, got {lengthscale}")
        super().__init__(d=d, low=low, high=high, decay_profile=DecayProfile(EXPONENTIAL, 1.0, 1.0 / d))
        self.lengthscale = float(lengthscale)

    def _gram(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return rbf_kernel(X, Y, gamma=0.5 / self.lengthscale ** 2)

    def diag(self, X) -> np.ndarray:
        return np.ones(self.check_points(X).shape[0])


class MaternKernel(MercerKernel):
    """Matern kernel with smoothness nu; polynomial decay with c = 1 + 2 nu / d."""

    name = "matern"

    def __init__(self, d: int = 1, lengthscale: float = 0.2, nu: float = 2.5, low=None, high=None):
        if not lengthscale > 0:
            raise ValueError(f"lengthscale must be > 0, got {lengthscale}")
        if not nu > 0:
            raise ValueError(f"smoothness nu must be > 0, got {nu}")
        super().__init__(
            d=d, low=low, high=high, decay_profile=DecayProfile(POLYNOMIAL, 1.0, 1.0 + 2.0 * nu / d)
        )
        self.lengthscale = float(lengthscale)
        self.nu = float(nu)
        self._matern = Matern(length_scale=self.lengthscale, nu=self.nu)

    def _gram(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return self._matern(X, Y)

    def diag(self, X) -> np.ndarray:
        return np.ones(self.check_points(X).shape[0])


# ==============================
# CONSTRUCTION HELPERS
# ==============================

def synthetic_kernel(profile: DecayProfile, D_trunc: int, d: int = 1, low=None, high=None) -> CosineMercerKernel:
    """
    Cosine-eigenfunction kernel whose eigenvalues follow a decay profile.

    mu_j = g e^{-cj} or g j^{-c} for j = 1..D_trunc, rescaled so that sum_j mu_j <= 1.
    The declared profile still upper-bounds the rescaled eigenvalues.
    """
    if D_trunc < 1:
        raise ValueError(f"D_trunc must be >= 1, got {D_trunc}")
    mu = profile.eigenvalues(D_trunc)
    total = float(mu.sum())
    if total > 1.0:
        logger.debug("rescaling %s eigenvalues by 1/%.6g to keep kappa(x, x) <= 1", profile.kind, total)
        mu = mu / total
    return CosineMercerKernel(mu, d=d, low=low, high=high, decay_profile=profile)


def kernel_eval(kernel: MercerKernel, x, y) -> float:
    """kappa(x, x'); raises ContextDomainError when a point is outside the support."""
    return kernel.eval(x, y)
