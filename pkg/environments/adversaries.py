"""
environments/adversaries.py

Adversarial loss functions living in the unit ball of the kernel's feature space.

A loss function for one action is a coordinate vector f in R^D with ||f||_2 <= 1;
its value at x is <f, phi(x)>, so |l(x, a)| <= 1 whenever kappa(x, x) <= 1.
Adversaries produce the K functions of round t before X_t is drawn and only
see the public history of earlier rounds.
"""

import json
import logging
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from kernels.mercer import MercerKernel, UnsupportedKernelError

logger = logging.getLogger(__name__)

NORM_TOL = 1e-12

FIXED = "fixed"
OBLIVIOUS = "oblivious"
ADAPTIVE = "adaptive"
REPLAY = "replay"
ADVERSARY_KINDS = (FIXED, OBLIVIOUS, ADAPTIVE, REPLAY)


# ==============================
# LOSS FUNCTIONS
# ==============================

@dataclass(frozen=True, eq=False)
class LossFunction:
    """f_{t,a} as its l2 coordinates in the feature basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).ravel()
        norm = float(np.linalg.norm(coeffs))
        if norm > 1.0 + NORM_TOL:
            raise ValueError(f"loss function norm {norm} exceeds 1")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)


def eval_loss(f: LossFunction, x, kernel: MercerKernel) -> float:
    """
    l(x) = <f, phi(x)>.

    Examples:
        With mu = (0.5, 0.25), f = (0.6, 0.8) and x = 0:
        0.6 * sqrt(0.5) + 0.8 * 0.5 = 0.82426...
    """
    if not kernel.has_eigensystem:
        raise UnsupportedKernelError(f"{kernel.name} kernel cannot evaluate RKHS loss functions")
    phi = kernel.features(x)[0]
    if phi.size != f.coeffs.size:
        raise ValueError(f"loss function has {f.coeffs.size} coordinates, kernel has {phi.size}")
    return float(phi @ f.coeffs)


def loss_matrix(coeffs: np.ndarray, X, kernel: MercerKernel) -> np.ndarray:
    """Values l(x, a) of K loss functions (K, D) at contexts X; shape (n, K)."""
    if not kernel.has_eigensystem:
        raise UnsupportedKernelError(f"{kernel.name} kernel cannot evaluate RKHS loss functions")
    return kernel.features(X) @ np.asarray(coeffs, dtype=float).T


def project_to_unit_ball(v: np.ndarray) -> np.ndarray:
    """Rescale rows with norm > 1 to norm 1."""
    v = np.asarray(v, dtype=float)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(norms > 1.0, v / np.maximum(norms, 1.0), v)


def random_directions(rng: np.random.Generator, n: int, D: int, radius: float = 1.0) -> np.ndarray:
    """n Gaussian directions rescaled to the given norm; shape (n, D)."""
    g = rng.standard_normal((n, D))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    return radius * g / np.where(norms > 0, norms, 1.0)


# ==============================
# LOSS SEQUENCES
# ==============================

@dataclass(frozen=True, eq=False)
class LossSequence:
    """The (T, K, D) coordinates of every loss function a run played."""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 3:
            raise ValueError(f"loss sequence must have shape (T, K, D), got {coeffs.shape}")
        if coeffs.size and np.max(np.linalg.norm(coeffs, axis=2)) > 1.0 + NORM_TOL:
            raise ValueError("loss sequence contains a function of norm > 1")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def T(self) -> int:
        return int(self.coeffs.shape[0])

    def values(self, X, kernel: MercerKernel) -> np.ndarray:
        """l_t(x, a) for every round and context; shape (T, n, K)."""
        if not kernel.has_eigensystem:
            raise UnsupportedKernelError(f"{kernel.name} kernel cannot evaluate RKHS loss functions")
        phi = kernel.features(X)
        return np.einsum("tkd,nd->tnk", self.coeffs, phi)

    def to_dict(self) -> dict:
        T, K, D = self.coeffs.shape
        return {"T": T, "K": K, "D": D, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "LossSequence":
        coeffs = np.asarray(data["coeffs"], dtype=float)
        if coeffs.size == 0:
            coeffs = coeffs.reshape(0, int(data.get("K", 0)), int(data.get("D", 0)))
        return cls(coeffs)


def save_loss_sequence(sequence: LossSequence, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(sequence.to_dict(), f)


def load_loss_sequence(path: str) -> LossSequence:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: malformed loss sequence ({e})") from e
    return LossSequence.from_dict(data)


# ==============================
# ADVERSARIES
# ==============================

@dataclass
class History:
    """Public interaction record F_{t-1}: past contexts, actions and observed losses."""

    contexts: List[np.ndarray] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)


class Adversary(ABC):
    """
    Per-round generator of K loss functions.

    Single-writer: the simulation loop calls loss_functions(t) for t = 1, 2, ...
    and reports each round back through observe().
    """

    kind = "adversary"

    def __init__(self, kernel: MercerKernel, K: int):
        if K < 1:
            raise ValueError(f"K must be >= 1, got {K}")
        if not kernel.has_eigensystem:
            raise UnsupportedKernelError(f"{kernel.name} kernel cannot host RKHS loss functions")
        self.kernel = kernel
        self.K = int(K)
        self.D = kernel.dimension
        self.history = History()

    @abstractmethod
    def loss_functions(self, t: int) -> np.ndarray:
        """(K, D) coordinates of round t (1-based)."""

    def losses(self, t: int) -> List[LossFunction]:
        return [LossFunction(row) for row in self.loss_functions(t)]

    def observe(self, x, a: int, loss: float) -> None:
        self.history.contexts.append(np.asarray(x, dtype=float).ravel())
        self.history.actions.append(int(a))
        self.history.losses.append(float(loss))

    def describe(self) -> dict:
        return {"kind": self.kind, "K": self.K, "D": self.D}


class FixedAdversary(Adversary):
    """The same K functions every round, drawn once at construction."""

    kind = FIXED

    def __init__(self, kernel: MercerKernel, K: int, rng: np.random.Generator, radius: float = 1.0):
        super().__init__(kernel, K)
        if not 0.0 <= radius <= 1.0:
            raise ValueError(f"radius must lie in [0, 1], got {radius}")
        self.radius = float(radius)
        self.base = random_directions(rng, self.K, self.D, self.radius)

    def loss_functions(self, t: int) -> np.ndarray:
        return self.base

    def describe(self) -> dict:
        out = super().describe()
        out["radius"] = self.radius
        return out


class ObliviousAdversary(FixedAdversary):
    """
    A random walk on the unit ball, fixed in advance for rounds 1..T.

    Starts from the Fixed draw and moves every function by drift * xi / sqrt(D),
    xi ~ N(0, I), projecting back to the unit ball after each step.
    """

    kind = OBLIVIOUS

    def __init__(self, kernel: MercerKernel, K: int, rng: np.random.Generator, T: int, drift: float = 0.1, radius: float = 1.0):
        super().__init__(kernel, K, rng, radius)
        if T < 1:
            raise ValueError(f"T must be >= 1, got {T}")
        if drift < 0:
            raise ValueError(f"drift must be >= 0, got {drift}")
        self.drift = float(drift)
        steps = rng.standard_normal((T - 1, self.K, self.D)) * (self.drift / np.sqrt(self.D))
        path = np.empty((T, self.K, self.D))
        path[0] = self.base
        for t in range(1, T):
            path[t] = project_to_unit_ball(path[t - 1] + steps[t - 1])
        self.path = path

    def loss_functions(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.path.shape[0]:
            raise ValueError(f"round {t} outside the pre-drawn horizon 1..{self.path.shape[0]}")
        return self.path[t - 1]


class AdaptiveAdversary(FixedAdversary):
    """
    Pushes up the loss of the empirically most-played action.

    At round t the most-played action so far (ties to the smallest index)
    gets f = radius * s / ||s|| with s = sum_{s<t} phi(X_s); the other actions
    keep the base draw. With an empty history every action keeps the base draw.
    """

    kind = ADAPTIVE

    def loss_functions(self, t: int) -> np.ndarray:
        if len(self.history) == 0:
            return self.base
        counts = np.bincount(np.asarray(self.history.actions), minlength=self.K)
        target = int(np.argmax(counts))
        direction = self.kernel.features(np.vstack(self.history.contexts)).sum(axis=0)
        norm = float(np.linalg.norm(direction))
        out = self.base.copy()
        if norm > 0:
            out[target] = self.radius * direction / norm
        return out


class ReplayAdversary(Adversary):
    """Plays an imported loss sequence exactly."""

    kind = REPLAY

    def __init__(self, kernel: MercerKernel, K: int, sequence: LossSequence):
        super().__init__(kernel, K)
        if sequence.coeffs.shape[1:] != (self.K, self.D):
            raise ValueError(
                f"loss sequence has shape {sequence.coeffs.shape}, expected (T, {self.K}, {self.D})"
            )
        self.sequence = sequence

    def loss_functions(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.sequence.T:
            raise ValueError(f"round {t} outside the imported horizon 1..{self.sequence.T}")
        return self.sequence.coeffs[t - 1]


def make_adversary(
    kind: str,
    kernel: MercerKernel,
    K: int,
    rng_seed: Union[int, np.random.Generator, None] = None,
    params: Optional[dict] = None,
) -> Adversary:
    """
    Build an adversary from its config name.

    Args:
        kind: 'fixed', 'oblivious', 'adaptive' or 'replay'
        kernel: Kernel with explicit eigensystem
        K: Number of actions
        rng_seed: Seed or Generator for the adversary's own draws
        params: Kind-specific parameters: radius; T and drift (oblivious);
            path or sequence (replay)

    Returns:
        Adversary
    """
    params = dict(params or {})
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    kind = str(kind).lower()
    radius = float(params.get("radius", 1.0))
    if kind == FIXED:
        return FixedAdversary(kernel, K, rng, radius)
    if kind == OBLIVIOUS:
        if "T" not in params:
            raise ValueError("oblivious adversary needs the horizon T")
        return ObliviousAdversary(kernel, K, rng, int(params["T"]), float(params.get("drift", 0.1)), radius)
    if kind == ADAPTIVE:
        return AdaptiveAdversary(kernel, K, rng, radius)
    if kind == REPLAY:
        sequence = params.get("sequence")
        if sequence is None:
            if "path" not in params:
                raise ValueError("replay adversary needs a loss sequence path")
            sequence = load_loss_sequence(params["path"])
        return ReplayAdversary(kernel, K, sequence)
    raise ValueError(f"unknown adversary kind: {kind!r}")
