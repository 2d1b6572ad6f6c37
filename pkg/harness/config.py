"""
harness/config.py

Experiment configuration: JSON files loaded into frozen dataclasses.

Every section rejects keys it does not know. See docs/CONFIG.md for the schema.
"""

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

from environments.contexts import ContextDistribution, make_contexts
from kernels.decay import DecayProfile, truncation_index
from kernels.mercer import GaussianKernel, MaternKernel, MercerKernel, synthetic_kernel

from .schedules import DEFAULT_MAX_M, ScheduleParams, tuned_epsilon, tuned_params

logger = logging.getLogger(__name__)

LEARNERS = ("kgr", "uniform")
SCHEDULES = ("manual", "tuned")


class ConfigError(ValueError):
    """Malformed configuration: unknown keys, bad types or out-of-range values."""


# ==============================
# SECTIONS
# ==============================

@dataclass(frozen=True)
class KernelSpec:
    kind: str = "synthetic"
    decay: str = "exponential"
    g: float = 1.0
    c: float = 1.0
    D_trunc: int = 32
    d: int = 1
    lengthscale: float = 0.2
    nu: float = 2.5
    low: Optional[Tuple[float, ...]] = None
    high: Optional[Tuple[float, ...]] = None

    def profile(self) -> DecayProfile:
        return DecayProfile(self.decay, self.g, self.c)


@dataclass(frozen=True)
class AdversarySpec:
    kind: str = "oblivious"
    radius: float = 1.0
    drift: float = 0.1
    path: Optional[str] = None


@dataclass(frozen=True)
class ContextSpec:
    kind: str = "uniform"
    n_points: int = 8
    points: Optional[Tuple[Tuple[float, ...], ...]] = None
    weights: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class SeedSpec:
    master: int = 0
    policy: Optional[int] = None
    resample: Optional[int] = None
    adversary: Optional[int] = None
    context: Optional[int] = None

    def overrides(self) -> dict:
        return {name: getattr(self, name) for name in ("policy", "resample", "adversary", "context")}


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str = "tuned"
    max_m: Optional[int] = DEFAULT_MAX_M


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "results"
    buffer: bool = False
    loss_sequence: bool = True


@dataclass(frozen=True)
class SweepSpec:
    horizons: Tuple[int, ...] = ()
    seeds: Tuple[int, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment.

    M, eta and beta are required with the manual schedule and filled in by
    the decay-tuned schedule otherwise (an explicit value still wins).
    """

    T: int = 256
    K: int = 3
    M: Optional[int] = None
    eta: Optional[float] = None
    beta: Optional[float] = None
    learner: str = "kgr"
    eval_contexts: int = 256
    diagnostics: int = 0
    checkpoints: Optional[Tuple[int, ...]] = None
    max_wall_seconds: Optional[float] = None
    threads: int = 1
    kernel: KernelSpec = field(default_factory=KernelSpec)
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    contexts: ContextSpec = field(default_factory=ContextSpec)
    seeds: SeedSpec = field(default_factory=SeedSpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def __post_init__(self):
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.M is not None and self.M < 0:
            raise ConfigError(f"M must be >= 0, got {self.M}")
        if self.eta is not None and not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        if self.beta is not None and self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if self.learner not in LEARNERS:
            raise ConfigError(f"learner must be one of {LEARNERS}, got {self.learner!r}")
        if self.schedule.kind not in SCHEDULES:
            raise ConfigError(f"schedule.kind must be one of {SCHEDULES}, got {self.schedule.kind!r}")
        if self.schedule.kind == "manual" and self.learner == "kgr":
            missing = [name for name in ("M", "eta", "beta") if getattr(self, name) is None]
            if missing:
                raise ConfigError(f"manual schedule needs {', '.join(missing)}")
        if self.schedule.kind == "tuned" and self.T < 2 and None in (self.M, self.eta, self.beta):
            raise ConfigError("the decay-tuned schedule needs T >= 2")
        if self.eval_contexts < 1:
            raise ConfigError(f"eval_contexts must be >= 1, got {self.eval_contexts}")
        if self.diagnostics < 0:
            raise ConfigError(f"diagnostics must be >= 0, got {self.diagnostics}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.max_wall_seconds is not None and not self.max_wall_seconds > 0:
            raise ConfigError(f"max_wall_seconds must be > 0, got {self.max_wall_seconds}")

    def with_overrides(
        self,
        seed: Optional[int] = None,
        out: Optional[str] = None,
        max_m: Optional[int] = None,
        threads: Optional[int] = None,
        T: Optional[int] = None,
    ) -> "ExperimentConfig":
        """Copy with command-line overrides applied; None leaves a value untouched."""
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, seeds=dataclasses.replace(cfg.seeds, master=int(seed)))
        if out is not None:
            cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, dir=out))
        if max_m is not None:
            cfg = dataclasses.replace(cfg, schedule=dataclasses.replace(cfg.schedule, max_m=int(max_m)))
            if cfg.M is not None and cfg.M > max_m:
                cfg = dataclasses.replace(cfg, M=int(max_m))
        if threads is not None:
            cfg = dataclasses.replace(cfg, threads=int(threads))
        if T is not None:
            cfg = dataclasses.replace(cfg, T=int(T))
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ==============================
# LOADING
# ==============================

def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _build(cls, data, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{section}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        nested = SECTIONS.get(name) if cls is ExperimentConfig else None
        kwargs[name] = _build(nested, value, f"{section}.{name}") if nested else _tupled(value)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{section}: {e}") from e


SECTIONS = {
    "kernel": KernelSpec,
    "adversary": AdversarySpec,
    "contexts": ContextSpec,
    "seeds": SeedSpec,
    "schedule": ScheduleSpec,
    "output": OutputSpec,
    "sweep": SweepSpec,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "config")


def load_config(path: str) -> ExperimentConfig:
    """
    Load an experiment config from a JSON file.

    Raises:
        ConfigError: unreadable JSON, unknown keys or invalid values
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    logger.debug("loaded config %s", path)
    return config_from_dict(data)


# ==============================
# BUILDERS
# ==============================

def build_kernel(spec: KernelSpec) -> MercerKernel:
    """Instantiate the kernel a config describes."""
    kind = spec.kind.lower()
    try:
        if kind == "synthetic":
            return synthetic_kernel(spec.profile(), spec.D_trunc, d=spec.d, low=spec.low, high=spec.high)
        if kind == "gaussian":
            return GaussianKernel(d=spec.d, lengthscale=spec.lengthscale, low=spec.low, high=spec.high)
        if kind == "matern":
            return MaternKernel(d=spec.d, lengthscale=spec.lengthscale, nu=spec.nu, low=spec.low, high=spec.high)
    except ValueError as e:
        raise ConfigError(f"kernel: {e}") from e
    raise ConfigError(f"kernel.kind must be synthetic, gaussian or matern, got {spec.kind!r}")


def build_contexts(spec: ContextSpec, kernel: MercerKernel) -> ContextDistribution:
    """Context distribution on the kernel's support box."""
    try:
        return make_contexts(
            spec.kind,
            d=kernel.d,
            low=kernel.low,
            high=kernel.high,
            n_points=spec.n_points,
            points=spec.points,
            weights=spec.weights,
        )
    except ValueError as e:
        raise ConfigError(f"contexts: {e}") from e


def resolve_schedule(config: ExperimentConfig, kernel: MercerKernel) -> ScheduleParams:
    """
    (M, eta, beta, eps) for a run; explicit config values override the schedule.

    eps falls back to 0.1 when the kernel carries no decay profile or T < 2.
    """
    profile = kernel.decay_profile
    if config.schedule.kind == "tuned" and None in (config.M, config.eta, config.beta):
        if profile is None:
            raise ConfigError("the decay-tuned schedule needs a kernel with a decay profile")
        tuned = tuned_params(config.T, profile, config.schedule.max_m)
    else:
        eps = tuned_epsilon(config.T, profile) if profile is not None and config.T >= 2 else 0.1
        tuned = ScheduleParams(M=0, eta=1.0, beta=0.0, eps=eps, M_uncapped=0)
    M = tuned.M if config.M is None else config.M
    return ScheduleParams(
        M=int(M),
        eta=float(tuned.eta if config.eta is None else config.eta),
        beta=float(tuned.beta if config.beta is None else config.beta),
        eps=tuned.eps,
        M_uncapped=tuned.M_uncapped if config.M is None else int(M),
    )


def truncation_for(kernel: MercerKernel, eps: float) -> Optional[int]:
    """m(eps) from the kernel's eigenvalues when it has them, else from its decay profile."""
    if kernel.has_eigensystem:
        return truncation_index(kernel.eigenvalues, eps)
    if kernel.decay_profile is not None:
        return truncation_index(kernel.decay_profile, eps)
    return None
