"""
harness/simulator.py

The KernelFTRL interaction loop.

Round t:
  1. the adversary commits to K loss functions using rounds < t only
  2. X_t ~ D is revealed and M resample contexts X(k) ~ D are drawn
  3. L_hat_{t-1} is evaluated at X_t and every X(k) from the compiled buffer
  4. pi_t(.|X_t) and pi_t(.|X(k)) solve the log-barrier FTRL problem
  5. A_t ~ pi_t(.|X_t) is played and l_t(X_t, A_t) observed; A(k) ~ pi_t(.|X(k))
  6. the round is appended to the buffer as a ResampleBlock

The policy at the held-out evaluation contexts is tracked every round so the
regret can be measured in expectation over the learner's action draw.
"""

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from environments.adversaries import Adversary, LossSequence, make_adversary
from environments.contexts import ContextDistribution
from estimators.compiled import CompiledBuffer
from estimators.kgr import ResampleBlock
from kernels.mercer import MercerKernel
from policy.log_barrier import PolicyDistribution, sample_action, solve_policy_batch

from .config import ExperimentConfig, build_contexts, build_kernel, resolve_schedule, truncation_for
from .rng import EVAL, INIT, PLAY, RESAMPLE_ACTION, RESAMPLE_CONTEXT, RngStreams
from .schedules import ScheduleParams

logger = logging.getLogger(__name__)


def accounting_bound(t: int, M: int, n_eval: int) -> int:
    """Documented ceiling on kernel evaluations spent in round t: 4 t (M+1)^2 (M+1+E)."""
    return 4 * t * (M + 1) ** 2 * (M + 1 + n_eval)


@dataclass
class RunRecord:
    """Everything one run produced; wall times are kept out of the fingerprint."""

    config: dict
    params: ScheduleParams
    m_eps: Optional[int]
    seeds: dict
    kernel: dict
    contexts: np.ndarray
    actions: np.ndarray
    losses: np.ndarray
    probs: np.ndarray
    wall_times: np.ndarray
    kernel_evals: np.ndarray
    loss_sequence: LossSequence
    eval_points: np.ndarray
    eval_weights: np.ndarray
    eval_discrete: bool
    eval_policies: np.ndarray
    eval_estimates: np.ndarray
    buffer: List[ResampleBlock] = field(default_factory=list)
    complete: bool = True

    @property
    def rounds(self) -> int:
        return int(self.actions.shape[0])

    @property
    def K(self) -> int:
        return int(self.probs.shape[1])

    @property
    def total_kernel_evals(self) -> int:
        return int(self.kernel_evals.sum())

    def fingerprint(self) -> str:
        """SHA-256 over the deterministic content of the run."""
        h = hashlib.sha256()
        header = {"params": self.params.to_dict(), "seeds": self.seeds, "complete": self.complete}
        h.update(json.dumps(header, sort_keys=True).encode("utf-8"))
        arrays = [
            self.contexts, self.actions, self.losses, self.probs, self.kernel_evals,
            self.loss_sequence.coeffs, self.eval_points, self.eval_policies, self.eval_estimates,
        ]
        for block in self.buffer:
            arrays += [block.x, block.resample_x, block.resample_a]
        for arr in arrays:
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def evaluation_set(contexts: ContextDistribution, n: int, streams: RngStreams):
    """Support points and weights for discrete distributions, else n held-out draws."""
    support = contexts.support()
    if support is not None:
        points, weights = support
        return np.array(points), np.array(weights), True
    points = contexts.sample(streams.generator("context", EVAL), n)
    return points, np.full(n, 1.0 / n), False


def _draw(probs: np.ndarray, rng: np.random.Generator) -> int:
    return sample_action(PolicyDistribution(probs=probs, dual_lambda=0.0, kkt_residual=0.0), rng)


def run(
    config: ExperimentConfig,
    kernel: Optional[MercerKernel] = None,
    contexts: Optional[ContextDistribution] = None,
    adversary: Optional[Adversary] = None,
) -> RunRecord:
    """
    Execute one run; fully deterministic given the config's seeds.

    Args:
        config: Experiment config
        kernel, contexts, adversary: Optional prebuilt components replacing the
            ones the config describes

    Returns:
        RunRecord: complete = False when max_wall_seconds stopped the loop early
    """
    streams = RngStreams(config.seeds.master, config.seeds.overrides())
    kernel = build_kernel(config.kernel) if kernel is None else kernel
    contexts = build_contexts(config.contexts, kernel) if contexts is None else contexts
    params = resolve_schedule(config, kernel)
    m_eps = truncation_for(kernel, params.eps)
    T, K, M = config.T, config.K, params.M
    if adversary is None:
        adversary = make_adversary(
            config.adversary.kind,
            kernel,
            K,
            streams.generator("adversary", INIT),
            {"radius": config.adversary.radius, "drift": config.adversary.drift, "T": T, "path": config.adversary.path},
        )
    learning = config.learner == "kgr"
    buffer = CompiledBuffer(kernel, K, M, params.beta) if learning else None

    eval_points, eval_weights, discrete = evaluation_set(contexts, config.eval_contexts, streams)
    E = eval_points.shape[0]
    eval_L = np.zeros((E, K))
    eval_estimates = np.zeros((T + 1, E, K))
    eval_policies = np.zeros((T, E, K))
    uniform_row = np.full(K, 1.0 / K)

    xs = np.zeros((T, kernel.d))
    actions = np.zeros(T, dtype=int)
    losses = np.zeros(T)
    probs_played = np.zeros((T, K))
    wall = np.zeros(T)
    evals = np.zeros(T, dtype=np.int64)
    coeffs = np.zeros((T, K, adversary.D))
    blocks: List[ResampleBlock] = []

    logger.info("run: T=%d K=%d M=%d eta=%.6g beta=%.6g learner=%s", T, K, M, params.eta, params.beta, config.learner)
    started = time.perf_counter()
    done = 0
    for t in range(1, T + 1):
        if config.max_wall_seconds is not None and time.perf_counter() - started > config.max_wall_seconds:
            logger.warning("wall-clock cap of %.3gs reached after %d rounds", config.max_wall_seconds, done)
            break
        tic = time.perf_counter()
        F = adversary.loss_functions(t)
        coeffs[t - 1] = F
        x_t = contexts.sample(streams.generator("context", PLAY, t), 1)[0]

        if learning:
            before = buffer.kernel_evals
            X_res = contexts.sample(streams.generator("resample", RESAMPLE_CONTEXT, t), M)
            L = buffer.cumulative(np.vstack([x_t[None, :], X_res]))
            probs, _, _ = solve_policy_batch(L, params.eta)
            eval_probs, _, _ = solve_policy_batch(eval_L, params.eta)
        else:
            probs = uniform_row[None, :]
            eval_probs = np.broadcast_to(uniform_row, (E, K))

        a_t = _draw(probs[0], streams.generator("policy", PLAY, t))
        loss = float(kernel.features(x_t)[0] @ F[a_t])
        adversary.observe(x_t, a_t, loss)

        if learning:
            A_res = np.array(
                [_draw(probs[1 + k], streams.generator("resample", RESAMPLE_ACTION, t, k)) for k in range(M)],
                dtype=int,
            )
            block = ResampleBlock(t=t, x=x_t, a=a_t, loss=loss, resample_x=X_res, resample_a=A_res)
            buffer.append(block)
            blocks.append(block)
            eval_L = eval_L + buffer.per_block_estimates(eval_points, start=buffer.n - 1)[:, 0, :]
            evals[t - 1] = buffer.kernel_evals - before

        xs[t - 1] = x_t
        actions[t - 1] = a_t
        losses[t - 1] = loss
        probs_played[t - 1] = probs[0]
        eval_policies[t - 1] = eval_probs
        eval_estimates[t] = eval_L
        wall[t - 1] = time.perf_counter() - tic
        done = t
        if t & (t - 1) == 0 or t == T:
            logger.info("round %d/%d: %d kernel evaluations so far", t, T, int(evals[:t].sum()))

    return RunRecord(
        config=config.to_dict(),
        params=params,
        m_eps=m_eps,
        seeds=streams.to_dict(),
        kernel=kernel.describe(),
        contexts=xs[:done],
        actions=actions[:done],
        losses=losses[:done],
        probs=probs_played[:done],
        wall_times=wall[:done],
        kernel_evals=evals[:done],
        loss_sequence=LossSequence(coeffs[:done]),
        eval_points=eval_points,
        eval_weights=eval_weights,
        eval_discrete=discrete,
        eval_policies=eval_policies[:done],
        eval_estimates=eval_estimates[:done + 1],
        buffer=blocks,
        complete=done == T,
    )
