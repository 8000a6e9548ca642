"""Proximal policy optimization with clipping and GAE, from scratch.

Rollouts are collected round-robin over the training instances. Advantages
use GAE(discount, lambda) with value bootstrap at buffer boundaries,
normalized once per update batch. The update is the clipped surrogate plus a
value regression term and an entropy bonus, run for several epochs of
shuffled minibatches. Deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .env import SchedulingEnv
from .errors import TrainingDivergedError
from .instances import Instance
from .metrics import MetricsEvent
from .nn import (
    Adam,
    MlpParams,
    init_mlp,
    masked_log_probs,
    mlp_forward,
    mlp_gradient,
    sample_action,
)

EnvFactory = Callable[[Instance], SchedulingEnv]


def logp_all_safe(logp_all: np.ndarray) -> np.ndarray:
    """Replace -inf (masked) log-probs with 0; their probability factor is exactly 0."""
    return np.where(np.isfinite(logp_all), logp_all, 0.0)


def clipped_objective_upstream(
    logits: np.ndarray,
    masks: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    old_logp: np.ndarray,
    clip: float,
    entropy_coef: float,
) -> tuple[float, float, float, np.ndarray]:
    """Clipped-surrogate-plus-entropy loss pieces and d(loss)/d(logits).

    The surrogate term only propagates through samples where the unclipped
    ratio is active; the entropy bonus propagates everywhere. Returns
    (policy_loss, mean entropy, clip fraction, upstream gradient).
    """
    b = len(actions)
    rows = np.arange(b)
    logp_all = masked_log_probs(logits, masks)
    probs = np.exp(logp_all)
    logp = logp_all[rows, actions]
    ratio = np.exp(logp - old_logp)

    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages
    take_unclipped = unclipped <= clipped
    policy_loss = -float(np.mean(np.minimum(unclipped, clipped)))

    logp_safe = logp_all_safe(logp_all)
    entropy = -(probs * logp_safe).sum(axis=1)
    entropy_mean = float(entropy.mean())

    g_logp_action = np.where(take_unclipped, -ratio * advantages, 0.0) / b
    # d logp(a)/d logits = onehot(a) - probs
    upstream = -probs * g_logp_action[:, None]
    upstream[rows, actions] += g_logp_action
    # entropy bonus: d(-coef * H)/d logit = coef * p * (logp + H)
    upstream += probs * (logp_safe + entropy[:, None]) * (entropy_coef / b)
    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > clip))
    return policy_loss, entropy_mean, clip_fraction, upstream


@dataclass(frozen=True)
class PpoConfig:
    total_steps: int = 100_000
    steps_per_update: int = 2_048
    epochs: int = 10
    minibatch_size: int = 256
    clip_ratio: float = 0.2
    discount: float = 1.0
    gae_lambda: float = 0.95
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    learning_rate: float = 3e-4
    hidden: tuple[int, int] = (64, 64)
    seed: int = 0

    def validate(self) -> None:
        from .errors import ConfigurationError

        if self.total_steps < 1:
            raise ConfigurationError(f"total_steps: must be >= 1, got {self.total_steps}")
        if self.steps_per_update < 1:
            raise ConfigurationError(
                f"steps_per_update: must be >= 1, got {self.steps_per_update}"
            )
        if self.epochs < 0:
            raise ConfigurationError(f"epochs: must be >= 0, got {self.epochs}")
        if self.minibatch_size < 1:
            raise ConfigurationError(f"minibatch_size: must be >= 1, got {self.minibatch_size}")
        if not (0.0 < self.clip_ratio < 1.0):
            raise ConfigurationError(f"clip_ratio: must be in (0, 1), got {self.clip_ratio}")
        if not (0.0 < self.discount <= 1.0):
            raise ConfigurationError(f"discount: must be in (0, 1], got {self.discount}")
        if not (0.0 < self.gae_lambda <= 1.0):
            raise ConfigurationError(f"gae_lambda: must be in (0, 1], got {self.gae_lambda}")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate: must be > 0, got {self.learning_rate}")


@dataclass
class Trajectory:
    """One collected rollout buffer, episode-aligned via the done flags."""

    observations: np.ndarray
    masks: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    log_probs: np.ndarray
    bootstrap_value: float

    def __len__(self) -> int:
        return len(self.actions)


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: float,
    discount: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets (advantage + value)."""
    n = len(rewards)
    advantages = np.zeros(n, dtype=np.float64)
    next_value = bootstrap_value
    running = 0.0
    for t in range(n - 1, -1, -1):
        non_terminal = 0.0 if dones[t] else 1.0
        delta = rewards[t] + discount * next_value * non_terminal - values[t]
        running = delta + discount * lam * non_terminal * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values


class _RolloutCollector:
    """Streams environment steps across instances, preserving episode state between buffers."""

    def __init__(self, env_factory: EnvFactory, instances: Sequence[Instance], rng):
        self.env_factory = env_factory
        self.instances = instances
        self.rng = rng
        self.instance_cursor = 0
        self.env: SchedulingEnv | None = None
        self.obs: np.ndarray | None = None
        self.mask: np.ndarray | None = None
        self.episodes_done = 0
        self.finished_returns: list[float] = []
        self.finished_makespans: list[int] = []
        self._ep_return = 0.0

    def _begin_episode(self) -> None:
        instance = self.instances[self.instance_cursor % len(self.instances)]
        self.instance_cursor += 1
        self.env = self.env_factory(instance)
        self.obs, self.mask = self.env.reset()
        self._ep_return = 0.0

    def collect(self, n_steps: int, policy: MlpParams, value: MlpParams) -> Trajectory:
        obs_buf, mask_buf, act_buf = [], [], []
        rew_buf, done_buf, val_buf, logp_buf = [], [], [], []
        for _ in range(n_steps):
            if self.env is None:
                self._begin_episode()
            obs, mask = self.obs, self.mask
            logits = mlp_forward(policy, obs)
            logp_all = masked_log_probs(logits, mask)
            probs = np.exp(logp_all)
            action = sample_action(probs, self.rng)
            v = float(mlp_forward(value, obs)[0])
            result = self.env.step(action)

            obs_buf.append(obs)
            mask_buf.append(mask)
            act_buf.append(action)
            rew_buf.append(result.reward)
            done_buf.append(result.done)
            val_buf.append(v)
            logp_buf.append(float(logp_all[action]))

            self._ep_return += result.reward
            if result.done:
                self.finished_returns.append(self._ep_return)
                self.finished_makespans.append(result.info["makespan"])
                self.episodes_done += 1
                self.env = None
            else:
                self.obs, self.mask = result.observation, result.mask

        if self.env is None:
            bootstrap = 0.0
        else:
            bootstrap = float(mlp_forward(value, self.obs)[0])
        return Trajectory(
            observations=np.stack(obs_buf),
            masks=np.stack(mask_buf),
            actions=np.array(act_buf, dtype=np.int64),
            rewards=np.array(rew_buf, dtype=np.float64),
            dones=np.array(done_buf, dtype=bool),
            values=np.array(val_buf, dtype=np.float64),
            log_probs=np.array(logp_buf, dtype=np.float64),
            bootstrap_value=bootstrap,
        )


def train_ppo(
    env_factory: EnvFactory,
    instances: Sequence[Instance],
    config: PpoConfig,
    run_id: str = "ppo",
) -> tuple[MlpParams, MlpParams, list[MetricsEvent]]:
    """Train policy and value networks; returns both plus one MetricsEvent per update."""
    if not instances:
        raise ValueError("instances must be non-empty")
    config.validate()
    rng = np.random.Generator(np.random.Philox(key=config.seed))

    probe = env_factory(instances[0])
    obs, mask = probe.reset()
    obs_dim, n_actions = len(obs), len(mask)
    policy = init_mlp([obs_dim, *config.hidden, n_actions], rng, output_gain=0.01)
    value = init_mlp([obs_dim, *config.hidden, 1], rng, output_gain=1.0)
    policy_opt = Adam(policy, lr=config.learning_rate)
    value_opt = Adam(value, lr=config.learning_rate)

    collector = _RolloutCollector(env_factory, instances, rng)
    events: list[MetricsEvent] = []
    n_updates = math.ceil(config.total_steps / config.steps_per_update)
    steps_done = 0

    for update in range(n_updates):
        traj = collector.collect(config.steps_per_update, policy, value)
        steps_done += len(traj)
        advantages, value_targets = compute_gae(
            traj.rewards, traj.values, traj.dones, traj.bootstrap_value,
            config.discount, config.gae_lambda,
        )
        adv_std = advantages.std()
        norm_adv = (advantages - advantages.mean()) / (adv_std + 1e-8)

        stats = _ppo_update(
            traj, norm_adv, value_targets, policy, value, policy_opt, value_opt, config, rng,
            update,
        )
        window_returns = collector.finished_returns[-50:]
        window_makespans = collector.finished_makespans[-50:]
        events.append(
            MetricsEvent(
                run_id=run_id,
                step=steps_done,
                episode=collector.episodes_done,
                scalars={
                    "return": float(np.mean(window_returns)) if window_returns else 0.0,
                    "makespan": float(np.mean(window_makespans)) if window_makespans else 0.0,
                    **stats,
                },
            )
        )
    return policy, value, events


def _ppo_update(
    traj: Trajectory,
    advantages: np.ndarray,
    value_targets: np.ndarray,
    policy: MlpParams,
    value: MlpParams,
    policy_opt: Adam,
    value_opt: Adam,
    config: PpoConfig,
    rng: np.random.Generator,
    update_index: int,
) -> dict[str, float]:
    n = len(traj)
    clip = config.clip_ratio
    policy_losses, value_losses, entropies, clip_fracs = [], [], [], []

    for _ in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.minibatch_size):
            idx = order[lo : lo + config.minibatch_size]
            obs = traj.observations[idx]
            masks = traj.masks[idx]
            actions = traj.actions[idx]
            adv = advantages[idx]
            old_logp = traj.log_probs[idx]
            targets = value_targets[idx]
            b = len(idx)

            logits = mlp_forward(policy, obs)
            policy_loss, entropy_mean, clip_fraction, upstream = clipped_objective_upstream(
                logits, masks, actions, adv, old_logp, clip, config.entropy_coef
            )

            vals = mlp_forward(value, obs)[:, 0]
            verr = vals - targets
            value_loss = float(np.mean(verr**2))

            total = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy_mean
            if not math.isfinite(total):
                raise TrainingDivergedError(
                    f"non-finite PPO loss at update {update_index}: policy {policy_loss}, "
                    f"value {value_loss}, entropy {entropy_mean}"
                )

            gw, gb = mlp_gradient(policy, obs, upstream)
            policy_opt.step(gw, gb)

            v_up = (2.0 * config.value_coef / b) * verr[:, None]
            gw, gb = mlp_gradient(value, obs, v_up)
            value_opt.step(gw, gb)

            policy_losses.append(policy_loss)
            value_losses.append(value_loss)
            entropies.append(entropy_mean)
            clip_fracs.append(clip_fraction)

    if not policy_losses:  # epochs == 0: evaluation-only pass, no parameter change
        return {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_fraction": 0.0}
    return {
        "policy_loss": float(np.mean(policy_losses)),
        "value_loss": float(np.mean(value_losses)),
        "entropy": float(np.mean(entropies)),
        "clip_fraction": float(np.mean(clip_fracs)),
    }
