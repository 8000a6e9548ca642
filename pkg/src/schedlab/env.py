"""Episodic scheduling environment: reset/step, action masking, reward strategies.

An episode schedules one instance, one task per step. The action is a job
index; the job's next unscheduled task is placed on the machine with the
earliest feasible start (ties to the lowest machine id), at that start,
never moving already placed tasks. Every episode lasts exactly
num_jobs * tasks_per_job steps.

Rewards are negated and normalized so that maximizing return minimizes the
makespan: the dense strategy pays the per-step makespan increase,
-(C_after - C_before) / UB, and the sparse strategy pays -C_final / UB on the
final step only, where UB is the instance's total processing time. Both
strategies yield the same undiscounted episode return for the same action
sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .errors import InvalidActionError
from .instances import Instance
from .schedule import Schedule


class RewardMode(str, Enum):
    DENSE_MAKESPAN_DELTA = "dense"
    SPARSE_TERMINAL = "sparse"


@dataclass
class EnvState:
    schedule: Schedule
    mode: RewardMode
    steps_taken: int
    ub: int  # sum of all processing times; normalization constant
    p_max: int

    @property
    def instance(self) -> Instance:
        return self.schedule.instance

    @property
    def done(self) -> bool:
        return self.steps_taken == self.instance.num_tasks


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    mask: np.ndarray
    info: dict[str, Any] = field(default_factory=dict)


def observation_length(num_jobs: int) -> int:
    return 4 * num_jobs + 1


def observe(state: EnvState) -> np.ndarray:
    """Fixed-length feature vector, all entries in [0, 1].

    Per job j, at offset 4j: fraction of its ops scheduled; next-task
    processing time / p_max (0 once the job is done); job ready time / UB;
    earliest feasible start of the next task across eligible machines / UB
    (0 once done). The final entry is the current makespan / UB.
    """
    schedule = state.schedule
    instance = state.instance
    n_ops = instance.tasks_per_job
    obs = np.zeros(observation_length(instance.num_jobs), dtype=np.float64)
    for j in range(instance.num_jobs):
        k = schedule.next_op[j]
        base = 4 * j
        obs[base] = k / n_ops
        obs[base + 2] = schedule.job_ready[j] / state.ub
        if k < n_ops:
            task = instance.task(j, k)
            obs[base + 1] = task.processing_time / state.p_max
            _, start = schedule.best_machine(task)
            obs[base + 3] = start / state.ub
    obs[-1] = schedule.makespan / state.ub
    return obs


def action_mask(state: EnvState) -> np.ndarray:
    """Boolean vector over jobs: True iff the job still has an unscheduled task."""
    n_ops = state.instance.tasks_per_job
    return np.array([k < n_ops for k in state.schedule.next_op], dtype=bool)


def reset(instance: Instance, mode: RewardMode) -> tuple[np.ndarray, np.ndarray, EnvState]:
    state = EnvState(
        schedule=Schedule(instance),
        mode=mode,
        steps_taken=0,
        ub=instance.total_processing_time,
        p_max=instance.max_processing_time,
    )
    return observe(state), action_mask(state), state


def step(state: EnvState, action: int) -> StepResult:
    """Place the next unscheduled task of job ``action`` at its earliest start.

    Invalid or masked actions raise InvalidActionError; there is no
    penalty-reward fallback.
    """
    instance = state.instance
    if not (0 <= action < instance.num_jobs):
        raise InvalidActionError(
            f"action {action} out of range [0, {instance.num_jobs})"
        )
    schedule = state.schedule
    if schedule.next_op[action] >= instance.tasks_per_job:
        raise InvalidActionError(f"job {action} is already fully scheduled")

    task = instance.task(action, schedule.next_op[action])
    c_before = schedule.makespan
    machine, start = schedule.best_machine(task)
    placement = schedule.place_task(task, machine, start)
    c_after = schedule.makespan
    state.steps_taken += 1

    done = state.steps_taken == instance.num_tasks
    if state.mode is RewardMode.DENSE_MAKESPAN_DELTA:
        reward = -(c_after - c_before) / state.ub
    else:
        reward = -c_after / state.ub if done else 0.0

    return StepResult(
        observation=observe(state),
        reward=reward,
        done=done,
        mask=action_mask(state),
        info={"makespan": c_after, "last_placement": placement},
    )


class SchedulingEnv:
    """Stateful convenience wrapper over the functional reset/step interface.

    This is also the environment-variant hook: trainers and the evaluation
    harness only require the reset()/step() surface below, so alternative
    action semantics can be dropped in via a different factory.
    """

    def __init__(self, instance: Instance, mode: RewardMode = RewardMode.DENSE_MAKESPAN_DELTA):
        self.instance = instance
        self.mode = mode
        self.state: EnvState | None = None

    def reset(self) -> tuple[np.ndarray, np.ndarray]:
        obs, mask, self.state = reset(self.instance, self.mode)
        return obs, mask

    def step(self, action: int) -> StepResult:
        if self.state is None:
            raise InvalidActionError("step() before reset()")
        return step(self.state, action)

    @property
    def schedule(self) -> Schedule:
        if self.state is None:
            raise InvalidActionError("no active episode")
        return self.state.schedule
