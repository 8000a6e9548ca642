"""Priority dispatching rules and the random policy.

SPT/LPT/MTR are deterministic (ties broken by the lowest job index); RANDOM
samples uniformly over the valid jobs. ``select_action`` works on the exact
integer state; ``rule_policy`` exposes the same rules through the
(observation, mask) policy interface used by the evaluation harness. The two
are equivalent because the observation features preserve the comparisons the
rules need.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable

import numpy as np

from .env import EnvState
from .errors import NoValidActionError


class DispatchRule(str, Enum):
    SPT = "spt"
    LPT = "lpt"
    MTR = "mtr"
    RANDOM = "random"


def _valid_jobs(mask: np.ndarray) -> list[int]:
    valid = [int(j) for j in np.flatnonzero(np.asarray(mask, dtype=bool))]
    if not valid:
        raise NoValidActionError("action mask admits no valid job")
    return valid


def select_action(
    rule: DispatchRule,
    state: EnvState,
    mask: np.ndarray,
    rng: np.random.Generator | None = None,
) -> int:
    valid = _valid_jobs(mask)
    if rule is DispatchRule.RANDOM:
        if rng is None:
            raise ValueError("RANDOM rule needs an rng")
        return valid[int(rng.integers(len(valid)))]

    instance = state.instance
    next_op = state.schedule.next_op
    if rule is DispatchRule.SPT:
        return min(valid, key=lambda j: (instance.task(j, next_op[j]).processing_time, j))
    if rule is DispatchRule.LPT:
        return min(valid, key=lambda j: (-instance.task(j, next_op[j]).processing_time, j))
    if rule is DispatchRule.MTR:
        # most tasks remaining = fewest ops already scheduled
        return min(valid, key=lambda j: (next_op[j], j))
    raise ValueError(f"unhandled rule {rule}")


Policy = Callable[[np.ndarray, np.ndarray], int]


def rule_policy(rule: DispatchRule, rng: np.random.Generator | None = None) -> Policy:
    """Rule as an (observation, mask) policy.

    Relies on the observation layout: entry 4j+1 is the next-task processing
    time (normalized, so equal times stay equal) and entry 4j is the fraction
    of job j already scheduled (so the max-remaining job has the minimum).
    """
    if rule is DispatchRule.RANDOM and rng is None:
        raise ValueError("RANDOM rule needs an rng")

    def policy(obs: np.ndarray, mask: np.ndarray) -> int:
        valid = _valid_jobs(mask)
        if rule is DispatchRule.RANDOM:
            return valid[int(rng.integers(len(valid)))]
        if rule is DispatchRule.SPT:
            return min(valid, key=lambda j: (obs[4 * j + 1], j))
        if rule is DispatchRule.LPT:
            return min(valid, key=lambda j: (-obs[4 * j + 1], j))
        return min(valid, key=lambda j: (obs[4 * j], j))

    return policy
