import numpy as np
import pytest

from schedlab.env import (
    RewardMode,
    SchedulingEnv,
    action_mask,
    observation_length,
    observe,
    reset,
    step,
)
from schedlab.errors import InvalidActionError
from schedlab.instances import generate_instance
from schedlab.schedule import validate_schedule

from conftest import build_instance, fjssp_config, jssp_config

DENSE = RewardMode.DENSE_MAKESPAN_DELTA
SPARSE = RewardMode.SPARSE_TERMINAL


def test_reset_6x6():
    inst = generate_instance(jssp_config(seed=42), 0)
    obs, mask, state = reset(inst, DENSE)
    assert len(obs) == observation_length(6) == 25
    assert mask.tolist() == [True] * 6
    assert state.steps_taken == 0


def test_reset_1x1(single_task_instance):
    obs, mask, state = reset(single_task_instance, DENSE)
    assert len(obs) == 5
    assert mask.tolist() == [True]


def test_reset_is_deterministic():
    inst = generate_instance(jssp_config(seed=1), 0)
    a = reset(inst, DENSE)
    b = reset(inst, DENSE)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_single_task_dense_reward(single_task_instance):
    _, _, state = reset(single_task_instance, DENSE)
    result = step(state, 0)
    assert result.reward == -1.0
    assert result.done
    assert result.info["makespan"] == 5
    assert result.mask.tolist() == [False]


def test_single_task_sparse_reward(single_task_instance):
    _, _, state = reset(single_task_instance, SPARSE)
    result = step(state, 0)
    assert result.reward == -1.0 and result.done


def test_two_job_dense_rewards_hand_rolled():
    # p=3 and p=4 on different machines; UB=7
    inst = build_instance([[(0, 3, None)], [(1, 4, None)]], num_machines=2)
    _, _, state = reset(inst, DENSE)
    r0 = step(state, 0)
    assert r0.reward == pytest.approx(-3 / 7)
    r1 = step(state, 1)
    assert r1.reward == pytest.approx(-(4 - 3) / 7)
    assert r1.done and r1.info["makespan"] == 4


def test_step_on_completed_job_raises():
    inst = build_instance([[(0, 2, None)], [(0, 3, None)]], num_machines=1)
    _, _, state = reset(inst, DENSE)
    step(state, 0)
    with pytest.raises(InvalidActionError):
        step(state, 0)


def test_step_out_of_range_raises():
    inst = build_instance([[(0, 2, None)]], num_machines=1)
    _, _, state = reset(inst, DENSE)
    with pytest.raises(InvalidActionError):
        step(state, 1)
    with pytest.raises(InvalidActionError):
        step(state, -1)


def test_initial_observation_features(single_task_instance):
    obs, _, state = reset(single_task_instance, DENSE)
    assert obs[0] == 0.0  # fraction scheduled
    assert obs[1] == 1.0  # p / p_max
    assert obs[2] == 0.0  # job ready / UB
    assert obs[3] == 0.0  # earliest start / UB
    assert obs[-1] == 0.0  # makespan / UB


def test_terminal_observation_features():
    inst = build_instance([[(0, 2, None), (0, 3, None)]], num_machines=1)
    _, _, state = reset(inst, DENSE)
    step(state, 0)
    result = step(state, 0)
    obs = result.observation
    assert obs[0] == 1.0
    assert obs[1] == 0.0 and obs[3] == 0.0  # zeroed once the job is done
    assert obs[2] == pytest.approx(5 / 5)
    assert obs[-1] == 1.0
    assert not result.mask.any()


@pytest.mark.parametrize("seed", range(8))
def test_fuzz_episode_invariants(seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    for cfg in (
        jssp_config(num_jobs=4, tasks_per_job=4, num_machines=4, seed=seed),
        fjssp_config(num_jobs=3, tasks_per_job=4, num_machines=3, seed=seed),
        jssp_config(num_jobs=3, tasks_per_job=4, num_machines=4, with_tools=True,
                    num_tools=2, seed=seed),
    ):
        inst = generate_instance(cfg, 0)
        obs, mask, state = reset(inst, DENSE)
        steps = 0
        rewards = []
        while mask.any():
            assert obs.min() >= 0.0 and obs.max() <= 1.0
            assert np.isfinite(obs).all()
            # mask soundness: mask[j] iff job j has an unscheduled op
            expected = [state.schedule.next_op[j] < inst.tasks_per_job
                        for j in range(inst.num_jobs)]
            assert mask.tolist() == expected
            valid = np.flatnonzero(mask)
            result = step(state, int(valid[rng.integers(len(valid))]))
            rewards.append(result.reward)
            obs, mask = result.observation, result.mask
            steps += 1
        assert steps == inst.num_tasks
        assert result.done
        assert validate_schedule(state.schedule) == []
        # telescoping: dense rewards sum to -makespan/UB
        total = sum(rewards)
        assert abs(total - (-state.schedule.makespan / state.ub)) < 1e-12


def test_dense_and_sparse_returns_match():
    rng = np.random.Generator(np.random.Philox(key=3))
    inst = generate_instance(jssp_config(num_jobs=3, tasks_per_job=3, num_machines=3,
                                         seed=17), 0)
    actions = []
    _, mask, state = reset(inst, DENSE)
    dense_total = 0.0
    while mask.any():
        valid = np.flatnonzero(mask)
        a = int(valid[rng.integers(len(valid))])
        actions.append(a)
        result = step(state, a)
        dense_total += result.reward
        mask = result.mask
    _, _, state2 = reset(inst, SPARSE)
    sparse_total = 0.0
    for a in actions:
        r = step(state2, a)
        sparse_total += r.reward
    assert sparse_total == pytest.approx(dense_total, abs=1e-12)
    # identical action sequences give identical placements
    assert state.schedule.placements == state2.schedule.placements


def test_env_class_wrapper():
    inst = generate_instance(jssp_config(num_jobs=2, tasks_per_job=2, num_machines=2,
                                         seed=2), 0)
    env = SchedulingEnv(inst, DENSE)
    obs, mask = env.reset()
    assert len(obs) == 9 and mask.all()
    result = env.step(0)
    assert result.info["makespan"] > 0
    env2 = SchedulingEnv(inst, DENSE)
    with pytest.raises(InvalidActionError):
        env2.step(0)  # before reset


def test_determinism_full_episode():
    inst = generate_instance(jssp_config(seed=23), 0)

    def play():
        _, mask, state = reset(inst, DENSE)
        out = []
        while mask.any():
            a = int(np.flatnonzero(mask)[0])
            r = step(state, a)
            out.append((a, r.reward, r.observation.tolist()))
            mask = r.mask
        return out

    assert play() == play()


def test_observe_and_mask_are_pure():
    inst = generate_instance(jssp_config(num_jobs=2, tasks_per_job=2, num_machines=2,
                                         seed=5), 0)
    _, _, state = reset(inst, DENSE)
    step(state, 0)
    a1, m1 = observe(state), action_mask(state)
    a2, m2 = observe(state), action_mask(state)
    assert np.array_equal(a1, a2) and np.array_equal(m1, m2)
