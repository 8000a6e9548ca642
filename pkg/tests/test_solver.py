import numpy as np
import pytest

from schedlab.baselines import DispatchRule, rule_policy
from schedlab.env import RewardMode
from schedlab.errors import OracleSizeError
from schedlab.evaluate import run_episode
from schedlab.instances import generate_instance
from schedlab.schedule import Schedule, validate_schedule
from schedlab.solver import (
    SolveLimits,
    lower_bound,
    permutation_oracle,
    solve_optimal,
    timing_oracle,
)

from conftest import build_instance, fjssp_config, jssp_config


def interleave_instance():
    # jobs (m0 p=2, m1 p=2) and (m1 p=2, m0 p=2): perfect interleave gives 4
    return build_instance(
        [[(0, 2, None), (1, 2, None)], [(1, 2, None), (0, 2, None)]], num_machines=2
    )


def test_single_job_chain():
    inst = build_instance([[(0, 2, None), (0, 3, None)]], num_machines=1)
    result = solve_optimal(inst)
    assert result.makespan == 5
    assert result.proof_status == "optimal"
    assert validate_schedule(result.schedule) == []


def test_two_jobs_one_machine():
    inst = build_instance([[(0, 3, None)], [(0, 4, None)]], num_machines=1)
    result = solve_optimal(inst)
    assert result.makespan == 7
    assert result.proof_status == "optimal"


@pytest.mark.parametrize("seed", range(25))
def test_solver_matches_oracle_2x3(seed):
    cfg = jssp_config(num_jobs=2, tasks_per_job=3, num_machines=3, seed=seed)
    inst = generate_instance(cfg, 0)
    assert solve_optimal(inst).makespan == permutation_oracle(inst)


def test_node_limit_one_returns_spt_incumbent():
    inst = generate_instance(jssp_config(num_jobs=3, tasks_per_job=3, num_machines=3,
                                         seed=10), 0)
    limited = solve_optimal(inst, SolveLimits(node_limit=1))
    assert limited.proof_status == "feasible"
    assert limited.nodes_expanded == 1
    spt_ms, _, _ = run_episode(rule_policy(DispatchRule.SPT), inst,
                               RewardMode.DENSE_MAKESPAN_DELTA)
    assert limited.makespan == spt_ms


def test_anytime_incumbent_non_increasing():
    inst = generate_instance(jssp_config(num_jobs=4, tasks_per_job=4, num_machines=4,
                                         seed=3), 0)
    previous = None
    for limit in (1, 10, 100, 1000, 100000):
        ms = solve_optimal(inst, SolveLimits(node_limit=limit)).makespan
        if previous is not None:
            assert ms <= previous
        previous = ms


def test_solver_result_schedule_consistent():
    inst = generate_instance(
        jssp_config(num_jobs=3, tasks_per_job=3, num_machines=3, with_tools=True,
                    num_tools=2, seed=8), 0
    )
    result = solve_optimal(inst)
    assert result.schedule.makespan == result.makespan
    assert validate_schedule(result.schedule) == []
    assert result.wall_time_ms >= 0.0


def test_solver_dominates_dispatch_rules():
    for seed in range(5):
        inst = generate_instance(jssp_config(num_jobs=4, tasks_per_job=3, num_machines=3,
                                             seed=seed + 50), 0)
        best = solve_optimal(inst).makespan
        for rule in (DispatchRule.SPT, DispatchRule.LPT, DispatchRule.MTR):
            ms, _, _ = run_episode(rule_policy(rule), inst, RewardMode.DENSE_MAKESPAN_DELTA)
            assert best <= ms


def test_lower_bound_job_chain():
    inst = build_instance([[(0, 2, None), (0, 3, None)]], num_machines=1)
    assert lower_bound(Schedule(inst)) >= 5
    assert lower_bound(Schedule(inst)) <= solve_optimal(inst).makespan


def test_lower_bound_machine_load():
    inst = build_instance([[(0, 3, None)], [(0, 4, None)]], num_machines=1)
    assert lower_bound(Schedule(inst)) >= 7


def test_lower_bound_tool_load():
    inst = build_instance([[(0, 3, 0)], [(1, 4, 0)]], num_machines=2, num_tools=1)
    assert lower_bound(Schedule(inst)) >= 7


@pytest.mark.parametrize("seed", range(12))
def test_lower_bound_admissible_along_random_paths(seed):
    """At every node of a random dispatch path, bound <= best completion."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    cfg = [
        jssp_config(num_jobs=2, tasks_per_job=3, num_machines=2, seed=seed),
        jssp_config(num_jobs=3, tasks_per_job=2, num_machines=2, with_tools=True,
                    num_tools=2, seed=seed),
        fjssp_config(num_jobs=2, tasks_per_job=3, num_machines=2, seed=seed),
    ][seed % 3]
    inst = generate_instance(cfg, 0)

    def best_completion(schedule):
        # exhaustive completion of the residual problem (oracle of the node)
        best = inst.total_processing_time
        if schedule.complete:
            return schedule.makespan

        def rec():
            nonlocal best
            if schedule.complete:
                best = min(best, schedule.makespan)
                return
            for j in range(inst.num_jobs):
                k = schedule.next_op[j]
                if k >= inst.tasks_per_job:
                    continue
                task = inst.task(j, k)
                for m in task.eligible_machines:
                    s = schedule.earliest_feasible_start(task, m)
                    schedule.place_task(task, m, s)
                    rec()
                    schedule.remove_last_placement(j)

        rec()
        return best

    schedule = Schedule(inst)
    while not schedule.complete:
        assert lower_bound(schedule) <= best_completion(schedule)
        jobs = [j for j in range(inst.num_jobs) if schedule.next_op[j] < inst.tasks_per_job]
        j = jobs[rng.integers(len(jobs))]
        task = inst.task(j, schedule.next_op[j])
        m, s = schedule.best_machine(task)
        schedule.place_task(task, m, s)
    assert lower_bound(schedule) == schedule.makespan


def test_permutation_oracle_single_task(single_task_instance):
    assert permutation_oracle(single_task_instance) == 5


def test_permutation_oracle_interleave():
    assert permutation_oracle(interleave_instance()) == 4


def test_permutation_oracle_guard():
    inst = generate_instance(jssp_config(num_jobs=3, tasks_per_job=3, num_machines=3,
                                         seed=0), 0)
    with pytest.raises(OracleSizeError):
        permutation_oracle(inst)


def test_timing_oracle_single_task(single_task_instance):
    assert timing_oracle(single_task_instance) == 5


def test_timing_oracle_interleave():
    assert timing_oracle(interleave_instance()) == 4


def test_timing_oracle_guard():
    inst = generate_instance(jssp_config(num_jobs=4, tasks_per_job=2, num_machines=2,
                                         seed=0), 0)
    with pytest.raises(OracleSizeError):
        timing_oracle(inst)


def test_timing_oracle_rejects_small_horizon(single_task_instance):
    with pytest.raises(ValueError):
        timing_oracle(single_task_instance, horizon=4)


@pytest.mark.parametrize("seed", range(20))
def test_oracles_agree_with_tools(seed):
    cfg = jssp_config(num_jobs=3, tasks_per_job=2, num_machines=2, with_tools=True,
                      num_tools=2, seed=seed + 400)
    inst = generate_instance(cfg, 0)
    assert timing_oracle(inst) == permutation_oracle(inst) == solve_optimal(inst).makespan


@pytest.mark.parametrize("seed", range(10))
def test_oracles_agree_fjssp(seed):
    cfg = fjssp_config(num_jobs=3, tasks_per_job=2, num_machines=2, seed=seed + 800)
    inst = generate_instance(cfg, 0)
    assert timing_oracle(inst) == permutation_oracle(inst) == solve_optimal(inst).makespan
