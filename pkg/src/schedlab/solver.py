"""Exact makespan minimization via branch-and-bound, plus brute-force oracles.

The search branches over dispatch decisions: a node is a partial schedule and
each child dispatches the next unscheduled task of some job (for FJSSP, on
some eligible machine) at its earliest feasible start, gap insertion
included. Every active schedule is reachable this way (dispatching in
nondecreasing start order reproduces it), so for regular objectives the
family contains an optimum; ``timing_oracle`` certifies the same under tool
constraints by exhausting all integer start assignments on small instances.

For plain JSSP the children are further restricted to the classic
conflict set: among all candidates, take the machine on which the earliest
completion c* occurs and branch only on candidates for that machine starting
before c*. That restriction preserves all active schedules. It leans on the
machine being the only shared resource, so tool-constrained and flexible
instances keep the unrestricted branching.

Children are explored in order of the dispatched task's completion time, so
the first dive doubles as a greedy rollout that tightens the incumbent early.
Identical partial schedules reached through different dispatch orders are
pruned through a capped transposition set keyed by the exact placement
history, which keeps the search sound.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import InternalError, OracleSizeError
from .instances import Instance, PROOF_FEASIBLE, PROOF_OPTIMAL, validate_instance
from .schedule import Schedule, Timeline

_TRANSPOSITION_CAP = 1_000_000
_TIME_CHECK_MASK = 1023
_INF = float("inf")


@dataclass(frozen=True)
class SolveLimits:
    node_limit: int = 10_000_000
    time_limit_s: float = 60.0


@dataclass
class SolveResult:
    makespan: int
    schedule: Schedule
    proof_status: str
    nodes_expanded: int
    wall_time_ms: float


def _spt_rollout(instance: Instance) -> tuple[Schedule, list[tuple[int, int, int]]]:
    """Greedy shortest-processing-time rollout; the solver's initial incumbent."""
    schedule = Schedule(instance)
    n_jobs, n_ops = instance.num_jobs, instance.tasks_per_job
    history: list[tuple[int, int, int]] = []
    while not schedule.complete:
        j = min(
            (j for j in range(n_jobs) if schedule.next_op[j] < n_ops),
            key=lambda j: (instance.task(j, schedule.next_op[j]).processing_time, j),
        )
        task = instance.task(j, schedule.next_op[j])
        machine, start = schedule.best_machine(task)
        schedule.place_task(task, machine, start)
        history.append((j, machine, start))
    return schedule, history


def lower_bound(schedule: Schedule) -> int:
    """Admissible completion-time bound for a partial schedule.

    Maximum of: the current makespan; per job, ready time plus remaining
    chain work; per machine and per tool, remaining pinned work added to
    either the resource's total busy time or the earliest conceivable start
    among its remaining tasks. All three stay below the true best completion
    reachable from the node, gap insertion included.
    """
    instance = schedule.instance
    n_ops = instance.tasks_per_job
    lb = schedule.makespan

    machine_rem = [0] * instance.num_machines
    machine_est = [_INF] * instance.num_machines
    tool_rem = [0] * instance.num_tools
    tool_est = [_INF] * instance.num_tools

    for j in range(instance.num_jobs):
        est = schedule.job_ready[j]
        for k in range(schedule.next_op[j], n_ops):
            task = instance.task(j, k)
            p = task.processing_time
            if len(task.eligible_machines) == 1:
                m = task.eligible_machines[0]
                machine_rem[m] += p
                if est < machine_est[m]:
                    machine_est[m] = est
            tool = task.tool
            if tool is not None:
                tool_rem[tool] += p
                if est < tool_est[tool]:
                    tool_est[tool] = est
            est += p
        if est > lb:  # est is now ready + remaining chain work
            lb = est

    for m in range(instance.num_machines):
        if machine_rem[m]:
            cand = schedule.machine_timelines[m].busy_total() + machine_rem[m]
            if cand > lb:
                lb = cand
            cand = machine_est[m] + machine_rem[m]
            if cand > lb:
                lb = int(cand)
    for t in range(instance.num_tools):
        if tool_rem[t]:
            cand = schedule.tool_timelines[t].busy_total() + tool_rem[t]
            if cand > lb:
                lb = cand
            cand = tool_est[t] + tool_rem[t]
            if cand > lb:
                lb = int(cand)
    return lb


def solve_optimal(instance: Instance, limits: SolveLimits | None = None) -> SolveResult:
    """Branch-and-bound over dispatch permutations with earliest-gap placement.

    Returns proof_status "optimal" when the search completes within the
    limits, otherwise "feasible" with the best incumbent found so far.
    """
    validate_instance(instance)
    if limits is None:
        limits = SolveLimits()
    t_start = time.perf_counter()
    deadline = t_start + limits.time_limit_s

    incumbent, incumbent_history = _spt_rollout(instance)

    n_jobs, n_ops, n_machines = instance.num_jobs, instance.tasks_per_job, instance.num_machines
    n_tools = instance.num_tools

    # flat per-(job, op) tables for the hot loops
    proc = [[instance.task(j, k).processing_time for k in range(n_ops)] for j in range(n_jobs)]
    elig = [[list(instance.task(j, k).eligible_machines) for k in range(n_ops)] for j in range(n_jobs)]
    tool_of = [[instance.task(j, k).tool for k in range(n_ops)] for j in range(n_jobs)]
    # chain[j][k]: remaining work of job j from op k on; tail excludes the op itself
    chain = [[0] * (n_ops + 1) for _ in range(n_jobs)]
    for j in range(n_jobs):
        for k in range(n_ops - 1, -1, -1):
            chain[j][k] = chain[j][k + 1] + proc[j][k]

    uses_tools = any(t is not None for row in tool_of for t in row)
    flexible = any(len(ms) > 1 for row in elig for ms in row)
    restrict_to_conflict_set = not uses_tools and not flexible

    machine_tl = [Timeline() for _ in range(n_machines)]
    tool_tl = [Timeline() for _ in range(n_tools)]
    job_ready = [0] * n_jobs
    next_op = [0] * n_jobs

    horizon = instance.total_processing_time + 1
    encode_base = horizon * n_machines + 1
    job_code = [0] * n_jobs
    seen: set[tuple[int, ...]] = set()

    best = incumbent.makespan
    best_history: list[tuple[int, int, int]] | None = None
    history: list[tuple[int, int, int]] = []
    state = {"nodes": 0, "limit_hit": False}
    n_tasks = instance.num_tasks

    def earliest_start(j: int, k: int, m: int) -> int:
        t = machine_tl[m].earliest_fit(job_ready[j], proc[j][k])
        tool = tool_of[j][k]
        if tool is None:
            return t
        fit_m = machine_tl[m].earliest_fit
        fit_t = tool_tl[tool].earliest_fit
        p = proc[j][k]
        while True:
            t2 = fit_t(t, p)
            if t2 == t:
                return t
            t = fit_m(t2, p)
            if t == t2:
                return t

    def bound(ms_now: int) -> int:
        lb = ms_now
        machine_rem = [0] * n_machines
        machine_est = [_INF] * n_machines
        machine_tail = [_INF] * n_machines
        tool_rem = [0] * n_tools
        tool_est = [_INF] * n_tools
        tool_tail = [_INF] * n_tools
        for j in range(n_jobs):
            k0 = next_op[j]
            if k0 >= n_ops:
                continue
            est = job_ready[j]
            chain_j = chain[j]
            v = est + chain_j[k0]
            if v > lb:
                lb = v
            proc_j, elig_j, tool_j = proc[j], elig[j], tool_of[j]
            for k in range(k0, n_ops):
                p = proc_j[k]
                ms_list = elig_j[k]
                if len(ms_list) == 1:
                    m = ms_list[0]
                    machine_rem[m] += p
                    if est < machine_est[m]:
                        machine_est[m] = est
                    t_after = chain_j[k + 1]
                    if t_after < machine_tail[m]:
                        machine_tail[m] = t_after
                tool = tool_j[k]
                if tool is not None:
                    tool_rem[tool] += p
                    if est < tool_est[tool]:
                        tool_est[tool] = est
                    t_after = chain_j[k + 1]
                    if t_after < tool_tail[tool]:
                        tool_tail[tool] = t_after
                est += p
        for m in range(n_machines):
            rem = machine_rem[m]
            if rem:
                v = machine_tl[m].busy_total() + rem
                if v > lb:
                    lb = v
                v = machine_est[m] + rem + machine_tail[m]
                if v > lb:
                    lb = int(v)
        for t in range(n_tools):
            rem = tool_rem[t]
            if rem:
                v = tool_tl[t].busy_total() + rem
                if v > lb:
                    lb = v
                v = tool_est[t] + rem + tool_tail[t]
                if v > lb:
                    lb = int(v)
        return lb

    def expand(ms_now: int, depth: int) -> None:
        nonlocal best, best_history
        state["nodes"] += 1
        if state["nodes"] >= limits.node_limit:
            state["limit_hit"] = True
            return
        if (state["nodes"] & _TIME_CHECK_MASK) == 0 and time.perf_counter() > deadline:
            state["limit_hit"] = True
            return

        children = []
        for j in range(n_jobs):
            k = next_op[j]
            if k >= n_ops:
                continue
            p = proc[j][k]
            for m in elig[j][k]:
                s = earliest_start(j, k, m)
                children.append((s + p, j, m, s))
        if restrict_to_conflict_set:
            c_star, _, m_star, _ = min(children)
            children = [c for c in children if c[2] == m_star and c[3] < c_star]
        children.sort()

        for completion, j, m, s in children:
            if state["limit_hit"]:
                return
            k = next_op[j]
            end = completion
            machine_tl[m].insert(s, end)
            tool = tool_of[j][k]
            if tool is not None:
                tool_tl[tool].insert(s, end)
            prev_ready = job_ready[j]
            job_ready[j] = end
            next_op[j] = k + 1
            prev_code = job_code[j]
            job_code[j] = prev_code * encode_base + (m * horizon + s + 1)
            history.append((j, m, s))

            key = tuple(job_code)
            fresh = key not in seen
            if fresh:
                if len(seen) < _TRANSPOSITION_CAP:
                    seen.add(key)
                ms_child = end if end > ms_now else ms_now
                if depth + 1 == n_tasks:
                    if ms_child < best:
                        best = ms_child
                        best_history = list(history)
                elif bound(ms_child) < best:
                    expand(ms_child, depth + 1)

            history.pop()
            job_code[j] = prev_code
            next_op[j] = k
            job_ready[j] = prev_ready
            machine_tl[m].remove(s, end)
            if tool is not None:
                tool_tl[tool].remove(s, end)

    expand(0, 0)

    chosen = best_history if best_history is not None else incumbent_history
    schedule = _replay(instance, chosen)
    if schedule.makespan != best:
        raise InternalError(
            f"solver bookkeeping mismatch: replayed makespan {schedule.makespan} != best {best}"
        )
    wall_ms = (time.perf_counter() - t_start) * 1000.0
    return SolveResult(
        makespan=best,
        schedule=schedule,
        proof_status=PROOF_FEASIBLE if state["limit_hit"] else PROOF_OPTIMAL,
        nodes_expanded=state["nodes"],
        wall_time_ms=wall_ms,
    )


def _replay(instance: Instance, history: list[tuple[int, int, int]]) -> Schedule:
    schedule = Schedule(instance)
    for j, m, s in history:
        task = instance.task(j, schedule.next_op[j])
        schedule.place_task(task, m, s)
    return schedule


def solve_and_annotate(
    instance: Instance, limits: SolveLimits | None = None
) -> tuple[Instance, SolveResult]:
    result = solve_optimal(instance, limits)
    return instance.annotated(result.makespan, result.proof_status), result


# ---------------------------------------------------------------------------
# Verification oracles
# ---------------------------------------------------------------------------

def permutation_oracle(instance: Instance) -> int:
    """Minimum makespan over every precedence-consistent dispatch ordering.

    Exhaustive, unpruned enumeration of the same schedule family the solver
    searches: every interleaving of the job sequences, and for FJSSP every
    eligible machine at every dispatch, built with earliest-gap placement.
    """
    validate_instance(instance)
    if instance.num_tasks > 8:
        raise OracleSizeError(
            f"permutation_oracle is limited to 8 tasks, got {instance.num_tasks}"
        )
    schedule = Schedule(instance)
    n_jobs, n_ops, n_tasks = instance.num_jobs, instance.tasks_per_job, instance.num_tasks
    best = instance.total_processing_time  # serial schedule is always reachable

    def rec(placed: int) -> None:
        nonlocal best
        if placed == n_tasks:
            if schedule.makespan < best:
                best = schedule.makespan
            return
        for j in range(n_jobs):
            k = schedule.next_op[j]
            if k >= n_ops:
                continue
            task = instance.task(j, k)
            for m in task.eligible_machines:
                s = schedule.earliest_feasible_start(task, m)
                schedule.place_task(task, m, s)
                rec(placed + 1)
                schedule.remove_last_placement(j)

    rec(0)
    return best


def timing_oracle(instance: Instance, horizon: int | None = None) -> int:
    """Minimum makespan over all integer start-time assignments up to a horizon.

    Independent of the dispatch/earliest-gap machinery: tasks get explicit
    integer starts checked directly against precedence, machine and tool
    disjointness. Runs the feasibility decision for increasing target
    makespans, which is equivalent to exhausting all assignments within the
    horizon and taking the minimum. Certifies on small instances that the
    solver's schedule family contains a true optimum.
    """
    validate_instance(instance)
    if instance.num_tasks > 6:
        raise OracleSizeError(f"timing_oracle is limited to 6 tasks, got {instance.num_tasks}")
    ub = instance.total_processing_time
    if horizon is None:
        horizon = ub
    if horizon < ub:
        raise ValueError(f"horizon {horizon} below the trivial upper bound {ub}")

    n_jobs, n_ops = instance.num_jobs, instance.tasks_per_job
    tasks = [instance.task(j, k) for j in range(n_jobs) for k in range(n_ops)]
    # tail[i]: processing time of the ops after task i within its job
    tail = []
    for j in range(n_jobs):
        times = [instance.task(j, k).processing_time for k in range(n_ops)]
        for k in range(n_ops):
            tail.append(sum(times[k + 1 :]))

    lb = 0
    for j in range(n_jobs):
        lb = max(lb, sum(instance.task(j, k).processing_time for k in range(n_ops)))
    machine_load = [0] * instance.num_machines
    tool_load = [0] * instance.num_tools
    for t in tasks:
        if len(t.eligible_machines) == 1:
            machine_load[t.eligible_machines[0]] += t.processing_time
        if t.tool is not None:
            tool_load[t.tool] += t.processing_time
    lb = max([lb, *machine_load, *tool_load])

    for target in range(lb, horizon + 1):
        if _feasible_within(instance, tasks, tail, target):
            return target
    raise InternalError("no feasible assignment within the horizon; serial schedule should fit")


def _feasible_within(instance, tasks, tail, target: int) -> bool:
    machine_busy: list[list[tuple[int, int]]] = [[] for _ in range(instance.num_machines)]
    tool_busy: list[list[tuple[int, int]]] = [[] for _ in range(instance.num_tools)]
    job_end = [0] * instance.num_jobs
    n = len(tasks)

    def rec(i: int) -> bool:
        if i == n:
            return True
        task = tasks[i]
        p = task.processing_time
        lo = job_end[task.job_id]
        hi = target - p - tail[i]
        tool_list = tool_busy[task.tool] if task.tool is not None else None
        for m in task.eligible_machines:
            busy = machine_busy[m]
            s = lo
            while s <= hi:
                # jump past every interval overlapping [s, s+p)
                bump = -1
                for a, b in busy:
                    if s < b and s + p > a and b > bump:
                        bump = b
                if tool_list is not None:
                    for a, b in tool_list:
                        if s < b and s + p > a and b > bump:
                            bump = b
                if bump >= 0:
                    s = bump
                    continue
                busy.append((s, s + p))
                if tool_list is not None:
                    tool_list.append((s, s + p))
                prev_end = job_end[task.job_id]
                job_end[task.job_id] = s + p
                if rec(i + 1):
                    return True
                job_end[task.job_id] = prev_end
                busy.pop()
                if tool_list is not None:
                    tool_list.pop()
                s += 1
        return False

    return rec(0)
