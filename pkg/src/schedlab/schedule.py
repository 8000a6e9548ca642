"""Partial schedules with per-resource busy timelines and earliest-gap placement.

All intervals are half-open ``[start, end)`` over integer time, so a task
ending at t never conflicts with one starting at t. Placement never moves an
existing interval; the earliest feasible start may fall into an idle gap
between existing intervals (gap insertion).

A Schedule is a single-owner mutable value. The environment, the dispatching
rules and the solver all build schedules exclusively through
``place_task``, which preserves every invariant by construction;
``validate_schedule`` re-derives the invariants from the placements alone and
is the independent check used by tests and the evaluation harness.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from .errors import ConstraintViolationError, MalformedRecordError
from .instances import Instance, Task

VIOLATION_PRECEDENCE = "precedence"
VIOLATION_MACHINE_OVERLAP = "machine-overlap"
VIOLATION_TOOL_OVERLAP = "tool-overlap"
VIOLATION_ELIGIBILITY = "eligibility"
VIOLATION_NEGATIVE_TIME = "negative-time"


@dataclass(frozen=True)
class Placement:
    job_id: int
    op_index: int
    machine: int
    start: int
    end: int
    tool: int | None = None


@dataclass(frozen=True)
class Violation:
    kind: str
    tasks: tuple[tuple[int, int], ...]
    detail: str


class Timeline:
    """Sorted disjoint busy intervals on one resource.

    Touching intervals ([0,3) next to [3,5)) stay separate so that removal by
    exact interval remains possible for solver backtracking.
    """

    __slots__ = ("_starts", "_ends")

    def __init__(self):
        self._starts: list[int] = []
        self._ends: list[int] = []

    def __len__(self) -> int:
        return len(self._starts)

    def intervals(self) -> list[tuple[int, int]]:
        return list(zip(self._starts, self._ends))

    def busy_total(self) -> int:
        return sum(e - s for s, e in zip(self._starts, self._ends))

    def earliest_fit(self, t: int, duration: int) -> int:
        """Smallest t' >= t such that [t', t'+duration) is idle."""
        starts, ends = self._starts, self._ends
        i = bisect_right(starts, t) - 1
        if i >= 0 and ends[i] > t:
            t = ends[i]
        i += 1
        n = len(starts)
        while i < n and starts[i] < t + duration:
            t = ends[i]
            i += 1
        return t

    def is_free(self, start: int, end: int) -> bool:
        return self.first_conflict(start, end) is None

    def first_conflict(self, start: int, end: int) -> tuple[int, int] | None:
        """Return the earliest busy interval overlapping [start, end), if any."""
        starts, ends = self._starts, self._ends
        i = bisect_right(starts, start) - 1
        if i >= 0 and ends[i] > start:
            return (starts[i], ends[i])
        i += 1
        if i < len(starts) and starts[i] < end:
            return (starts[i], ends[i])
        return None

    def insert(self, start: int, end: int) -> None:
        conflict = self.first_conflict(start, end)
        if conflict is not None:
            raise ConstraintViolationError(
                f"interval [{start},{end}) overlaps busy [{conflict[0]},{conflict[1]})",
                interval=conflict,
            )
        i = bisect_right(self._starts, start)
        self._starts.insert(i, start)
        self._ends.insert(i, end)

    def remove(self, start: int, end: int) -> None:
        i = bisect_right(self._starts, start) - 1
        if i < 0 or self._starts[i] != start or self._ends[i] != end:
            raise ValueError(f"interval [{start},{end}) not present")
        del self._starts[i]
        del self._ends[i]

    def copy(self) -> "Timeline":
        dup = Timeline()
        dup._starts = list(self._starts)
        dup._ends = list(self._ends)
        return dup


class Schedule:
    """Partial assignment of tasks to (machine, start, end)."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.placements: dict[tuple[int, int], Placement] = {}
        self.machine_timelines = [Timeline() for _ in range(instance.num_machines)]
        self.tool_timelines = [Timeline() for _ in range(instance.num_tools)]
        self.job_ready = [0] * instance.num_jobs
        self.next_op = [0] * instance.num_jobs
        self._makespan = 0

    @property
    def makespan(self) -> int:
        return self._makespan

    @property
    def num_placed(self) -> int:
        return len(self.placements)

    @property
    def complete(self) -> bool:
        return len(self.placements) == self.instance.num_tasks

    def _check_next_op(self, task: Task) -> None:
        expected = self.next_op[task.job_id]
        if task.op_index != expected:
            raise ValueError(
                f"task ({task.job_id},{task.op_index}) is not the next unscheduled op "
                f"of job {task.job_id} (expected op {expected})"
            )

    def earliest_feasible_start(self, task: Task, machine: int) -> int:
        """Earliest t >= job_ready with [t, t+p) idle on machine and tool.

        Alternates between the machine and tool timelines until a start
        satisfies both; each pass only pushes t later, so this terminates.
        """
        self._check_next_op(task)
        if machine not in task.eligible_machines:
            raise ValueError(f"machine {machine} not eligible for task ({task.job_id},{task.op_index})")
        p = task.processing_time
        machine_tl = self.machine_timelines[machine]
        tool_tl = self.tool_timelines[task.tool] if task.tool is not None else None
        t = self.job_ready[task.job_id]
        while True:
            t2 = machine_tl.earliest_fit(t, p)
            if tool_tl is None:
                return t2
            t3 = tool_tl.earliest_fit(t2, p)
            if t3 == t2:
                return t2
            t = t3

    def best_machine(self, task: Task) -> tuple[int, int]:
        """(machine, start) minimizing the earliest feasible start; ties to the lowest id."""
        best: tuple[int, int] | None = None
        for m in task.eligible_machines:
            start = self.earliest_feasible_start(task, m)
            if best is None or start < best[1]:
                best = (m, start)
        assert best is not None  # eligible_machines is non-empty
        return best

    def place_task(self, task: Task, machine: int, start: int) -> Placement:
        """Place a task at a feasible start, updating all bookkeeping.

        Accepts any feasible start (interval idle on machine and tool, start at
        or after the job's ready time), so the solver can explore non-greedy
        placements; the environment always passes the earliest feasible start.
        """
        self._check_next_op(task)
        if machine not in task.eligible_machines:
            raise ConstraintViolationError(
                f"machine {machine} not eligible for task ({task.job_id},{task.op_index})",
                resource=f"machine {machine}",
            )
        if start < 0:
            raise ConstraintViolationError(f"negative start {start}", resource=f"machine {machine}")
        if start < self.job_ready[task.job_id]:
            raise ConstraintViolationError(
                f"start {start} precedes job {task.job_id} ready time {self.job_ready[task.job_id]}",
                resource=f"job {task.job_id}",
            )
        end = start + task.processing_time
        conflict = self.machine_timelines[machine].first_conflict(start, end)
        if conflict is not None:
            raise ConstraintViolationError(
                f"machine {machine} busy on [{conflict[0]},{conflict[1]}) conflicts with "
                f"[{start},{end})",
                resource=f"machine {machine}",
                interval=conflict,
            )
        if task.tool is not None:
            conflict = self.tool_timelines[task.tool].first_conflict(start, end)
            if conflict is not None:
                raise ConstraintViolationError(
                    f"tool {task.tool} busy on [{conflict[0]},{conflict[1]}) conflicts with "
                    f"[{start},{end})",
                    resource=f"tool {task.tool}",
                    interval=conflict,
                )
        placement = Placement(
            job_id=task.job_id,
            op_index=task.op_index,
            machine=machine,
            start=start,
            end=end,
            tool=task.tool,
        )
        self.machine_timelines[machine].insert(start, end)
        if task.tool is not None:
            self.tool_timelines[task.tool].insert(start, end)
        self.placements[(task.job_id, task.op_index)] = placement
        self.job_ready[task.job_id] = end
        self.next_op[task.job_id] += 1
        if end > self._makespan:
            self._makespan = end
        return placement

    def remove_last_placement(self, job_id: int) -> Placement:
        """Undo the most recent placement of a job (solver backtracking).

        Only the last placed op of a job may be removed, keeping the
        within-job prefix property intact.
        """
        k = self.next_op[job_id] - 1
        if k < 0:
            raise ValueError(f"job {job_id} has no placements to remove")
        placement = self.placements.pop((job_id, k))
        self.machine_timelines[placement.machine].remove(placement.start, placement.end)
        if placement.tool is not None:
            self.tool_timelines[placement.tool].remove(placement.start, placement.end)
        self.next_op[job_id] = k
        self.job_ready[job_id] = self.placements[(job_id, k - 1)].end if k > 0 else 0
        if placement.end == self._makespan:
            self._makespan = max((p.end for p in self.placements.values()), default=0)
        return placement

    def copy(self) -> "Schedule":
        dup = Schedule.__new__(Schedule)
        dup.instance = self.instance
        dup.placements = dict(self.placements)
        dup.machine_timelines = [tl.copy() for tl in self.machine_timelines]
        dup.tool_timelines = [tl.copy() for tl in self.tool_timelines]
        dup.job_ready = list(self.job_ready)
        dup.next_op = list(self.next_op)
        dup._makespan = self._makespan
        return dup

    def to_record(self) -> dict:
        return schedule_to_record(self)


def makespan(schedule: Schedule) -> int:
    return schedule.makespan


def validate_schedule(schedule: Schedule) -> list[Violation]:
    """Recompute every schedule invariant from the placements alone.

    Ignores the incremental timelines on purpose: it is the independent check
    that the bookkeeping kept by place_task is faithful. Violations are
    reported exhaustively, not fail-fast.
    """
    instance = schedule.instance
    violations: list[Violation] = []
    per_machine: dict[int, list[Placement]] = {}
    per_tool: dict[int, list[Placement]] = {}

    for (job, op), pl in schedule.placements.items():
        task = instance.task(job, op)
        if pl.start < 0:
            violations.append(
                Violation(VIOLATION_NEGATIVE_TIME, ((job, op),), f"start {pl.start} < 0")
            )
        if pl.machine not in task.eligible_machines:
            violations.append(
                Violation(
                    VIOLATION_ELIGIBILITY,
                    ((job, op),),
                    f"machine {pl.machine} not in eligible set {task.eligible_machines}",
                )
            )
        if pl.end - pl.start != task.processing_time:
            violations.append(
                Violation(
                    VIOLATION_NEGATIVE_TIME,
                    ((job, op),),
                    f"duration {pl.end - pl.start} != processing_time {task.processing_time}",
                )
            )
        if op > 0:
            prev = schedule.placements.get((job, op - 1))
            if prev is None:
                violations.append(
                    Violation(VIOLATION_PRECEDENCE, ((job, op),), f"op {op - 1} of job {job} unplaced")
                )
            elif pl.start < prev.end:
                violations.append(
                    Violation(
                        VIOLATION_PRECEDENCE,
                        ((job, op - 1), (job, op)),
                        f"op {op} starts at {pl.start} before op {op - 1} ends at {prev.end}",
                    )
                )
        per_machine.setdefault(pl.machine, []).append(pl)
        if pl.tool is not None:
            per_tool.setdefault(pl.tool, []).append(pl)

    def overlap_pairs(kind: str, resource_name: str, group: list[Placement]):
        group = sorted(group, key=lambda p: (p.start, p.end))
        for a, b in zip(group, group[1:]):
            if b.start < a.end:
                violations.append(
                    Violation(
                        kind,
                        ((a.job_id, a.op_index), (b.job_id, b.op_index)),
                        f"{resource_name}: [{a.start},{a.end}) overlaps [{b.start},{b.end})",
                    )
                )

    for m, group in sorted(per_machine.items()):
        overlap_pairs(VIOLATION_MACHINE_OVERLAP, f"machine {m}", group)
    for t, group in sorted(per_tool.items()):
        overlap_pairs(VIOLATION_TOOL_OVERLAP, f"tool {t}", group)
    return violations


# ---------------------------------------------------------------------------
# Schedule export: consumed by the Gantt renderer and the evaluation harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleRecord:
    """Serializable view of a schedule, sufficient to render or re-check it."""

    instance_id: str
    num_jobs: int
    num_machines: int
    makespan: int
    placements: tuple[Placement, ...]


def schedule_to_record(schedule: Schedule) -> ScheduleRecord:
    ordered = sorted(schedule.placements.values(), key=lambda p: (p.job_id, p.op_index))
    return ScheduleRecord(
        instance_id=schedule.instance.id,
        num_jobs=schedule.instance.num_jobs,
        num_machines=schedule.instance.num_machines,
        makespan=schedule.makespan,
        placements=tuple(ordered),
    )


def validate_record(record: ScheduleRecord) -> list[Violation]:
    """Validate what a bare record allows: precedence, overlaps, negative times.

    Eligibility needs the instance and is checked by validate_schedule.
    """
    violations: list[Violation] = []
    per_machine: dict[int, list[Placement]] = {}
    per_tool: dict[int, list[Placement]] = {}
    by_key = {(p.job_id, p.op_index): p for p in record.placements}
    for pl in record.placements:
        if pl.start < 0 or pl.end <= pl.start:
            violations.append(
                Violation(
                    VIOLATION_NEGATIVE_TIME,
                    ((pl.job_id, pl.op_index),),
                    f"bad interval [{pl.start},{pl.end})",
                )
            )
        if pl.op_index > 0:
            prev = by_key.get((pl.job_id, pl.op_index - 1))
            if prev is not None and pl.start < prev.end:
                violations.append(
                    Violation(
                        VIOLATION_PRECEDENCE,
                        ((pl.job_id, pl.op_index - 1), (pl.job_id, pl.op_index)),
                        f"op {pl.op_index} starts at {pl.start} before previous op ends at {prev.end}",
                    )
                )
        per_machine.setdefault(pl.machine, []).append(pl)
        if pl.tool is not None:
            per_tool.setdefault(pl.tool, []).append(pl)
    for m, group in sorted(per_machine.items()):
        group = sorted(group, key=lambda p: (p.start, p.end))
        for a, b in zip(group, group[1:]):
            if b.start < a.end:
                violations.append(
                    Violation(
                        VIOLATION_MACHINE_OVERLAP,
                        ((a.job_id, a.op_index), (b.job_id, b.op_index)),
                        f"machine {m}: [{a.start},{a.end}) overlaps [{b.start},{b.end})",
                    )
                )
    for t, group in sorted(per_tool.items()):
        group = sorted(group, key=lambda p: (p.start, p.end))
        for a, b in zip(group, group[1:]):
            if b.start < a.end:
                violations.append(
                    Violation(
                        VIOLATION_TOOL_OVERLAP,
                        ((a.job_id, a.op_index), (b.job_id, b.op_index)),
                        f"tool {t}: [{a.start},{a.end}) overlaps [{b.start},{b.end})",
                    )
                )
    return violations


def record_to_dict(record: ScheduleRecord) -> dict:
    return {
        "instance_id": record.instance_id,
        "num_jobs": record.num_jobs,
        "num_machines": record.num_machines,
        "makespan": record.makespan,
        "placements": [
            {
                "job": p.job_id,
                "op": p.op_index,
                "machine": p.machine,
                "start": p.start,
                "end": p.end,
                **({"tool": p.tool} if p.tool is not None else {}),
            }
            for p in record.placements
        ],
    }


def record_from_dict(data: dict) -> ScheduleRecord:
    try:
        placements = tuple(
            Placement(
                job_id=int(p["job"]),
                op_index=int(p["op"]),
                machine=int(p["machine"]),
                start=int(p["start"]),
                end=int(p["end"]),
                tool=int(p["tool"]) if "tool" in p else None,
            )
            for p in data["placements"]
        )
        return ScheduleRecord(
            instance_id=str(data["instance_id"]),
            num_jobs=int(data["num_jobs"]),
            num_machines=int(data["num_machines"]),
            makespan=int(data["makespan"]),
            placements=placements,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecordError(f"bad schedule record: {exc!r}") from exc


def write_schedule(record: ScheduleRecord | Schedule, path: str | Path) -> None:
    if isinstance(record, Schedule):
        record = schedule_to_record(record)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(record_to_dict(record), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def read_schedule(path: str | Path) -> ScheduleRecord:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"schedule file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"{path}: invalid JSON: {exc}") from exc
    return record_from_dict(data)
