"""Scheduling problem instances: seeded generation, serialization, digests.

An instance is an immutable description of a scheduling problem: ``num_jobs``
jobs, each an ordered chain of ``tasks_per_job`` tasks. Every task carries a
positive integer processing time, a non-empty set of eligible machines
(exactly one for JSSP) and, for tool-constrained problems, a required tool id.

Instances are identified by a SHA-256 digest over their canonical JSON
serialization (sorted keys, compact separators, UTF-8), excluding the id
itself and any solver annotation, so the id is stable across platforms and
independent of whether an optimal makespan has been attached.

Randomness comes from numpy's Philox counter-based generator, keyed with
``seed XOR stream_index``. Philox is platform-independent and seedable, so
``generate_instance(config, i)`` is a pure function of ``(config.seed, i)``
and batches can be regenerated anywhere bit-for-bit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, DigestMismatchError, InternalError, MalformedRecordError

GENERATOR_VERSION = 1

PROOF_OPTIMAL = "optimal"
PROOF_FEASIBLE = "feasible"


class ProblemType(str, Enum):
    JSSP = "jssp"
    FJSSP = "fjssp"


@dataclass(frozen=True)
class Task:
    """Atomic unit of an instance: one operation of one job."""

    job_id: int
    op_index: int
    eligible_machines: tuple[int, ...]
    processing_time: int
    tool: int | None = None


@dataclass(frozen=True)
class InstanceMeta:
    seed: int
    generator_version: int = GENERATOR_VERSION


@dataclass(frozen=True)
class Instance:
    """Immutable scheduling problem. ``tasks`` is ordered by (job_id, op_index)."""

    id: str
    problem_type: ProblemType
    with_tools: bool
    num_jobs: int
    tasks_per_job: int
    num_machines: int
    num_tools: int
    tasks: tuple[Task, ...]
    meta: InstanceMeta
    optimal_makespan: int | None = None
    proof_status: str | None = None

    def task(self, job_id: int, op_index: int) -> Task:
        return self.tasks[job_id * self.tasks_per_job + op_index]

    def job_tasks(self, job_id: int) -> tuple[Task, ...]:
        lo = job_id * self.tasks_per_job
        return self.tasks[lo : lo + self.tasks_per_job]

    @property
    def num_tasks(self) -> int:
        return self.num_jobs * self.tasks_per_job

    @property
    def total_processing_time(self) -> int:
        """Sum of all processing times; trivial upper bound on the makespan."""
        return sum(t.processing_time for t in self.tasks)

    @property
    def max_processing_time(self) -> int:
        return max(t.processing_time for t in self.tasks)

    def annotated(self, optimal_makespan: int, proof_status: str) -> "Instance":
        """Return a copy carrying a solver annotation. The id is unchanged."""
        if proof_status not in (PROOF_OPTIMAL, PROOF_FEASIBLE):
            raise ValueError(f"bad proof_status {proof_status!r}")
        return dataclasses.replace(
            self, optimal_makespan=int(optimal_makespan), proof_status=proof_status
        )


@dataclass(frozen=True)
class GeneratorConfig:
    problem_type: ProblemType
    num_jobs: int
    tasks_per_job: int
    num_machines: int
    runtime_lo: int
    runtime_hi: int
    count: int
    seed: int
    with_tools: bool = False
    num_tools: int = 0

    def validate(self) -> None:
        """Raise ConfigurationError naming the first offending field."""
        if not isinstance(self.problem_type, ProblemType):
            raise ConfigurationError(f"problem_type: expected one of {[p.value for p in ProblemType]}")
        for name in ("num_jobs", "tasks_per_job", "num_machines"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name}: must be >= 1, got {getattr(self, name)}")
        if self.runtime_lo < 1:
            raise ConfigurationError(f"runtime_lo: must be >= 1, got {self.runtime_lo}")
        if self.runtime_hi < self.runtime_lo:
            raise ConfigurationError(
                f"runtime_hi: must be >= runtime_lo ({self.runtime_lo}), got {self.runtime_hi}"
            )
        if self.count < 1:
            raise ConfigurationError(f"count: must be >= 1, got {self.count}")
        if not (0 <= self.seed < 2**64):
            raise ConfigurationError(f"seed: must be an unsigned 64-bit integer, got {self.seed}")
        if self.with_tools and self.num_tools < 1:
            raise ConfigurationError(f"num_tools: must be >= 1 when with_tools, got {self.num_tools}")
        if not self.with_tools and self.num_tools != 0:
            raise ConfigurationError(f"num_tools: must be 0 when with_tools is false, got {self.num_tools}")


def _stream_rng(seed: int, stream_index: int) -> np.random.Generator:
    # Philox keyed directly: distinct stream indices give independent streams.
    return np.random.Generator(np.random.Philox(key=seed ^ stream_index))


def generate_instance(config: GeneratorConfig, stream_index: int) -> Instance:
    """Generate one instance deterministically from (config.seed, stream_index).

    Runtimes are i.i.d. uniform integers on [runtime_lo, runtime_hi]. JSSP with
    tasks_per_job == num_machines assigns each job a uniform random machine
    permutation (the classic one-visit-per-machine convention); otherwise each
    task's machine is drawn uniformly. FJSSP draws an eligible-set size
    uniformly from 1..M, then a uniform subset of that size. Tool-constrained
    instances draw each task's tool uniformly from 0..num_tools-1.

    Draw order (runtimes, machines, tools) is fixed and covered by
    ``meta.generator_version``.
    """
    config.validate()
    if not (0 <= stream_index < config.count):
        raise ConfigurationError(
            f"stream_index: must be in [0, count={config.count}), got {stream_index}"
        )
    rng = _stream_rng(config.seed, stream_index)
    n_jobs, n_ops, n_machines = config.num_jobs, config.tasks_per_job, config.num_machines
    n_tasks = n_jobs * n_ops

    runtimes = rng.integers(config.runtime_lo, config.runtime_hi + 1, size=n_tasks)

    eligible: list[tuple[int, ...]] = []
    if config.problem_type is ProblemType.JSSP:
        if n_ops == n_machines:
            for _ in range(n_jobs):
                eligible.extend((int(m),) for m in rng.permutation(n_machines))
        else:
            eligible = [(int(m),) for m in rng.integers(0, n_machines, size=n_tasks)]
    else:
        for _ in range(n_tasks):
            size = int(rng.integers(1, n_machines + 1))
            subset = rng.choice(n_machines, size=size, replace=False)
            eligible.append(tuple(sorted(int(m) for m in subset)))

    tools: list[int | None]
    if config.with_tools:
        tools = [int(t) for t in rng.integers(0, config.num_tools, size=n_tasks)]
    else:
        tools = [None] * n_tasks

    tasks = tuple(
        Task(
            job_id=i // n_ops,
            op_index=i % n_ops,
            eligible_machines=eligible[i],
            processing_time=int(runtimes[i]),
            tool=tools[i],
        )
        for i in range(n_tasks)
    )
    payload = _content_payload(
        problem_type=config.problem_type,
        with_tools=config.with_tools,
        num_jobs=n_jobs,
        tasks_per_job=n_ops,
        num_machines=n_machines,
        num_tools=config.num_tools,
        tasks=tasks,
        meta=InstanceMeta(seed=config.seed),
    )
    return Instance(
        id=_digest_of_payload(payload),
        problem_type=config.problem_type,
        with_tools=config.with_tools,
        num_jobs=n_jobs,
        tasks_per_job=n_ops,
        num_machines=n_machines,
        num_tools=config.num_tools,
        tasks=tasks,
        meta=InstanceMeta(seed=config.seed),
    )


def generate_batch(config: GeneratorConfig) -> list[Instance]:
    """Generate ``config.count`` instances for stream indices 0..count-1."""
    config.validate()
    batch = [generate_instance(config, i) for i in range(config.count)]
    ids = {inst.id for inst in batch}
    if len(ids) != len(batch):
        raise InternalError("duplicate instance digest within a batch; identical instances generated")
    return batch


# ---------------------------------------------------------------------------
# Canonical serialization and digests
# ---------------------------------------------------------------------------

def _task_record(task: Task) -> dict:
    rec = {
        "job": task.job_id,
        "op": task.op_index,
        "machines": list(task.eligible_machines),
        "p": task.processing_time,
    }
    if task.tool is not None:
        rec["tool"] = task.tool
    return rec


def _content_payload(*, problem_type, with_tools, num_jobs, tasks_per_job, num_machines,
                     num_tools, tasks, meta) -> dict:
    # Everything the digest covers: content fields only, no id, no annotation.
    return {
        "problem_type": problem_type.value,
        "with_tools": with_tools,
        "num_jobs": num_jobs,
        "tasks_per_job": tasks_per_job,
        "num_machines": num_machines,
        "num_tools": num_tools,
        "tasks": [_task_record(t) for t in tasks],
        "meta": {"seed": meta.seed, "generator_version": meta.generator_version},
    }


def _canonical_bytes(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _digest_of_payload(payload: dict) -> str:
    return hashlib.sha256(_canonical_bytes(payload)).hexdigest()


def instance_digest(instance: Instance) -> str:
    """SHA-256 hex digest of the canonical content serialization.

    Excludes the stored id and any optimal-makespan annotation, so two
    structurally equal instances share a digest regardless of annotation.
    """
    payload = _content_payload(
        problem_type=instance.problem_type,
        with_tools=instance.with_tools,
        num_jobs=instance.num_jobs,
        tasks_per_job=instance.tasks_per_job,
        num_machines=instance.num_machines,
        num_tools=instance.num_tools,
        tasks=instance.tasks,
        meta=instance.meta,
    )
    return _digest_of_payload(payload)


def validate_instance(instance: Instance) -> None:
    """Check structural invariants; raise MalformedRecordError on the first failure."""
    n_expected = instance.num_jobs * instance.tasks_per_job
    if len(instance.tasks) != n_expected:
        raise MalformedRecordError(
            f"instance {instance.id[:12]}: expected {n_expected} tasks, got {len(instance.tasks)}"
        )
    for i, task in enumerate(instance.tasks):
        job, op = i // instance.tasks_per_job, i % instance.tasks_per_job
        if (task.job_id, task.op_index) != (job, op):
            raise MalformedRecordError(
                f"instance {instance.id[:12]}: task {i} has (job={task.job_id}, op={task.op_index}), "
                f"expected ({job}, {op})"
            )
        if task.processing_time < 1:
            raise MalformedRecordError(
                f"instance {instance.id[:12]}: task ({job},{op}) has processing_time {task.processing_time}"
            )
        if not task.eligible_machines:
            raise MalformedRecordError(f"instance {instance.id[:12]}: task ({job},{op}) has no machines")
        if instance.problem_type is ProblemType.JSSP and len(task.eligible_machines) != 1:
            raise MalformedRecordError(
                f"instance {instance.id[:12]}: JSSP task ({job},{op}) has "
                f"{len(task.eligible_machines)} eligible machines"
            )
        if any(not (0 <= m < instance.num_machines) for m in task.eligible_machines):
            raise MalformedRecordError(
                f"instance {instance.id[:12]}: task ({job},{op}) references machine out of range"
            )
        if task.tool is not None and not (0 <= task.tool < instance.num_tools):
            raise MalformedRecordError(
                f"instance {instance.id[:12]}: task ({job},{op}) references tool {task.tool} "
                f"out of range [0, {instance.num_tools})"
            )
        if instance.with_tools and task.tool is None:
            raise MalformedRecordError(
                f"instance {instance.id[:12]}: with_tools instance but task ({job},{op}) has no tool"
            )
    if instance.optimal_makespan is not None and instance.proof_status not in (
        PROOF_OPTIMAL,
        PROOF_FEASIBLE,
    ):
        raise MalformedRecordError(
            f"instance {instance.id[:12]}: annotated makespan without a valid proof_status"
        )


# ---------------------------------------------------------------------------
# File I/O: newline-delimited JSON, one instance per line
# ---------------------------------------------------------------------------

def instance_to_record(instance: Instance) -> dict:
    record = _content_payload(
        problem_type=instance.problem_type,
        with_tools=instance.with_tools,
        num_jobs=instance.num_jobs,
        tasks_per_job=instance.tasks_per_job,
        num_machines=instance.num_machines,
        num_tools=instance.num_tools,
        tasks=instance.tasks,
        meta=instance.meta,
    )
    record["id"] = instance.id
    if instance.optimal_makespan is not None:
        record["optimal_makespan"] = instance.optimal_makespan
        record["proof_status"] = instance.proof_status
    return record


def instance_from_record(record: dict) -> Instance:
    try:
        problem_type = ProblemType(record["problem_type"])
        tasks = tuple(
            Task(
                job_id=int(t["job"]),
                op_index=int(t["op"]),
                eligible_machines=tuple(int(m) for m in t["machines"]),
                processing_time=int(t["p"]),
                tool=int(t["tool"]) if "tool" in t else None,
            )
            for t in record["tasks"]
        )
        instance = Instance(
            id=str(record["id"]),
            problem_type=problem_type,
            with_tools=bool(record["with_tools"]),
            num_jobs=int(record["num_jobs"]),
            tasks_per_job=int(record["tasks_per_job"]),
            num_machines=int(record["num_machines"]),
            num_tools=int(record["num_tools"]),
            tasks=tasks,
            meta=InstanceMeta(
                seed=int(record["meta"]["seed"]),
                generator_version=int(record["meta"]["generator_version"]),
            ),
            optimal_makespan=(
                int(record["optimal_makespan"]) if "optimal_makespan" in record else None
            ),
            proof_status=record.get("proof_status"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecordError(f"bad instance record: {exc!r}") from exc
    validate_instance(instance)
    recomputed = instance_digest(instance)
    if recomputed != instance.id:
        raise DigestMismatchError(
            f"stored id {instance.id[:12]}... does not match recomputed digest {recomputed[:12]}..."
        )
    return instance


def write_instances(instances: Iterable[Instance], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_record(inst), sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_instances(path: str | Path) -> list[Instance]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"instance file not found: {path}")
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            out.append(instance_from_record(record))
    return out
