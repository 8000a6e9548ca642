"""Run policies and baselines over instance sets and tabulate the comparison.

Every method acts through the (observation, mask) policy interface and its
schedules are re-validated from scratch; a single violation fails the run
loudly. The gap metric is (C - C*) / C*, reported only when the instance
carries a proven-optimal annotation so gaps are never computed against mere
incumbents.

Wall times in records default to 0.0 so that identical runs produce
byte-identical CSVs; pass ``timer=time.perf_counter`` to measure for real.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .baselines import DispatchRule, Policy, rule_policy
from .env import RewardMode, SchedulingEnv
from .errors import InternalError, InvalidActionError, UnknownMethodError
from .instances import Instance, PROOF_OPTIMAL
from .metrics import MetricsEvent, read_metrics, write_metrics  # noqa: F401  (harness surface)
from .nn import MlpParams, greedy_action
from .schedule import Schedule, validate_schedule
from .solver import SolveLimits, solve_optimal

RULE_METHODS = ("spt", "lpt", "mtr", "random")
VALID_METHODS = RULE_METHODS + ("model", "solver")

CSV_HEADER = ["method", "instance_id", "seed", "makespan", "return", "gap", "wall_time_ms"]


@dataclass(frozen=True)
class EvalRecord:
    method: str
    instance_id: str
    makespan: float  # integer for single runs, a seed-mean for aggregates
    episode_return: float
    gap: float | None
    wall_time_ms: float = 0.0
    seed: int | None = None
    per_seed: tuple["EvalRecord", ...] = ()


@dataclass(frozen=True)
class MethodSummary:
    method: str
    count: int
    mean_makespan: float
    min_makespan: int
    max_makespan: int
    mean_return: float
    mean_gap: float | None
    mean_wall_time_ms: float


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[MethodSummary, ...]

    def render(self) -> str:
        header = ["method", "n", "makespan", "min", "max", "return", "gap", "ms"]
        lines = [
            [
                r.method,
                str(r.count),
                f"{r.mean_makespan:.2f}",
                str(r.min_makespan),
                str(r.max_makespan),
                f"{r.mean_return:.4f}",
                "-" if r.mean_gap is None else f"{r.mean_gap:.4f}",
                f"{r.mean_wall_time_ms:.1f}",
            ]
            for r in self.rows
        ]
        widths = [max(len(h), *(len(row[i]) for row in lines)) if lines else len(h)
                  for i, h in enumerate(header)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*header)]
        out.extend(fmt.format(*row) for row in lines)
        return "\n".join(out)


def run_episode(
    policy: Policy,
    instance: Instance,
    mode: RewardMode,
    env_factory: Callable[[Instance, RewardMode], SchedulingEnv] = SchedulingEnv,
) -> tuple[int, float, Schedule]:
    """Roll one full episode; returns (makespan, undiscounted return, schedule)."""
    env = env_factory(instance, mode)
    obs, mask = env.reset()
    total = 0.0
    done = False
    while not done:
        action = policy(obs, mask)
        if not (0 <= action < len(mask)) or not mask[action]:
            raise InvalidActionError(f"policy chose invalid action {action}")
        result = env.step(action)
        total += result.reward
        obs, mask, done = result.observation, result.mask, result.done
    schedule = env.schedule
    violations = validate_schedule(schedule)
    if violations:
        raise InternalError(f"episode produced an invalid schedule: {violations[0]}")
    return schedule.makespan, total, schedule


def _episode_rng(instance: Instance, seed: int) -> np.random.Generator:
    # key mixes the evaluation seed with the instance identity so runs are
    # order-independent and reproducible per (instance, seed)
    return np.random.Generator(np.random.Philox(key=(seed << 64) ^ int(instance.id[:16], 16)))


def _gap(makespan: float, instance: Instance) -> float | None:
    if instance.optimal_makespan is None or instance.proof_status != PROOF_OPTIMAL:
        return None
    return (makespan - instance.optimal_makespan) / instance.optimal_makespan


def evaluate(
    methods: Sequence[str],
    instances: Sequence[Instance],
    mode: RewardMode,
    seeds: Sequence[int] = (0,),
    model_params: MlpParams | None = None,
    solve_limits: SolveLimits | None = None,
    timer: Callable[[], float] | None = None,
) -> list[EvalRecord]:
    """One aggregate record per (method, instance).

    Stochastic methods (random) run once per seed and report the per-seed
    records alongside their mean; deterministic methods run once.
    """
    if not instances:
        raise ValueError("instance set must be non-empty")
    for name in methods:
        if name not in VALID_METHODS:
            raise UnknownMethodError(name, VALID_METHODS)
    if "model" in methods and model_params is None:
        raise ValueError("method 'model' requires model_params")
    if not seeds:
        raise ValueError("seeds must be non-empty")

    clock = timer if timer is not None else (lambda: 0.0)
    records: list[EvalRecord] = []
    for name in methods:
        for instance in instances:
            if name == "random":
                subs = []
                for seed in seeds:
                    rng = _episode_rng(instance, seed)
                    t0 = clock()
                    ms, ret, _ = run_episode(
                        rule_policy(DispatchRule.RANDOM, rng), instance, mode
                    )
                    elapsed = (clock() - t0) * 1000.0
                    subs.append(
                        EvalRecord(
                            method=name, instance_id=instance.id, makespan=ms,
                            episode_return=ret, gap=_gap(ms, instance),
                            wall_time_ms=elapsed, seed=seed,
                        )
                    )
                mean_ms = sum(r.makespan for r in subs) / len(subs)
                records.append(
                    EvalRecord(
                        method=name,
                        instance_id=instance.id,
                        makespan=mean_ms,
                        episode_return=sum(r.episode_return for r in subs) / len(subs),
                        gap=_gap(mean_ms, instance),
                        wall_time_ms=sum(r.wall_time_ms for r in subs) / len(subs),
                        per_seed=tuple(subs),
                    )
                )
            elif name == "solver":
                t0 = clock()
                result = solve_optimal(instance, solve_limits)
                elapsed = (clock() - t0) * 1000.0
                violations = validate_schedule(result.schedule)
                if violations:
                    raise InternalError(f"solver produced an invalid schedule: {violations[0]}")
                ub = instance.total_processing_time
                records.append(
                    EvalRecord(
                        method=name, instance_id=instance.id, makespan=result.makespan,
                        episode_return=-result.makespan / ub,
                        gap=_gap(result.makespan, instance), wall_time_ms=elapsed,
                    )
                )
            else:
                if name == "model":
                    policy: Policy = lambda obs, mask: greedy_action(model_params, obs, mask)
                else:
                    policy = rule_policy(DispatchRule(name))
                t0 = clock()
                ms, ret, _ = run_episode(policy, instance, mode)
                elapsed = (clock() - t0) * 1000.0
                records.append(
                    EvalRecord(
                        method=name, instance_id=instance.id, makespan=ms,
                        episode_return=ret, gap=_gap(ms, instance), wall_time_ms=elapsed,
                    )
                )
    return records


def _aggregate_mean_makespan(records: Sequence[EvalRecord]) -> float:
    # per-seed sub-records, when present, carry the per-run makespans
    values: list[float] = []
    for rec in records:
        if rec.per_seed:
            values.extend(r.makespan for r in rec.per_seed)
        else:
            values.append(rec.makespan)
    return sum(values) / len(values)


def summarize(records: Sequence[EvalRecord]) -> ComparisonTable:
    """Aggregate per method; rows ordered by ascending mean makespan, then name.

    A pure fold over a canonical ordering of the records, so permuting the
    input yields the identical table.
    """
    by_method: dict[str, list[EvalRecord]] = {}
    for rec in sorted(records, key=lambda r: (r.method, r.instance_id, r.seed or 0)):
        by_method.setdefault(rec.method, []).append(rec)
    rows = []
    for method, group in sorted(by_method.items()):
        flat = [
            sub
            for rec in group
            for sub in (rec.per_seed if rec.per_seed else (rec,))
        ]
        gaps = [r.gap for r in flat if r.gap is not None]
        rows.append(
            MethodSummary(
                method=method,
                count=len(group),
                mean_makespan=_aggregate_mean_makespan(group),
                min_makespan=min(r.makespan for r in flat),
                max_makespan=max(r.makespan for r in flat),
                mean_return=sum(r.episode_return for r in flat) / len(flat),
                mean_gap=sum(gaps) / len(gaps) if gaps else None,
                mean_wall_time_ms=sum(r.wall_time_ms for r in flat) / len(flat),
            )
        )
    rows.sort(key=lambda r: (r.mean_makespan, r.method))
    return ComparisonTable(rows=tuple(rows))


def write_records_csv(records: Sequence[EvalRecord], path: str | Path) -> None:
    """CSV with the documented column order; per-seed sub-records become rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)

    def row_of(rec: EvalRecord) -> list[str]:
        return [
            rec.method,
            rec.instance_id,
            "" if rec.seed is None else str(rec.seed),
            str(rec.makespan),
            repr(rec.episode_return),
            "" if rec.gap is None else repr(rec.gap),
            repr(rec.wall_time_ms),
        ]

    for rec in records:
        if rec.per_seed:
            for sub in rec.per_seed:
                writer.writerow(row_of(sub))
        else:
            writer.writerow(row_of(rec))
    path.write_text(buf.getvalue(), encoding="utf-8")
