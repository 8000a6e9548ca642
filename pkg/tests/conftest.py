import dataclasses

import pytest

from schedlab.instances import (
    GeneratorConfig,
    Instance,
    InstanceMeta,
    ProblemType,
    Task,
    instance_digest,
)


def build_instance(job_specs, num_machines, num_tools=0, problem_type=ProblemType.JSSP, seed=0):
    """Hand-craft an instance. job_specs: per job, a list of (machines, p, tool)."""
    tasks_per_job = len(job_specs[0])
    assert all(len(spec) == tasks_per_job for spec in job_specs)
    tasks = []
    with_tools = False
    for j, spec in enumerate(job_specs):
        for k, (machines, p, tool) in enumerate(spec):
            if isinstance(machines, int):
                machines = (machines,)
            if tool is not None:
                with_tools = True
            tasks.append(
                Task(
                    job_id=j,
                    op_index=k,
                    eligible_machines=tuple(sorted(machines)),
                    processing_time=p,
                    tool=tool,
                )
            )
    inst = Instance(
        id="",
        problem_type=problem_type,
        with_tools=with_tools,
        num_jobs=len(job_specs),
        tasks_per_job=tasks_per_job,
        num_machines=num_machines,
        num_tools=num_tools,
        tasks=tuple(tasks),
        meta=InstanceMeta(seed=seed),
    )
    return dataclasses.replace(inst, id=instance_digest(inst))


def jssp_config(num_jobs=6, tasks_per_job=6, num_machines=6, runtime_lo=1, runtime_hi=10,
                count=1, seed=0, with_tools=False, num_tools=0):
    return GeneratorConfig(
        problem_type=ProblemType.JSSP,
        num_jobs=num_jobs,
        tasks_per_job=tasks_per_job,
        num_machines=num_machines,
        runtime_lo=runtime_lo,
        runtime_hi=runtime_hi,
        count=count,
        seed=seed,
        with_tools=with_tools,
        num_tools=num_tools,
    )


def fjssp_config(**kwargs):
    cfg = jssp_config(**kwargs)
    return dataclasses.replace(cfg, problem_type=ProblemType.FJSSP)


@pytest.fixture
def single_task_instance():
    return build_instance([[(0, 5, None)]], num_machines=1)
