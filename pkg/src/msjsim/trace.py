"""SWF trace ingestion and class-model extraction.

Reads the line-oriented Standard Workload Format of the Parallel Workloads
Archive (';' comments, whitespace-separated fields), keeps submit time, run
time and allocated processors, and condenses a filtered trace into one job
class per distinct server need with an empirical service-time distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .workload import Job, JobClass, ServiceDistribution, SystemConfig

# 1-based SWF field numbers of the values we keep
_F_SUBMIT = 2
_F_RUNTIME = 4
_F_PROCS = 5


@dataclass(frozen=True, slots=True)
class TraceJob:
    submit_time: float
    run_time: float
    processors: int


@dataclass(frozen=True)
class ClassStats:
    need: int
    share: float
    mean: float
    std: float
    samples: tuple[float, ...]


@dataclass(frozen=True)
class ClassModel:
    """Per-need statistics extracted from a trace, needs ascending."""

    entries: tuple[ClassStats, ...]

    @property
    def max_need(self) -> int:
        return max(e.need for e in self.entries)


def parse_swf(path: str) -> list[TraceJob]:
    """Read an SWF file, dropping records with non-positive run time or
    processor count (the format's -1 sentinel for missing data)."""
    jobs: list[TraceJob] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith(";"):
                continue
            fields = text.split()
            if len(fields) < _F_PROCS:
                raise ValueError(f"{path}:{lineno}: fewer than {_F_PROCS} fields")
            try:
                submit = float(fields[_F_SUBMIT - 1])
                run = float(fields[_F_RUNTIME - 1])
                procs = int(fields[_F_PROCS - 1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if run <= 0 or procs <= 0:
                continue
            jobs.append(TraceJob(submit, run, procs))
    if not jobs:
        raise ValueError(f"{path}: no usable records")
    return jobs


def filter_power_of_two(jobs: list[TraceJob], max_need: int = 64) -> list[TraceJob]:
    """Keep jobs whose processor count is a power of two up to ``max_need``."""
    allowed = set()
    p = 1
    while p <= max_need:
        allowed.add(p)
        p *= 2
    return [j for j in jobs if j.processors in allowed]


def build_class_model(jobs: list[TraceJob]) -> ClassModel:
    """One class per distinct need: share, mean and sample std of run times.

    The std uses the n-1 divisor; singleton classes report std 0.  Samples
    are stored sorted, so the model is invariant under job-list permutation.
    """
    if not jobs:
        raise ValueError("cannot build a class model from an empty job list")
    by_need: dict[int, list[float]] = {}
    for job in jobs:
        by_need.setdefault(job.processors, []).append(job.run_time)
    total = len(jobs)
    entries = []
    for need in sorted(by_need):
        times = by_need[need]
        n = len(times)
        mean = math.fsum(times) / n
        if n > 1:
            var = math.fsum((t - mean) ** 2 for t in times) / (n - 1)
        else:
            var = 0.0
        entries.append(
            ClassStats(need, n / total, mean, math.sqrt(var), tuple(sorted(times)))
        )
    return ClassModel(tuple(entries))


def trace_to_config(model: ClassModel, k: int, target_rho: float) -> SystemConfig:
    """Config with empirical service laws and the arrival rate pinned so the
    offered load equals ``target_rho`` exactly; arrivals stay Poisson."""
    if not (0 < target_rho < 1):
        raise ValueError("target load must lie in (0, 1)")
    if k < model.max_need:
        raise ValueError(f"k={k} is below the largest server need {model.max_need}")
    classes = tuple(
        JobClass(i, e.need, e.share, ServiceDistribution.empirical(e.samples))
        for i, e in enumerate(model.entries)
    )
    demand = sum(c.demand for c in classes)
    return SystemConfig(k, target_rho * k / demand, classes)


def replay_stream(
    jobs: list[TraceJob], model: ClassModel, k: int
) -> tuple[SystemConfig, list[Job]]:
    """Replay mode: keep the trace's real submit times and run times.

    Returns a config (its arrival rate is only a horizon-based estimate, for
    reporting) plus the job stream to feed the engine.  ``jobs`` must be the
    same filtered set the model was built from.
    """
    if k < model.max_need:
        raise ValueError(f"k={k} is below the largest server need {model.max_need}")
    index = {e.need: i for i, e in enumerate(model.entries)}
    ordered = sorted(jobs, key=lambda j: j.submit_time)
    t0 = ordered[0].submit_time
    stream = [
        Job(i, index[j.processors], j.submit_time - t0, j.run_time, j.processors)
        for i, j in enumerate(ordered)
    ]
    horizon = max(stream[-1].arrival_time, 1e-9)
    classes = tuple(
        JobClass(i, e.need, e.share, ServiceDistribution.empirical(e.samples))
        for i, e in enumerate(model.entries)
    )
    config = SystemConfig(k, len(stream) / horizon, classes, require_stable=False)
    return config, stream


def model_table(model: ClassModel) -> str:
    """Aligned text table of the class model (mean, std, need, share)."""
    header = f"{'mean':>12}  {'std':>12}  {'need':>5}  {'share':>7}"
    rows = [header, "-" * len(header)]
    for e in model.entries:
        rows.append(f"{e.mean:>12.2f}  {e.std:>12.2f}  {e.need:>5d}  {e.share:>7.4f}")
    return "\n".join(rows)


def model_to_json(model: ClassModel) -> dict:
    return {
        "classes": [
            {
                "need": e.need,
                "share": e.share,
                "mean": e.mean,
                "std": e.std,
                "samples": len(e.samples),
            }
            for e in model.entries
        ]
    }
