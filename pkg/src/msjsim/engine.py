"""Deterministic discrete-event core.

A run owns an event calendar (heap ordered by time, ties broken by a global
sequence number), a set of named server pools holding fungible server counts,
and one policy object.  The policy sees the cluster through
:class:`ClusterState` and answers each arrival/departure with a
:class:`Decision`: jobs to start (job, pool) and, for preemptive policies,
jobs to stop and requeue with their remaining size (preempt-resume, no cost).
The engine validates every decision; a capacity violation or an illegal start
is a policy bug and raises with a state dump.

Servers are counters, not identified units: every policy in this package
depends only on how many servers of a pool are busy, which keeps the state
size proportional to the number of classes rather than the cluster size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Protocol

from .workload import Job, SystemConfig, arrival_stream

HELPER_POOL = "helper"

_ARRIVAL = 0
_DEPARTURE = 1


class PolicyBugError(RuntimeError):
    """A policy handed the engine an inconsistent decision."""


class ApparentInstabilityError(RuntimeError):
    """The in-system job count blew past the configured cap."""


@dataclass
class Decision:
    starts: list[tuple[Job, str]] = field(default_factory=list)
    preemptions: list[Job] = field(default_factory=list)


class Pool:
    __slots__ = ("name", "capacity", "busy")

    def __init__(self, name: str, capacity: int):
        self.name = name
        self.capacity = capacity
        self.busy = 0

    @property
    def idle(self) -> int:
        return self.capacity - self.busy

    def __repr__(self):
        return f"Pool({self.name}, busy={self.busy}/{self.capacity})"


class Policy(Protocol):
    """What the engine requires of a scheduling policy."""

    name: str
    preemptive: bool
    size_aware: bool

    def pool_layout(self, config: SystemConfig) -> dict[str, int]: ...

    def on_arrival(self, state: "ClusterState", job: Job) -> Decision | None: ...

    def on_departure(
        self, state: "ClusterState", job: Job, pool: str
    ) -> Decision | None: ...


class ClusterState:
    """The policy-facing view of a run in progress."""

    __slots__ = (
        "now",
        "pools",
        "running_pool",
        "_remaining",
        "_dep_time",
        "_helper_marked",
    )

    def __init__(self, pools: dict[str, Pool]):
        self.now = 0.0
        self.pools = pools
        self.running_pool: dict[int, str] = {}
        self._remaining: dict[int, float] = {}
        self._dep_time: dict[int, float] = {}
        self._helper_marked: set[int] = set()

    def idle(self, pool: str) -> int:
        return self.pools[pool].idle

    def remaining(self, job: Job) -> float:
        """Remaining service requirement, live for running jobs."""
        if job.id in self.running_pool:
            return self._dep_time[job.id] - self.now
        return self._remaining[job.id]

    def mark_helper_routed(self, job: Job) -> None:
        """Record that this arrival was sent to the helper pool.

        The mark is dropped again if the job later starts in a class pool, so
        at the end of the run the marked set is exactly the jobs whose service
        falls (or would fall) on the helpers.
        """
        self._helper_marked.add(job.id)


@dataclass(frozen=True)
class ClassStats:
    arrivals: int
    completed: int
    mean_response: float
    p_helper: float


@dataclass(frozen=True)
class SimOutcome:
    """Per-run metrics; statistics cover post-warmup arrivals only."""

    arrivals: int
    completed: int
    counted: int
    warmup_discarded: int
    mean_response: float
    response_ci95: float
    p_helper: float
    helper_utilization: float
    per_class: tuple[ClassStats, ...]
    admitted_primary: tuple[int, ...]
    preemptions: int
    horizon: float
    avg_in_system: float
    in_system_end: int


def _dump(state: ClusterState, msg: str) -> str:
    pools = ", ".join(repr(p) for p in state.pools.values())
    return f"{msg} at t={state.now:.6f}; pools: {pools}; running={len(state.running_pool)}"


def run(
    config: SystemConfig,
    policy: Policy,
    arrivals: int,
    seed: int,
    warmup_fraction: float = 0.1,
    *,
    precomputed_jobs: list[Job] | None = None,
    in_system_cap: int = 1_000_000,
) -> SimOutcome:
    """Simulate exactly ``arrivals`` arrivals, then drain the calendar.

    Statistics cover jobs that arrive after the warmup cut
    (``floor(warmup_fraction * arrivals)`` arrivals are discarded) and
    complete before the calendar empties.  Identical
    (config, policy, arrivals, seed) yields an identical outcome.
    """
    if not isinstance(arrivals, int) or arrivals < 1:
        raise ValueError("arrivals must be a positive integer")
    if not (0.0 <= warmup_fraction < 1.0):
        raise ValueError("warmup_fraction must lie in [0, 1)")
    if getattr(policy, "_spent", False):
        raise ValueError("policy instances carry queue state; build one per run")
    policy._spent = True  # type: ignore[attr-defined]

    jobs = precomputed_jobs
    if jobs is None:
        jobs = arrival_stream(config, arrivals, seed)
    elif len(jobs) < arrivals:
        raise ValueError("precomputed job list is shorter than `arrivals`")

    layout = policy.pool_layout(config)
    if sum(layout.values()) != config.k or any(v < 0 for v in layout.values()):
        raise PolicyBugError(f"pool layout {layout} does not partition k={config.k}")
    pools = {name: Pool(name, cap) for name, cap in layout.items()}
    state = ClusterState(pools)

    n_classes = len(config.classes)
    cutoff = math.floor(warmup_fraction * arrivals)

    # event calendar; ties resolved purely by insertion sequence
    heap: list[tuple] = []
    seq = 0
    live_token: dict[int, int] = {}
    ever_started: set[int] = set()

    in_system = 0
    completed_total = 0
    preempt_count = 0
    admitted = [0] * n_classes

    counted_n = 0
    counted_sum = 0.0
    counted_sumsq = 0.0
    cls_n = [0] * n_classes
    cls_sum = [0.0] * n_classes
    cls_arrivals = [0] * n_classes

    area_jobs = 0.0
    last_t = 0.0
    util_area = {name: 0.0 for name in pools}
    util_last = {name: 0.0 for name in pools}
    total_busy = 0

    def _advance_pool(name: str) -> None:
        pool = pools[name]
        util_area[name] += pool.busy * (state.now - util_last[name])
        util_last[name] = state.now

    def _apply(decision: Decision | None) -> None:
        nonlocal preempt_count, total_busy, seq
        if decision is None:
            return
        for job in decision.preemptions:
            if not policy.preemptive:
                raise PolicyBugError(
                    _dump(state, f"nonpreemptive policy {policy.name} emitted a preemption")
                )
            pool_name = state.running_pool.pop(job.id, None)
            if pool_name is None:
                raise PolicyBugError(_dump(state, f"preempting job {job.id} which is not running"))
            dep_t = state._dep_time.pop(job.id)
            state._remaining[job.id] = dep_t - state.now
            live_token[job.id] += 1
            _advance_pool(pool_name)
            pools[pool_name].busy -= job.need
            total_busy -= job.need
            preempt_count += 1
        for job, pool_name in decision.starts:
            pool = pools.get(pool_name)
            if pool is None:
                raise PolicyBugError(_dump(state, f"start into unknown pool {pool_name!r}"))
            if job.id in state.running_pool:
                raise PolicyBugError(_dump(state, f"job {job.id} started twice"))
            if job.id not in state._remaining:
                raise PolicyBugError(_dump(state, f"job {job.id} is not in the system"))
            if pool.idle < job.need:
                raise PolicyBugError(
                    _dump(state, f"capacity violation: job {job.id} needs {job.need} "
                                 f"but {pool_name} has {pool.idle} idle")
                )
            _advance_pool(pool_name)
            pool.busy += job.need
            total_busy += job.need
            state.running_pool[job.id] = pool_name
            dep_t = state.now + state._remaining[job.id]
            state._dep_time[job.id] = dep_t
            token = live_token[job.id] = live_token[job.id] + 1
            seq += 1
            heappush(heap, (dep_t, seq, _DEPARTURE, job, pool_name, token))
            if job.id not in ever_started:
                ever_started.add(job.id)
                if pool_name != HELPER_POOL:
                    admitted[job.class_index] += 1
                    state._helper_marked.discard(job.id)

    def _push_arrival(idx: int) -> None:
        nonlocal seq
        seq += 1
        heappush(heap, (jobs[idx].arrival_time, seq, _ARRIVAL, jobs[idx], None, 0))

    _push_arrival(0)
    next_arrival = 1

    while heap:
        t, _, kind, job, pool_name, token = heappop(heap)
        state.now = t
        if kind == _DEPARTURE:
            if token != live_token.get(job.id):
                continue  # stale event: the job was preempted after scheduling
            area_jobs += in_system * (t - last_t)
            last_t = t
            in_system -= 1
            completed_total += 1
            _advance_pool(pool_name)
            pools[pool_name].busy -= job.need
            total_busy -= job.need
            state.running_pool.pop(job.id)
            state._dep_time.pop(job.id)
            state._remaining.pop(job.id)
            live_token.pop(job.id)
            if job.id >= cutoff:
                resp = t - job.arrival_time
                counted_n += 1
                counted_sum += resp
                counted_sumsq += resp * resp
                ci = job.class_index
                cls_n[ci] += 1
                cls_sum[ci] += resp
            _apply(policy.on_departure(state, job, pool_name))
        else:
            area_jobs += in_system * (t - last_t)
            last_t = t
            in_system += 1
            if next_arrival < arrivals:
                _push_arrival(next_arrival)
                next_arrival += 1
            state._remaining[job.id] = job.service_time
            live_token[job.id] = 0
            if job.id >= cutoff:
                cls_arrivals[job.class_index] += 1
            _apply(policy.on_arrival(state, job))
            if in_system > in_system_cap:
                raise ApparentInstabilityError(
                    f"apparent instability: policy {policy.name} at load "
                    f"{config.load:.4f} holds {in_system} jobs in system"
                )
        assert 0 <= total_busy <= config.k
        assert all(0 <= p.busy <= p.capacity for p in pools.values())

    horizon = last_t
    assert completed_total + in_system == arrivals

    helper_cls = [0] * n_classes
    for jid in state._helper_marked:
        if jid >= cutoff:
            helper_cls[jobs[jid].class_index] += 1

    counted_arrivals = arrivals - cutoff
    mean_resp = counted_sum / counted_n if counted_n else math.nan
    if counted_n >= 2:
        var = max(0.0, (counted_sumsq - counted_sum**2 / counted_n) / (counted_n - 1))
        ci95 = 1.96 * math.sqrt(var / counted_n)
    else:
        ci95 = math.nan

    per_class = tuple(
        ClassStats(
            arrivals=cls_arrivals[i],
            completed=cls_n[i],
            mean_response=cls_sum[i] / cls_n[i] if cls_n[i] else math.nan,
            p_helper=helper_cls[i] / cls_arrivals[i] if cls_arrivals[i] else 0.0,
        )
        for i in range(n_classes)
    )

    helper_util = 0.0
    hp = pools.get(HELPER_POOL)
    if hp is not None and hp.capacity > 0 and horizon > 0:
        helper_util = util_area[HELPER_POOL] / (horizon * hp.capacity)

    return SimOutcome(
        arrivals=arrivals,
        completed=completed_total,
        counted=counted_n,
        warmup_discarded=cutoff,
        mean_response=mean_resp,
        response_ci95=ci95,
        p_helper=sum(helper_cls) / counted_arrivals if counted_arrivals else 0.0,
        helper_utilization=helper_util,
        per_class=per_class,
        admitted_primary=tuple(admitted),
        preemptions=preempt_count,
        horizon=horizon,
        avg_in_system=area_jobs / horizon if horizon > 0 else 0.0,
        in_system_end=in_system,
    )
