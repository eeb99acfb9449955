"""Scheduling policies, classic and partition-based, against the engine hooks.

Global policies see one pool named ``cluster``.  The two split policies carve
the cluster into per-class pools ``a0..a{C-1}`` plus the shared ``helper``
pool, which an auxiliary policy (nonpreemptive and size-oblivious) manages on
its own, ignoring the class pools.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .engine import HELPER_POOL, ClusterState, Decision
from .partition import Partition, compute_partition
from .workload import Job, SystemConfig

CLUSTER_POOL = "cluster"

# name -> (preemptive, size_aware)
CAPABILITIES = {
    "fcfs": (False, False),
    "lsf": (True, False),
    "msf": (True, False),
    "ff-backfill": (False, False),
    "ff-srpt": (True, True),
    "serverfilling": (True, False),
    "serverfilling-srpt": (True, True),
    "bs": (False, False),
    "modifiedbs": (False, False),
}

_SPLIT = ("bs", "modifiedbs")


@dataclass(frozen=True)
class PolicySpec:
    """Parsed policy selection, e.g. ``bs:fcfs`` or ``serverfilling-srpt``."""

    name: str
    aux: "PolicySpec | None" = None

    def __post_init__(self):
        if self.name not in CAPABILITIES:
            raise ValueError(f"unknown policy {self.name!r}")
        if self.name in _SPLIT:
            if self.aux is None:
                object.__setattr__(self, "aux", PolicySpec("fcfs"))
            aux = self.aux
            if aux.preemptive or aux.size_aware:
                raise ValueError(
                    f"auxiliary policy {aux.label} must be nonpreemptive and size-oblivious"
                )
        elif self.aux is not None:
            raise ValueError(f"policy {self.name!r} takes no auxiliary policy")

    @property
    def preemptive(self) -> bool:
        return CAPABILITIES[self.name][0]

    @property
    def size_aware(self) -> bool:
        return CAPABILITIES[self.name][1]

    @property
    def label(self) -> str:
        return f"{self.name}:{self.aux.label}" if self.aux else self.name


def parse_policy(text: str) -> PolicySpec:
    """Parse a CLI policy string such as ``fcfs`` or ``bs:fcfs``."""
    head, sep, rest = text.strip().lower().partition(":")
    if sep:
        return PolicySpec(head, parse_policy(rest))
    return PolicySpec(head)


class _PolicyBase:
    name = "?"
    preemptive = False
    size_aware = False

    def pool_layout(self, config: SystemConfig) -> dict[str, int]:
        return {CLUSTER_POOL: config.k}

    def on_arrival(self, state: ClusterState, job: Job) -> Decision | None:
        raise NotImplementedError

    def on_departure(self, state: ClusterState, job: Job, pool: str) -> Decision | None:
        raise NotImplementedError


class Fcfs(_PolicyBase):
    """Strict arrival order with head-of-line blocking.

    Only the oldest waiting job is examined; it starts as soon as enough
    servers are idle, and one departure may release several head jobs in a
    row.
    """

    name = "fcfs"

    def __init__(self, pool: str = CLUSTER_POOL):
        self.pool = pool
        self.queue: deque[Job] = deque()
        self._removed: set[int] = set()

    def on_arrival(self, state, job):
        self.queue.append(job)
        return self._drain(state)

    def on_departure(self, state, job, pool):
        return self._drain(state)

    def _drain(self, state) -> Decision | None:
        idle = state.pools[self.pool].idle
        starts = []
        queue = self.queue
        while queue:
            head = queue[0]
            if head.id in self._removed:
                queue.popleft()
                self._removed.discard(head.id)
                continue
            if head.need > idle:
                break
            queue.popleft()
            starts.append((head, self.pool))
            idle -= head.need
        return Decision(starts=starts) if starts else None

    # hooks for the split policies' helper bookkeeping
    def remove_waiting(self, job: Job) -> None:
        self._removed.add(job.id)

    def kick(self, state) -> Decision | None:
        return self._drain(state)


class FirstFitBackfill(_PolicyBase):
    """Arrival order, but any waiting job that fits the idle servers starts.

    The head is placed or blocked first, then the rest of the queue is
    scanned in arrival order; nonpreemptive.
    """

    name = "ff-backfill"

    def __init__(self, pool: str = CLUSTER_POOL):
        self.pool = pool
        self.queue: list[Job] = []
        self._removed: set[int] = set()

    def on_arrival(self, state, job):
        self.queue.append(job)
        return self._drain(state)

    def on_departure(self, state, job, pool):
        return self._drain(state)

    def _drain(self, state) -> Decision | None:
        idle = state.pools[self.pool].idle
        starts = []
        kept = []
        for job in self.queue:
            if job.id in self._removed:
                self._removed.discard(job.id)
                continue
            if job.need <= idle:
                starts.append((job, self.pool))
                idle -= job.need
            else:
                kept.append(job)
        if starts or len(kept) != len(self.queue):
            self.queue = kept
        return Decision(starts=starts) if starts else None

    def remove_waiting(self, job: Job) -> None:
        self._removed.add(job.id)

    def kick(self, state) -> Decision | None:
        return self._drain(state)


class _RebuildPolicy(_PolicyBase):
    """Preemptive policies that recompute the running set at every event."""

    preemptive = True

    def __init__(self):
        self.in_system: dict[int, Job] = {}  # insertion order = arrival order

    def on_arrival(self, state, job):
        self.in_system[job.id] = job
        return self._rebuild(state)

    def on_departure(self, state, job, pool):
        del self.in_system[job.id]
        return self._rebuild(state)

    def _target(self, state, jobs: list[Job], k: int) -> list[Job]:
        raise NotImplementedError

    def _rebuild(self, state) -> Decision | None:
        k = state.pools[CLUSTER_POOL].capacity
        target = self._target(state, list(self.in_system.values()), k)
        target_ids = {j.id for j in target}
        running = state.running_pool
        preempts = [self.in_system[i] for i in running if i not in target_ids]
        starts = [(j, CLUSTER_POOL) for j in target if j.id not in running]
        if not preempts and not starts:
            return None
        return Decision(starts=starts, preemptions=preempts)


def _greedy(jobs: Iterable[Job], k: int) -> list[Job]:
    """Place jobs in the given priority order, skipping any that do not fit."""
    free = k
    chosen = []
    for job in jobs:
        if job.need <= free:
            chosen.append(job)
            free -= job.need
    return chosen


class GreedyByNeed(_RebuildPolicy):
    """Least/Most Servers First: priority by server need, preempt-resume."""

    def __init__(self, ascending: bool):
        super().__init__()
        self.ascending = ascending
        self.name = "lsf" if ascending else "msf"

    def _target(self, state, jobs, k):
        if self.ascending:
            jobs.sort(key=lambda j: (j.need, j.id))
        else:
            jobs.sort(key=lambda j: (-j.need, j.id))
        return _greedy(jobs, k)


class FirstFitSrpt(_RebuildPolicy):
    """Least remaining processing time first, skipping jobs that do not fit."""

    name = "ff-srpt"
    size_aware = True

    def _target(self, state, jobs, k):
        jobs.sort(key=lambda j: (state.remaining(j), j.id))
        return _greedy(jobs, k)


class ServerFilling(_RebuildPolicy):
    """Pack the shortest arrival-order prefix that can fill the cluster.

    The prefix M is the fewest oldest jobs whose needs sum to at least k; it
    is placed largest need first (arrival order on ties).  When a job of M
    cannot be packed, placement stops there and the remaining jobs of M stay
    blocked, possibly leaving servers unused.  With fewer than k servers
    demanded in total, everyone runs.
    """

    name = "serverfilling"

    def _prefix(self, jobs: list[Job], k: int) -> list[Job] | None:
        acc = 0
        for m, job in enumerate(jobs):
            acc += job.need
            if acc >= k:
                return jobs[: m + 1]
        return None

    def _place(self, ordered: list[Job], k: int) -> list[Job]:
        free = k
        chosen = []
        for job in ordered:
            if job.need > free:
                break
            chosen.append(job)
            free -= job.need
        return chosen

    def _target(self, state, jobs, k):
        prefix = self._prefix(jobs, k)
        if prefix is None:
            return jobs
        prefix.sort(key=lambda j: (-j.need, j.id))
        return self._place(prefix, k)


class ServerFillingSrpt(ServerFilling):
    """ServerFilling with the prefix taken in increasing remaining size.

    The size of a job is its remaining service time times its need; the
    prefix is placed largest need first, ties by smallest remaining size,
    then arrival order.
    """

    name = "serverfilling-srpt"
    size_aware = True

    def _target(self, state, jobs, k):
        sizes = {j.id: state.remaining(j) * j.need for j in jobs}
        jobs.sort(key=lambda j: (sizes[j.id], j.id))
        prefix = self._prefix(jobs, k)
        if prefix is None:
            return jobs
        prefix.sort(key=lambda j: (-j.need, sizes[j.id], j.id))
        return self._place(prefix, k)


class BalancedSplitting(_PolicyBase):
    """Class-partitioned pools with a shared helper pool.

    An arriving class-i job starts immediately in its own pool when a slot is
    free, and is otherwise handed to the helper pool, where the auxiliary
    policy rules.  With ``pull_back`` on, a departure from a class pool pulls
    the oldest same-class job still waiting (not yet started) among the
    helpers back into the freed slot; the irrevocable variant never pulls.
    """

    def __init__(
        self,
        config: SystemConfig,
        aux,
        pull_back: bool,
        part: Partition | None = None,
    ):
        self.part = part if part is not None else compute_partition(config)
        if aux.pool != HELPER_POOL:
            raise ValueError("auxiliary policy must operate on the helper pool")
        if aux.preemptive or aux.size_aware:
            raise ValueError("auxiliary policy must be nonpreemptive and size-oblivious")
        self.aux = aux
        self.pull_back = pull_back
        self.name = f"{'bs' if pull_back else 'modifiedbs'}:{aux.name}"
        self._pool_names = [f"a{i}" for i in range(len(config.classes))]
        self._waiting: list[deque[Job]] = [deque() for _ in config.classes]
        self._started: set[int] = set()

    def pool_layout(self, config):
        layout = {
            name: cap for name, cap in zip(self._pool_names, self.part.servers)
        }
        layout[HELPER_POOL] = self.part.helper
        return layout

    def _note_helper_starts(self, dec: Decision | None) -> Decision | None:
        if dec:
            for job, _pool in dec.starts:
                self._started.add(job.id)
        return dec

    def on_arrival(self, state, job):
        ci = job.class_index
        if self.part.servers[ci] > 0:
            pool = self._pool_names[ci]
            if state.pools[pool].idle >= job.need:
                return Decision(starts=[(job, pool)])
        state.mark_helper_routed(job)
        if self.pull_back:
            self._waiting[ci].append(job)
        return self._note_helper_starts(self.aux.on_arrival(state, job))

    def on_departure(self, state, job, pool):
        if pool == HELPER_POOL:
            return self._note_helper_starts(self.aux.on_departure(state, job, pool))
        if not self.pull_back:
            return None
        queue = self._waiting[job.class_index]
        while queue and queue[0].id in self._started:
            self._started.discard(queue.popleft().id)
        if not queue:
            return None
        pulled = queue.popleft()
        self.aux.remove_waiting(pulled)
        starts = [(pulled, self._pool_names[job.class_index])]
        kicked = self._note_helper_starts(self.aux.kick(state))
        if kicked:
            starts.extend(kicked.starts)
        return Decision(starts=starts)


def make_policy(spec: PolicySpec, config: SystemConfig):
    """Build a fresh policy instance for one run of ``config``."""
    name = spec.name
    if name == "fcfs":
        return Fcfs()
    if name == "ff-backfill":
        return FirstFitBackfill()
    if name == "lsf":
        return GreedyByNeed(ascending=True)
    if name == "msf":
        return GreedyByNeed(ascending=False)
    if name == "ff-srpt":
        return FirstFitSrpt()
    if name == "serverfilling":
        return ServerFilling()
    if name == "serverfilling-srpt":
        return ServerFillingSrpt()
    if name in _SPLIT:
        aux_name = spec.aux.name
        if aux_name == "fcfs":
            aux = Fcfs(pool=HELPER_POOL)
        elif aux_name == "ff-backfill":
            aux = FirstFitBackfill(pool=HELPER_POOL)
        else:
            raise ValueError(f"policy {aux_name!r} cannot run the helper pool")
        return BalancedSplitting(config, aux, pull_back=(name == "bs"))
    raise ValueError(f"unknown policy {name!r}")


def policy_names() -> list[str]:
    return sorted(CAPABILITIES)
