"""Job classes, service-time laws, Poisson job streams and many-server scalings.

A workload is described by a :class:`SystemConfig`: a cluster of ``k``
interchangeable servers, a Poisson arrival rate ``lam`` and a list of
:class:`JobClass` entries.  Each class pins a server need (how many servers a
job holds for its whole service), an arrival share and a service-time
distribution.  Everything in this module is a pure value: streams are fully
determined by an integer seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

EXPONENTIAL = "exponential"
DETERMINISTIC = "deterministic"
EMPIRICAL = "empirical"

_SHARE_TOL = 1e-9


@dataclass(frozen=True)
class ServiceDistribution:
    """Service-time law: exponential, deterministic or empirical resampling."""

    kind: str
    value: float = 0.0
    samples: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in (EXPONENTIAL, DETERMINISTIC, EMPIRICAL):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == EMPIRICAL:
            if not self.samples:
                raise ValueError("empirical distribution needs at least one sample")
            if any(s <= 0 for s in self.samples):
                raise ValueError("empirical samples must be positive")
        elif self.value <= 0:
            raise ValueError(f"{self.kind} distribution needs a positive mean")

    @classmethod
    def exponential(cls, mean: float) -> "ServiceDistribution":
        return cls(EXPONENTIAL, float(mean))

    @classmethod
    def deterministic(cls, value: float) -> "ServiceDistribution":
        return cls(DETERMINISTIC, float(value))

    @classmethod
    def empirical(cls, samples: Iterable[float]) -> "ServiceDistribution":
        """Resamples uniformly with replacement from ``samples``."""
        return cls(EMPIRICAL, 0.0, tuple(float(s) for s in samples))

    def mean(self) -> float:
        if self.kind == EMPIRICAL:
            return float(np.mean(self.samples))
        return self.value

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. service times from this law."""
        if self.kind == EXPONENTIAL:
            return rng.exponential(self.value, size)
        if self.kind == DETERMINISTIC:
            return np.full(size, self.value)
        pool = np.asarray(self.samples)
        return pool[rng.integers(0, len(pool), size)]

    def to_json(self) -> dict:
        if self.kind == EXPONENTIAL:
            return {"kind": self.kind, "mean": self.value}
        if self.kind == DETERMINISTIC:
            return {"kind": self.kind, "value": self.value}
        return {"kind": self.kind, "samples": list(self.samples)}

    @classmethod
    def from_json(cls, doc: dict) -> "ServiceDistribution":
        kind = doc["kind"]
        if kind == EXPONENTIAL:
            return cls.exponential(doc["mean"])
        if kind == DETERMINISTIC:
            return cls.deterministic(doc["value"])
        if kind == EMPIRICAL:
            return cls.empirical(doc["samples"])
        raise ValueError(f"unknown distribution kind {kind!r}")


@dataclass(frozen=True)
class JobClass:
    """One job class: server need, arrival share and service law."""

    index: int
    need: int
    share: float
    service: ServiceDistribution

    def __post_init__(self):
        if self.need < 1:
            raise ValueError("server need must be >= 1")
        if not (0 < self.share <= 1):
            raise ValueError("class share must lie in (0, 1]")

    @property
    def mean_service(self) -> float:
        return self.service.mean()

    @property
    def demand(self) -> float:
        """Expected server-time consumed per arrival: share * mean * need."""
        return self.share * self.mean_service * self.need


def _check_classes(classes: Sequence[JobClass]) -> None:
    if not classes:
        raise ValueError("at least one job class required")
    if [c.index for c in classes] != list(range(len(classes))):
        raise ValueError("class indices must be 0..C-1 in order")
    total = sum(c.share for c in classes)
    if abs(total - 1.0) > _SHARE_TOL:
        raise ValueError(f"class shares sum to {total!r}, expected 1")


@dataclass(frozen=True)
class SystemConfig:
    """Cluster size, Poisson arrival rate and the class mix.

    The offered load is ``rho = lam * sum_i(share_i * mean_i * need_i) / k``;
    configs are rejected when ``rho >= 1`` unless ``require_stable`` is off.
    """

    k: int
    lam: float
    classes: tuple[JobClass, ...]
    require_stable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        _check_classes(self.classes)
        if self.k < max(c.need for c in self.classes):
            raise ValueError(f"k={self.k} is below the largest server need")
        if self.lam <= 0:
            raise ValueError("arrival rate must be positive")
        if any(c.demand <= 0 for c in self.classes):
            raise ValueError("every class must carry positive demand")
        if self.require_stable and self.load >= 1.0:
            raise ValueError(
                f"load {self.load:.4f} >= 1; pass require_stable=False to override"
            )

    @property
    def demands(self) -> tuple[float, ...]:
        return tuple(c.demand for c in self.classes)

    @property
    def total_demand(self) -> float:
        return sum(self.demands)

    @property
    def load(self) -> float:
        return self.lam * self.total_demand / self.k

    @property
    def mean_service(self) -> float:
        """Mean service time of a random arrival, sum_i share_i * mean_i."""
        return sum(c.share * c.mean_service for c in self.classes)


@dataclass(frozen=True, slots=True)
class Job:
    """One realized job of the arrival stream."""

    id: int
    class_index: int
    arrival_time: float
    service_time: float
    need: int


def arrival_stream(config: SystemConfig, count: int, seed: int) -> list[Job]:
    """Generate ``count`` jobs: Poisson arrivals, i.i.d. labels and services.

    The root seed is split into independent sub-streams (inter-arrival gaps,
    class labels, one service stream per class), so the j-th class-i job draws
    the same service time no matter which other classes exist or which policy
    later consumes the stream.
    """
    if not isinstance(count, int) or count < 1:
        raise ValueError("count must be a positive integer")
    if not isinstance(seed, int) or seed < 0:
        raise ValueError("seed must be a non-negative integer")
    children = np.random.SeedSequence(seed).spawn(2 + len(config.classes))
    arrival_rng = np.random.default_rng(children[0])
    label_rng = np.random.default_rng(children[1])

    times = np.cumsum(arrival_rng.exponential(1.0 / config.lam, count))
    shares = np.array([c.share for c in config.classes])
    labels = label_rng.choice(len(config.classes), size=count, p=shares / shares.sum())

    services = np.empty(count)
    for i, cls in enumerate(config.classes):
        mask = labels == i
        n_i = int(mask.sum())
        if n_i:
            rng_i = np.random.default_rng(children[2 + i])
            services[mask] = cls.service.sample(rng_i, n_i)

    needs = [c.need for c in config.classes]
    return [
        Job(j, int(labels[j]), float(times[j]), float(services[j]), needs[labels[j]])
        for j in range(count)
    ]


def scale_subcritical(base: SystemConfig, k: int, f_k: int) -> SystemConfig:
    """Grow a base config to ``k`` servers with needs inflated by ``f_k``.

    The arrival rate becomes ``lam * (k / base.k) / f_k`` so the offered load
    is preserved exactly.  The base is expected to carry unit-scale needs;
    ``f_k`` is the caller's choice (it should grow sublinearly in ``k``).
    """
    if not isinstance(f_k, int) or f_k < 1:
        raise ValueError("f_k must be a positive integer")
    max_need = max(c.need for c in base.classes)
    if k < f_k * max_need:
        raise ValueError(f"k={k} cannot host needs scaled by f_k={f_k}")
    classes = tuple(
        replace(c, need=c.need * f_k) for c in base.classes
    )
    lam = base.lam * (k / base.k) / f_k
    return SystemConfig(k, lam, classes, require_stable=base.require_stable)


def scale_halfin_whitt(
    base_classes: Sequence[JobClass], k: int, f_k: int, theta: float
) -> SystemConfig:
    """Build the critically loaded config with load ``1 - theta*sqrt(f_k/k)``.

    Needs are inflated by ``f_k`` and the arrival rate is chosen so that
    ``(1 - rho) * sqrt(k / f_k) == theta`` exactly.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if not isinstance(f_k, int) or f_k < 1:
        raise ValueError("f_k must be a positive integer")
    _check_classes(base_classes)
    rho = 1.0 - theta * math.sqrt(f_k / k)
    if rho <= 0:
        raise ValueError(f"theta={theta} drives the load to {rho:.4f} <= 0")
    unit_demand = sum(c.demand for c in base_classes)
    lam = rho * k / (f_k * unit_demand)
    classes = tuple(replace(c, need=c.need * f_k) for c in base_classes)
    return SystemConfig(k, lam, classes)


def fk_fig1(k: int) -> int:
    """Need-growth rate floor((k/32)^(2/3)), computed exactly in integers."""
    # f <= (k/32)^(2/3)  <=>  1024 * f^3 <= k^2
    f = max(0, round((k * k / 1024) ** (1.0 / 3.0)))
    while f > 0 and 1024 * f**3 > k * k:
        f -= 1
    while 1024 * (f + 1) ** 3 <= k * k:
        f += 1
    return f


def fk_cuberoot(k: int) -> int:
    """Need-growth rate floor(k^(1/3)), computed exactly in integers."""
    f = max(0, round(k ** (1.0 / 3.0)))
    while f > 0 and f**3 > k:
        f -= 1
    while (f + 1) ** 3 <= k:
        f += 1
    return f


def fig1_unit_classes() -> tuple[JobClass, ...]:
    """Unit-scale 'several small, few large' mix: needs 1,2,4,8.

    Small jobs (share 0.95) have need 1 and mean 1; the three large classes
    (needs 2, 4, 8; means 40, 20, 10) split the remaining 5% evenly, so each
    large class carries the same relative demand.
    """
    large = 0.05 / 3
    return (
        JobClass(0, 1, 0.95, ServiceDistribution.exponential(1.0)),
        JobClass(1, 2, large, ServiceDistribution.exponential(40.0)),
        JobClass(2, 4, large, ServiceDistribution.exponential(20.0)),
        JobClass(3, 8, large, ServiceDistribution.exponential(10.0)),
    )


def figure1_workload(k: int, theta: float) -> SystemConfig:
    """The benchmark workload: needs grow with floor((k/32)^(2/3))."""
    if k < 32:
        raise ValueError("the benchmark workload needs k >= 32")
    f_k = fk_fig1(k)
    if f_k < 1:
        raise ValueError(f"k={k} yields a zero need-growth rate")
    return scale_halfin_whitt(fig1_unit_classes(), k, f_k, theta)


def config_to_json(config: SystemConfig) -> dict:
    return {
        "k": config.k,
        "lambda": config.lam,
        "require_stable": config.require_stable,
        "classes": [
            {"need": c.need, "share": c.share, "dist": c.service.to_json()}
            for c in config.classes
        ],
    }


def config_from_json(doc: dict) -> SystemConfig:
    classes = tuple(
        JobClass(i, int(c["need"]), float(c["share"]),
                 ServiceDistribution.from_json(c["dist"]))
        for i, c in enumerate(doc["classes"])
    )
    return SystemConfig(
        int(doc["k"]),
        float(doc["lambda"]),
        classes,
        require_stable=bool(doc.get("require_stable", True)),
    )


def load_config(path: str) -> SystemConfig:
    with open(path) as fh:
        return config_from_json(json.load(fh))


def dump_config(config: SystemConfig, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_json(config), fh, indent=2)
        fh.write("\n")
