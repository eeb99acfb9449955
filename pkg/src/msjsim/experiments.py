"""Experiment plans: policy-by-policy sweeps over loads or cluster sizes.

A plan expands into a matrix of independent runs (grid point x policy x
replication seed).  Runs share nothing and may execute in worker processes;
the emitted rows are sorted by grid position, policy and seed, so the output
is deterministic regardless of completion order.  All policies at a given
grid point and seed consume the same job stream (common random numbers).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import engine
from .analytics import critical_bound, helper_routing_bound
from .partition import compute_partition
from .policies import PolicySpec, make_policy, parse_policy
from .trace import ClassModel, trace_to_config
from .workload import (
    JobClass,
    SystemConfig,
    config_from_json,
    config_to_json,
    fig1_unit_classes,
    fk_cuberoot,
    fk_fig1,
    scale_halfin_whitt,
    scale_subcritical,
)

KINDS = ("sweep_load", "scale_subcritical", "scale_critical", "trace_sweep")
FK_RULES = {"fig1": fk_fig1, "cuberoot": fk_cuberoot}

MIN_ARRIVALS = 1_000


@dataclass(frozen=True)
class ExperimentPlan:
    kind: str
    policies: tuple[PolicySpec, ...]
    arrivals: int
    replications: int
    seed_root: int
    k_grid: tuple[int, ...] = ()
    rho_grid: tuple[float, ...] = ()
    theta: float | None = None
    rho: float | None = None
    k: int | None = None
    classes: tuple[JobClass, ...] | None = None
    model: ClassModel | None = None
    fk_rule: str = "fig1"
    warmup: float = 0.1
    workers: int = 1
    allow_unstable: bool = False
    in_system_cap: int = 1_000_000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.policies:
            raise ValueError("at least one policy required")
        if self.arrivals < MIN_ARRIVALS:
            raise ValueError(f"arrivals must be >= {MIN_ARRIVALS}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.kind.startswith("scale"):
            if not self.k_grid:
                raise ValueError("scale experiments need a k grid")
        else:
            if not self.rho_grid:
                raise ValueError("load sweeps need a rho grid")
            if self.k is None:
                raise ValueError("load sweeps need a cluster size k")
        if self.kind == "scale_critical" and self.theta is None:
            raise ValueError("the critical scaling needs theta")
        if self.kind == "scale_subcritical" and self.rho is None:
            raise ValueError("the subcritical scaling needs a fixed rho")
        if self.kind == "trace_sweep" and self.model is None:
            raise ValueError("trace sweeps need a class model")
        if self.fk_rule not in FK_RULES:
            raise ValueError(f"unknown f_k rule {self.fk_rule!r}")
        if not self.allow_unstable:
            for rho in self.rho_grid:
                if rho >= 1:
                    raise ValueError(
                        f"rho={rho} >= 1 requires allow_unstable"
                    )


@dataclass(frozen=True)
class GridPoint:
    index: int
    config: SystemConfig
    k: int
    f_k: int | None
    rho: float
    theta: float | None
    p_helper_bound: float | None
    crit_bound: float | None


def _grid(plan: ExperimentPlan) -> list[GridPoint]:
    fk = FK_RULES[plan.fk_rule]
    classes = plan.classes if plan.classes is not None else fig1_unit_classes()
    points: list[GridPoint] = []

    if plan.kind == "scale_critical":
        cbound = critical_bound(plan.theta, classes)
        for idx, k in enumerate(plan.k_grid):
            f = fk(k)
            if f < 1:
                raise ValueError(f"k={k} yields f_k={f} < 1 under rule {plan.fk_rule}")
            config = scale_halfin_whitt(classes, k, f, plan.theta)
            points.append(
                GridPoint(idx, config, k, f, config.load, plan.theta,
                          _routing_bound(config), cbound)
            )
    elif plan.kind == "scale_subcritical":
        base_k = max(c.need for c in classes)
        demand = sum(c.demand for c in classes)
        base = SystemConfig(base_k, plan.rho * base_k / demand, classes)
        for idx, k in enumerate(plan.k_grid):
            f = fk(k)
            if f < 1:
                raise ValueError(f"k={k} yields f_k={f} < 1 under rule {plan.fk_rule}")
            config = scale_subcritical(base, k, f)
            points.append(
                GridPoint(idx, config, k, f, config.load, None,
                          _routing_bound(config), None)
            )
    elif plan.kind == "sweep_load":
        # classes are used as given; the load alone drives the arrival rate
        demand = sum(c.demand for c in classes)
        for idx, rho in enumerate(plan.rho_grid):
            config = SystemConfig(
                plan.k, rho * plan.k / demand, classes,
                require_stable=not plan.allow_unstable,
            )
            points.append(
                GridPoint(idx, config, plan.k, None, rho, None,
                          _routing_bound(config), None)
            )
    else:  # trace_sweep
        for idx, rho in enumerate(plan.rho_grid):
            config = trace_to_config(plan.model, plan.k, rho)
            points.append(
                GridPoint(idx, config, plan.k, None, rho, None,
                          _routing_bound(config), None)
            )
    return points


def _routing_bound(config: SystemConfig) -> float | None:
    try:
        return helper_routing_bound(config, compute_partition(config))
    except ValueError:
        return None


def _run_payload(payload: dict) -> dict:
    """Worker entry: one fully independent simulation run."""
    config = config_from_json(payload["config"])
    spec = parse_policy(payload["policy"])
    policy = make_policy(spec, config)
    out = engine.run(
        config,
        policy,
        payload["arrivals"],
        payload["seed"],
        payload["warmup"],
        in_system_cap=payload["cap"],
    )
    row = {
        "mean_response": out.mean_response,
        "ci95": out.response_ci95,
        "p_helper": out.p_helper,
        "helper_util": out.helper_utilization,
        "completed": out.completed,
        "preemptions": out.preemptions,
        "avg_in_system": out.avg_in_system,
    }
    for i, cs in enumerate(out.per_class):
        row[f"resp_c{i}"] = cs.mean_response
        row[f"ph_c{i}"] = cs.p_helper
    return row


def run_plan(plan: ExperimentPlan) -> list[dict]:
    """Execute every run of the plan and return one row dict per run."""
    points = _grid(plan)
    tasks = []
    for pt in points:
        doc = config_to_json(pt.config)
        for spec in plan.policies:
            for rep in range(plan.replications):
                seed = plan.seed_root + rep
                meta = {
                    "policy": spec.label,
                    "k": pt.k,
                    "f_k": pt.f_k,
                    "rho": pt.rho,
                    "theta": pt.theta,
                    "seed": seed,
                    "arrivals": plan.arrivals,
                    "warmup": plan.warmup,
                    "p_helper_bound": pt.p_helper_bound,
                    "critical_bound": pt.crit_bound,
                }
                payload = {
                    "config": doc,
                    "policy": spec.label,
                    "arrivals": plan.arrivals,
                    "seed": seed,
                    "warmup": plan.warmup,
                    "cap": plan.in_system_cap,
                }
                tasks.append((pt.index, meta, payload))

    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            results = list(pool.map(_run_payload, [t[2] for t in tasks]))
    else:
        results = [_run_payload(t[2]) for t in tasks]

    rows = []
    for (idx, meta, _), result in zip(tasks, results):
        row = {"_grid": idx}
        row.update(meta)
        row.update(result)
        rows.append(row)
    rows.sort(key=lambda r: (r["_grid"], r["policy"], r["seed"]))
    for row in rows:
        row.pop("_grid")
    return rows


def class_count(rows: list[dict]) -> int:
    n = 0
    while rows and f"resp_c{n}" in rows[0]:
        n += 1
    return n
