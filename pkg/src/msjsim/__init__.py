"""Multiserver-job scheduling simulator and loss-system analytics."""

from __future__ import annotations

__version__ = "0.1.0"

from . import engine
from .analytics import (
    critical_bound,
    erlang_b,
    halfin_whitt_constant,
    helper_routing_bound,
    mgss_mean_response,
    stability_lhs,
)
from .engine import ApparentInstabilityError, PolicyBugError, SimOutcome
from .partition import Partition, compute_partition
from .policies import PolicySpec, make_policy, parse_policy, policy_names
from .workload import (
    Job,
    JobClass,
    ServiceDistribution,
    SystemConfig,
    arrival_stream,
    config_from_json,
    config_to_json,
    fig1_unit_classes,
    figure1_workload,
    fk_cuberoot,
    fk_fig1,
    scale_halfin_whitt,
    scale_subcritical,
)


def simulate(config, policy, arrivals, seed, warmup_fraction=0.1, **kwargs):
    """Run one simulation; ``policy`` may be a spec string like ``bs:fcfs``."""
    spec = parse_policy(policy) if isinstance(policy, str) else policy
    instance = make_policy(spec, config) if isinstance(spec, PolicySpec) else spec
    return engine.run(config, instance, arrivals, seed, warmup_fraction, **kwargs)
