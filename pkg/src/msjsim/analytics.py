"""Closed-form loss-system machinery.

Blocking probability of the M/GI/s/s queue, its mean response time, the
many-server limit constant phi(theta)/Phi(theta), and the two quantities the
partitioned scheduler needs: a sufficient-stability statistic for the helper
pool and the exact helper-routing probability of the decomposed system.

The standard normal CDF is computed from ``math.erf`` (absolute error well
below 1e-12), so no numerical library is required here.
"""

from __future__ import annotations

import math
from typing import Sequence

from .partition import Partition
from .workload import JobClass, SystemConfig

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def erlang_b(s: int, a: float) -> float:
    """Blocking probability of an M/GI/s/s queue with offered load ``a``.

    Uses the stable forward recursion E_0 = 1, E_j = a E_{j-1}/(j + a E_{j-1});
    the textbook factorial sum overflows for s in the thousands while this
    runs in O(s) with no loss of accuracy.
    """
    if not isinstance(s, int) or s < 0:
        raise ValueError("server count must be a non-negative integer")
    if not math.isfinite(a) or a < 0:
        raise ValueError("offered load must be finite and non-negative")
    e = 1.0
    for j in range(1, s + 1):
        e = a * e / (j + a * e)
    return e


def mgss_mean_response(d: float, s: int, a: float) -> float:
    """Mean response time of an M/GI/s/s queue: d * (1 - E_s(a))."""
    if d <= 0:
        raise ValueError("mean service time must be positive")
    return d * (1.0 - erlang_b(s, a))


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / _SQRT2))


def halfin_whitt_constant(theta: float) -> float:
    """Limit of sqrt(s) * E_s(s(1 - theta/sqrt(s))): phi(theta)/Phi(theta)."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    return normal_pdf(theta) / normal_cdf(theta)


def _check_pair(config: SystemConfig, part: Partition) -> None:
    if len(part.slots) != len(config.classes):
        raise ValueError("partition does not match the config's class list")
    if sum(part.servers) + part.helper != config.k:
        raise ValueError("partition does not cover the config's server count")


def stability_lhs(config: SystemConfig, part: Partition) -> float:
    """Offered load on the helper pool under the decomposed-system bound.

    Returns ``(lam / h) * sum_i demand_i * E_{s_i}(lam share_i d_i)``.  The
    split policy is stable whenever this is below one (and the overall load
    is below one).  An empty helper pool returns 0: with h = 0 every class
    fits its own pool exactly and there is nothing to bound.
    """
    _check_pair(config, part)
    if part.helper == 0:
        return 0.0
    lam = config.lam
    acc = 0.0
    for cls, s_i in zip(config.classes, part.slots):
        acc += cls.demand * erlang_b(s_i, lam * cls.share * cls.mean_service)
    return lam * acc / part.helper


def helper_routing_bound(config: SystemConfig, part: Partition) -> float:
    """Exact helper-routing probability of the irrevocable-split policy.

    ``sum_i share_i * E_{s_i}(lam share_i d_i)``.  Classes whose pool is empty
    contribute their full share (E_0 = 1: every such job is redirected).  The
    value also upper-bounds the helper-routing probability of the pull-back
    variant.
    """
    _check_pair(config, part)
    lam = config.lam
    acc = 0.0
    for cls, s_i in zip(config.classes, part.slots):
        acc += cls.share * erlang_b(s_i, lam * cls.share * cls.mean_service)
    return acc


def critical_bound(theta: float, classes: Sequence[JobClass]) -> float:
    """Limit bound on sqrt(k/f_k) * P(helper) in the critical regime.

    ``theta * sum_i (share_i / theta_i) * phi(theta_i)/Phi(theta_i)`` with
    ``theta_i = theta * sqrt(demand_i / (need_i * total_demand))``.  Pass the
    unit-scale class mix (the one the need-growth rate multiplies); the ratio
    inside ``theta_i`` is not invariant under need inflation.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if not classes:
        raise ValueError("class list must be non-empty")
    total = sum(c.demand for c in classes)
    if total <= 0:
        raise ValueError("class list carries no demand")
    acc = 0.0
    for c in classes:
        theta_i = theta * math.sqrt(c.demand / (c.need * total))
        acc += (c.share / theta_i) * normal_pdf(theta_i) / normal_cdf(theta_i)
    return theta * acc
