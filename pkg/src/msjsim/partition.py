"""Static balanced sub-partition of the server set.

Each class i receives a block of ``a_i = s_i * need_i`` servers (``s_i`` whole
job slots) sized in proportion to its relative demand; the remaining servers
form the shared helper pool.  The proportionality factor psi is pushed as high
as possible subject to the helper pool, when non-empty, being able to host the
largest job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .workload import SystemConfig

_INT_TOL = 1e-9


@dataclass(frozen=True)
class Partition:
    """Per-class slot/server counts, helper size and realized scaling factor."""

    slots: tuple[int, ...]
    servers: tuple[int, ...]
    helper: int
    psi: float

    @property
    def helper_only(self) -> tuple[bool, ...]:
        """Classes with zero slots; their jobs are all redirected to helpers."""
        return tuple(s == 0 for s in self.slots)


def _snap(x: Fraction) -> Fraction:
    """Collapse x to the nearest integer when float noise is the only gap."""
    nearest = round(x)
    if abs(x - nearest) <= _INT_TOL * max(1, abs(nearest)):
        return Fraction(nearest)
    return x


def _floor_snap(x: Fraction) -> int:
    """Floor with the same tolerance, so that breakpoints of different
    classes that coincide up to float noise jump together."""
    return int(_snap(x))


def compute_partition(config: SystemConfig, allow_all_helper: bool = False) -> Partition:
    """Compute the balanced sub-partition for ``config``.

    When every ideal slot count ``k * demand_i / (need_i * total_demand)`` is
    an integer, psi is 1 and the helper pool is empty.  Otherwise psi is the
    largest breakpoint of the floor terms at which the helper pool keeps at
    least ``max_i need_i`` servers; the constraint set can be open on the
    right (the floors jump exactly at its supremum), in which case the slot
    vector of the interval interior applies and the reported psi is the
    largest feasible breakpoint.  Breakpoints are compared in exact rational
    arithmetic, with a 1e-9 relative snap for float inputs.
    """
    needs = [c.need for c in config.classes]
    max_need = max(needs)
    if config.k < max_need:
        raise ValueError(f"k={config.k} is below the largest server need")

    demands = [Fraction(d) for d in config.demands]
    total = sum(demands)
    ratios = [
        _snap(Fraction(config.k) * d / (n * total)) for d, n in zip(demands, needs)
    ]

    if all(r.denominator == 1 for r in ratios):
        slots = tuple(int(r) for r in ratios)
        servers = tuple(s * n for s, n in zip(slots, needs))
        helper = config.k - sum(servers)
        # exact proportionality leaves nothing over
        assert helper == 0
        return Partition(slots, servers, helper, 1.0)

    breakpoints = {Fraction(1)}
    for r in ratios:
        for m in range(1, math.floor(r) + 1):
            bp = Fraction(m) / r
            if bp <= 1:
                breakpoints.add(bp)

    for bp in sorted(breakpoints, reverse=True):
        slots = tuple(_floor_snap(bp * r) for r in ratios)
        used = sum(s * n for s, n in zip(slots, needs))
        if config.k - used >= max_need:
            if not any(slots) and not allow_all_helper:
                raise ValueError(
                    "partition degenerates to helpers only; "
                    "pass allow_all_helper=True to accept it"
                )
            servers = tuple(s * n for s, n in zip(slots, needs))
            return Partition(slots, servers, config.k - used, float(bp))

    # no breakpoint admits a helper pool; only the all-helper split remains
    if not allow_all_helper:
        raise ValueError(
            "partition degenerates to helpers only; "
            "pass allow_all_helper=True to accept it"
        )
    zeros = tuple(0 for _ in needs)
    return Partition(zeros, zeros, config.k, 0.0)
