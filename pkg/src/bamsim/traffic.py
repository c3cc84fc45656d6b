"""Arrival-stream generation for the traffic classes of a scenario.

Arrivals are deterministic arithmetic progressions: class c produces requests
at start_delay + k * inter_arrival for k = 0, 1, ... ("generated every X
hours"). Randomness enters only through the exponential holding times, drawn
from one substream per (seed, class) so that adding or removing a class never
perturbs another class's draws; replications differ only by their derived
seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HOLD_TIME_MEAN_H = 2500.0  # mean exponential holding time, hours


class UnknownScenario(KeyError):
    """Scenario id outside the bundled presets."""


@dataclass(frozen=True)
class TrafficClassSpec:
    index: int
    name: str
    demand_slots: int
    inter_arrival_h: float
    start_delay_h: float
    path: tuple[int, ...]  # node sequence, resolved against the topology
    share_pct: float

    def __post_init__(self) -> None:
        if self.demand_slots < 1:
            raise ValueError(f"class {self.name}: demand must be >= 1 slot")
        if self.inter_arrival_h <= 0:
            raise ValueError(f"class {self.name}: inter-arrival must be positive")
        if self.start_delay_h < 0:
            raise ValueError(f"class {self.name}: start delay must be >= 0")


@dataclass(frozen=True)
class Request:
    id: int
    class_index: int
    arrival_time: float
    hold_time: float


def class_hold_rng(seed: int, class_index: int) -> np.random.Generator:
    """Deterministic, class-independent substream for holding-time draws."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(class_index,))
    )


def _arrival_count_at(spec: TrafficClassSpec, t: float) -> int:
    if t < spec.start_delay_h:
        return 0
    return int((t - spec.start_delay_h) // spec.inter_arrival_h) + 1


def arrival_arrays(
    specs: Sequence[TrafficClassSpec],
    total_requests: int,
    seed: int,
    hold_mean_h: float = HOLD_TIME_MEAN_H,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merged arrival stream as (times, class indices, hold times) arrays.

    The merge is sorted by (time, descending class priority) and truncated
    after `total_requests` requests; request ids are the positions in the
    returned arrays. This is the bulk form generate_arrivals() wraps.
    """
    if not specs:
        raise ValueError("need at least one traffic class")
    if total_requests < 0:
        raise ValueError("total request count must be >= 0")
    if total_requests == 0:
        empty_f = np.empty(0, dtype=np.float64)
        return empty_f, np.empty(0, dtype=np.int64), empty_f.copy()

    # Find a horizon holding at least N merged arrivals, then cut exactly N.
    horizon = max(s.start_delay_h + s.inter_arrival_h for s in specs)
    while sum(_arrival_count_at(s, horizon) for s in specs) < total_requests:
        horizon *= 2.0
    lo, hi = 0.0, horizon
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if sum(_arrival_count_at(s, mid) for s in specs) >= total_requests:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-9 * max(hi, 1.0):
            break
    horizon = hi

    while True:
        per_class_times = []
        per_class_idx = []
        for spec in specs:
            count = _arrival_count_at(spec, horizon)
            times = spec.start_delay_h + np.arange(count, dtype=np.float64) * float(
                spec.inter_arrival_h
            )
            per_class_times.append(times)
            per_class_idx.append(np.full(count, spec.index, dtype=np.int64))
        times = np.concatenate(per_class_times)
        classes = np.concatenate(per_class_idx)
        if len(times) >= total_requests:
            break
        horizon *= 1.5  # float fuzz at the cut; widen and retry

    # Primary: time ascending. Secondary: class index descending, so the
    # higher-priority class wins a tie at a shared arrival instant.
    order = np.lexsort((-classes, times))[:total_requests]
    times = times[order]
    classes = classes[order]

    holds = np.empty(total_requests, dtype=np.float64)
    for spec in specs:
        where = np.nonzero(classes == spec.index)[0]
        if len(where):
            rng = class_hold_rng(seed, spec.index)
            holds[where] = rng.exponential(hold_mean_h, size=len(where))
    return times, classes, holds


def generate_arrivals(
    specs: Sequence[TrafficClassSpec],
    total_requests: int,
    seed: int,
    hold_mean_h: float = HOLD_TIME_MEAN_H,
) -> list[Request]:
    """Merged, truncated arrival stream as Request records."""
    times, classes, holds = arrival_arrays(specs, total_requests, seed, hold_mean_h)
    return [
        Request(id=i, class_index=int(c), arrival_time=float(t), hold_time=float(h))
        for i, (t, c, h) in enumerate(zip(times, classes, holds))
    ]


# (inter_arrival_h, start_delay_h) per class for the four bundled scenarios.
_SCENARIO_TIMING: dict[int, tuple[tuple[float, float], ...]] = {
    1: ((40.0, 5000.0), (20.0, 3000.0), (10.0, 0.0)),
    2: ((40.0, 0.0), (20.0, 3000.0), (10.0, 5000.0)),
    3: ((10.0, 5000.0), (20.0, 3000.0), (40.0, 0.0)),
    4: ((10.0, 0.0), (20.0, 3000.0), (40.0, 5000.0)),
}

_CLASS_NAMES = ("Bronze", "Silver", "Gold")
_CLASS_DEMANDS = (1, 2, 5)
_CLASS_PATHS = ((14, 4, 2), (14, 4, 7), (14, 4, 5))
_CLASS_SHARES = (20.0, 30.0, 50.0)


def scenario_presets(scenario_id: int) -> tuple[TrafficClassSpec, ...]:
    """Class specs for bundled scenarios 1-4 (Bronze/Silver/Gold)."""
    try:
        timing = _SCENARIO_TIMING[scenario_id]
    except KeyError:
        raise UnknownScenario(f"no bundled scenario {scenario_id}") from None
    return tuple(
        TrafficClassSpec(
            index=c,
            name=_CLASS_NAMES[c],
            demand_slots=_CLASS_DEMANDS[c],
            inter_arrival_h=timing[c][0],
            start_delay_h=timing[c][1],
            path=_CLASS_PATHS[c],
            share_pct=_CLASS_SHARES[c],
        )
        for c in range(3)
    )
