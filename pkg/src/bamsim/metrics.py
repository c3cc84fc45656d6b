"""Counters, time-weighted utilization series, and replication aggregation.

Utilization is accumulated as slot-hours over a fixed grid of bins covering
[0, horizon), where the horizon is the last arrival time of the scenario.
The engine keeps recording while it drains departures past the horizon, but
reported series and means stop at the horizon so every model is compared on
the same window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .topology import LinkId


class NegativeInterval(ValueError):
    """record_interval called with t1 < t0."""


class GridMismatch(ValueError):
    """Replications aggregated over different sample grids or labels."""


class UtilizationSeries:
    """Slot-hour accumulator for one link (or the whole network).

    With a horizon the series has ceil(horizon / bin_width) fixed bins;
    contributions beyond the horizon count toward the raw integral but not
    toward the bins or the reported mean. Without a horizon the bins grow
    as needed and the mean covers everything recorded so far.
    """

    __slots__ = ("capacity", "bin_width", "horizon", "bins", "integral", "t_end")

    def __init__(self, capacity: int, bin_width: float, horizon: float | None = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if bin_width <= 0:
            raise ValueError("bin width must be positive")
        self.capacity = capacity
        self.bin_width = bin_width
        self.horizon = horizon
        nbins = 0 if horizon is None else math.ceil(horizon / bin_width)
        self.bins = np.zeros(nbins, dtype=np.float64)  # slot-hours per bin
        self.integral = 0.0  # slot-hours, unclipped
        self.t_end = 0.0

    def record(self, t0: float, t1: float, used_slots: int) -> None:
        if t1 < t0:
            raise NegativeInterval(f"interval [{t0}, {t1}] runs backwards")
        if not 0 <= used_slots <= self.capacity:
            raise ValueError(f"{used_slots} used slots on a {self.capacity}-slot link")
        if t1 == t0:
            return
        self.integral += used_slots * (t1 - t0)
        self.t_end = max(self.t_end, t1)
        if used_slots == 0:
            return
        hi = t1 if self.horizon is None else min(t1, self.horizon)
        if hi <= t0:
            return
        bw = self.bin_width
        first = int(t0 // bw)
        last = int(math.ceil(hi / bw))
        if self.horizon is None and last > len(self.bins):
            self.bins = np.concatenate(
                [self.bins, np.zeros(last - len(self.bins), dtype=np.float64)]
            )
        if last - first == 1:
            self.bins[first] += used_slots * (hi - t0)
            return
        # First and last bins may be partial; interior bins are full.
        self.bins[first] += used_slots * ((first + 1) * bw - t0)
        self.bins[last - 1] += used_slots * (hi - (last - 1) * bw)
        if last - first > 2:
            self.bins[first + 1 : last - 1] += used_slots * bw
    def _covered(self) -> float:
        if self.horizon is not None:
            return min(self.t_end, self.horizon)
        return self.t_end

    def mean_utilization(self) -> float:
        """Time-weighted mean fraction over the reporting window."""
        covered = self._covered()
        if covered <= 0:
            return 0.0
        return float(self.bins.sum()) / (self.capacity * covered)

    def fractions(self) -> np.ndarray:
        """Per-bin mean occupancy fraction; a trailing partial bin is
        normalized by its actual span."""
        covered = self._covered()
        spans = np.minimum(
            self.bin_width,
            np.maximum(0.0, covered - np.arange(len(self.bins)) * self.bin_width),
        )
        out = np.zeros(len(self.bins), dtype=np.float64)
        np.divide(self.bins, self.capacity * spans, out=out, where=spans > 0)
        return out

    def bin_starts(self) -> np.ndarray:
        return np.arange(len(self.bins), dtype=np.float64) * self.bin_width


def record_interval(
    series: UtilizationSeries, t0: float, t1: float, used_slots: int, capacity: int
) -> UtilizationSeries:
    """Accumulate used_slots over [t0, t1) into the series and return it."""
    if capacity != series.capacity:
        raise GridMismatch(
            f"capacity {capacity} does not match series capacity {series.capacity}"
        )
    series.record(t0, t1, used_slots)
    return series


@dataclass
class RawMetrics:
    """Everything one replication measured."""

    scenario: str
    bam: str
    replication: int
    seed: int
    class_names: tuple[str, ...]
    arrivals: int
    established: np.ndarray  # per class
    blocked_bam: np.ndarray
    blocked_spectrum: np.ndarray
    bin_width: float
    horizon: float
    bin_t: np.ndarray
    link_utilization: dict[LinkId, np.ndarray]  # fractions per bin
    link_mean_utilization: dict[LinkId, float]
    network_utilization: np.ndarray
    network_mean_utilization: float
    cum_blocked: np.ndarray  # totals at each bin end
    cum_established: np.ndarray

    @property
    def blocked(self) -> np.ndarray:
        return self.blocked_bam + self.blocked_spectrum

    def totals(self) -> dict[str, int]:
        return {
            "blocked": int(self.blocked.sum()),
            "blocked_bam": int(self.blocked_bam.sum()),
            "blocked_spectrum": int(self.blocked_spectrum.sum()),
            "established": int(self.established.sum()),
        }

    def scalars(self, headline_link: LinkId) -> dict[str, float]:
        """Flat scalar view used for aggregation and CSV rows."""
        out: dict[str, float] = {}
        for label, arr in (
            ("blocked", self.blocked),
            ("blocked_bam", self.blocked_bam),
            ("blocked_spectrum", self.blocked_spectrum),
            ("established", self.established),
        ):
            out[f"{label}_total"] = float(arr.sum())
            for c in range(len(self.class_names)):
                out[f"{label}_class_{c}"] = float(arr[c])
        out["mean_utilization_link"] = self.link_mean_utilization[headline_link]
        out["mean_utilization_network"] = self.network_mean_utilization
        return out


@dataclass(frozen=True)
class ScalarStats:
    mean: float
    stddev: float
    ci95: float  # half-width, Student-t with R-1 degrees of freedom


@dataclass
class AggregatedMetrics:
    scenario: str
    bam: str
    replications: int
    headline_link: LinkId
    scalars: dict[str, ScalarStats]
    bin_t: np.ndarray
    link_utilization_mean: np.ndarray  # headline link, pointwise over reps
    network_utilization_mean: np.ndarray
    cum_blocked_mean: np.ndarray
    cum_established_mean: np.ndarray
    per_replication: list[RawMetrics] = field(repr=False, default_factory=list)

    def scalar(self, key: str) -> ScalarStats:
        return self.scalars[key]


def _scalar_stats(values: Sequence[float]) -> ScalarStats:
    n = len(values)
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if n == 1:
        return ScalarStats(mean=mean, stddev=0.0, ci95=0.0)
    sd = float(arr.std(ddof=1))
    tcrit = float(stats.t.ppf(0.975, df=n - 1))
    return ScalarStats(mean=mean, stddev=sd, ci95=tcrit * sd / math.sqrt(n))


def aggregate(
    replications: Sequence[RawMetrics], headline_link: LinkId | None = None
) -> AggregatedMetrics:
    """Mean / sample stddev / 95% CI half-width per scalar, pointwise mean
    per series, across replications of one (scenario, model) cell."""
    if not replications:
        raise ValueError("nothing to aggregate")
    first = replications[0]
    if headline_link is None:
        headline_link = next(iter(first.link_utilization))
    for rep in replications[1:]:
        if (rep.scenario, rep.bam) != (first.scenario, first.bam):
            raise GridMismatch(
                f"mixed cells: ({rep.scenario}, {rep.bam}) vs "
                f"({first.scenario}, {first.bam})"
            )
        if (
            rep.bin_width != first.bin_width
            or rep.horizon != first.horizon
            or len(rep.bin_t) != len(first.bin_t)
        ):
            raise GridMismatch("replications use different sample grids")

    keys = first.scalars(headline_link).keys()
    per_key = {
        key: _scalar_stats([rep.scalars(headline_link)[key] for rep in replications])
        for key in keys
    }

    def series_mean(pick) -> np.ndarray:
        return np.mean([pick(rep) for rep in replications], axis=0)

    return AggregatedMetrics(
        scenario=first.scenario,
        bam=first.bam,
        replications=len(replications),
        headline_link=headline_link,
        scalars=per_key,
        bin_t=first.bin_t.copy(),
        link_utilization_mean=series_mean(lambda r: r.link_utilization[headline_link]),
        network_utilization_mean=series_mean(lambda r: r.network_utilization),
        cum_blocked_mean=series_mean(lambda r: r.cum_blocked),
        cum_established_mean=series_mean(lambda r: r.cum_established),
        per_replication=list(replications),
    )
