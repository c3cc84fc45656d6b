"""Positional slot bookkeeping per link and First-Fit search across a path.

A grid stores occupancy as one Python integer used as a bitmask (bit i set
means slot i is occupied, index 0 is the lowest frequency). First-Fit then
reduces to bit arithmetic: AND the free masks of every link on the path
(spectrum continuity), collapse runs of n set bits (spectrum contiguity),
and take the lowest surviving bit. This keeps the per-request cost at a
handful of big-int operations, which matters at millions of requests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .topology import LinkId


class CapacityMismatch(ValueError):
    """Grids combined in one search do not share the same slot count."""


class SlotConflict(ValueError):
    """Attempt to occupy a slot that is already occupied."""


class SlotNotOccupied(ValueError):
    """Attempt to release a slot that is not occupied."""


@dataclass(frozen=True)
class SlotRange:
    """A contiguous block of slots [start, start+length)."""

    start: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("slot range length must be >= 1")
        if self.start < 0:
            raise ValueError("slot range start must be >= 0")

    @property
    def mask(self) -> int:
        return ((1 << self.length) - 1) << self.start


class SpectrumGrid:
    """Occupancy of the S frequency slots of one link."""

    __slots__ = ("link", "capacity", "occ")

    def __init__(self, link: LinkId, capacity: int):
        if capacity < 1:
            raise ValueError("grid capacity must be >= 1")
        self.link = link
        self.capacity = capacity
        self.occ = 0  # bit i set <=> slot i occupied

    @property
    def full_mask(self) -> int:
        return (1 << self.capacity) - 1

    def occupied_count(self) -> int:
        return self.occ.bit_count()

    def occupied_indices(self) -> list[int]:
        occ = self.occ
        return [i for i in range(self.capacity) if occ >> i & 1]

    def is_free(self, rng: SlotRange) -> bool:
        return rng.start + rng.length <= self.capacity and not self.occ & rng.mask

    def copy(self) -> "SpectrumGrid":
        dup = SpectrumGrid(self.link, self.capacity)
        dup.occ = self.occ
        return dup


def _check_range(grids: Sequence[SpectrumGrid], rng: SlotRange) -> None:
    for grid in grids:
        if rng.start + rng.length > grid.capacity:
            raise CapacityMismatch(
                f"range {rng.start}+{rng.length} exceeds capacity {grid.capacity}"
            )


def first_fit(grids: Sequence[SpectrumGrid], n: int) -> SlotRange | None:
    """Lowest-start block of n slots free on every grid at the same indices.

    Returns None when no such block exists. All grids must share one
    capacity; raises CapacityMismatch otherwise.
    """
    if n < 1:
        raise ValueError("demand must be >= 1 slot")
    capacity = grids[0].capacity
    free = grids[0].full_mask
    for grid in grids:
        if grid.capacity != capacity:
            raise CapacityMismatch(
                f"grid capacities differ: {grid.capacity} != {capacity}"
            )
        free &= ~grid.occ
    if n > capacity:
        return None
    # Collapse runs: after the loop, bit i survives iff slots i..i+n-1 are
    # all free. Doubling the collapse step keeps this O(log n) operations.
    run = free
    have = 1
    while have < n and run:
        step = min(have, n - have)
        run &= run >> step
        have += step
    if not run:
        return None
    start = (run & -run).bit_length() - 1
    return SlotRange(start, n)


def occupy(grids: Sequence[SpectrumGrid], rng: SlotRange) -> None:
    """Mark the range occupied on every grid; atomic across the grids."""
    _check_range(grids, rng)
    mask = rng.mask
    for grid in grids:
        if grid.occ & mask:
            raise SlotConflict(
                f"link {grid.link}: slots in [{rng.start}, {rng.start + rng.length}) "
                "already occupied"
            )
    for grid in grids:
        grid.occ |= mask

def release(grids: Sequence[SpectrumGrid], rng: SlotRange) -> None:
    """Free the range on every grid; every slot must currently be occupied."""
    _check_range(grids, rng)
    mask = rng.mask
    for grid in grids:
        if grid.occ & mask != mask:
            raise SlotNotOccupied(
                f"link {grid.link}: slots in [{rng.start}, {rng.start + rng.length}) "
                "not fully occupied"
            )
    for grid in grids:
        grid.occ &= ~mask
