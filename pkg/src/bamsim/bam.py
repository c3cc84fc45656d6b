"""Per-link volumetric admission control for the three allocation models.

The three models bound how many slots each traffic class may hold on a link,
independently of where those slots sit in the spectrum (positional search is
the spectrum module's job). Class indices double as priority rank: larger
index means higher priority (0 = Bronze, up to C-1 = Gold).

MAM  caps every class at its private pool: used_c + b <= pool_c. Full
     isolation, no sharing in either direction.

RDM  nests aggregate caps like Russian dolls. Admitting b slots for class c
     must respect, for every k <= c, sum(used_j for j >= k) + b <= rc_k with
     rc_k = sum(pool_j for j >= k). Low-priority classes can thereby soak up
     whatever the higher-priority classes leave idle (high-to-low sharing),
     while class c itself never pushes the top dolls over their caps.

ATCS keeps RDM's high-to-low sharing and adds low-to-high loans: admission
     only requires total occupancy to fit the link, sum(used) + b <= S. A
     loan ledger tracks which pool each lightpath actually drew from so a
     departure returns exactly what was taken. Established lightpaths are
     never preempted to repatriate loans.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Sequence


class UnknownClass(IndexError):
    """Class index outside the configured class count."""


class PreconditionViolated(RuntimeError):
    """commit() called for a request the model does not admit."""


class LedgerUnderflow(ValueError):
    """release() would drive a usage counter or ledger entry negative."""


class BamKind(Enum):
    MAM = "mam"
    RDM = "rdm"
    ATCS = "atcs"

    @classmethod
    def parse(cls, text: str) -> "BamKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown allocation model {text!r}") from None


# How many slots one committed lightpath drew from each class pool, indexed
# by pool (= class) number. Entries sum to the lightpath's slot count; under
# MAM/RDM everything is charged to the requesting class's own pool.
Attribution = tuple[int, ...]


@dataclass(frozen=True)
class BamConfig:
    """Nominal per-class pools on one link; pools must exactly tile S."""

    pools: tuple[int, ...]
    capacity: int

    def __post_init__(self) -> None:
        if not self.pools:
            raise ValueError("need at least one traffic class pool")
        if any(p <= 0 for p in self.pools):
            raise ValueError("every class pool must be positive")
        if sum(self.pools) != self.capacity:
            raise ValueError(
                f"pools {self.pools} sum to {sum(self.pools)}, capacity is {self.capacity}"
            )

    @classmethod
    def from_shares(cls, shares_pct: Sequence[float], capacity: int) -> "BamConfig":
        """Derive pool slot counts as round(share/100 * S); they must tile S."""
        pools = tuple(round(share * capacity / 100.0) for share in shares_pct)
        if sum(pools) != capacity:
            raise ValueError(
                f"shares {tuple(shares_pct)} of {capacity} slots round to pools "
                f"{pools} which sum to {sum(pools)} != {capacity}"
            )
        return cls(pools=pools, capacity=capacity)

    @cached_property
    def class_count(self) -> int:
        return len(self.pools)

    @cached_property
    def rdm_rc(self) -> tuple[int, ...]:
        """rc_k = slots available to classes k and above, rc_0 = S."""
        rc = []
        acc = 0
        for pool in reversed(self.pools):
            acc += pool
            rc.append(acc)
        return tuple(reversed(rc))


def admit(
    kind: BamKind, config: BamConfig, used: Sequence[int], c: int, b: int
) -> bool:
    """Pure admission decision: may class c take b more slots on this link?

    `used` is the current per-class slot usage. The ATCS decision depends
    only on total usage, never on how the loan ledger attributes it.
    """
    if b < 1:
        raise ValueError("demand must be >= 1 slot")
    if not 0 <= c < config.class_count:
        raise UnknownClass(f"class {c} out of range 0..{config.class_count - 1}")
    if kind is BamKind.MAM:
        return used[c] + b <= config.pools[c]
    if kind is BamKind.RDM:
        rc = config.rdm_rc
        tail = sum(used[c:])  # classes >= c, aggregated once
        if tail + b > rc[c]:
            return False
        for k in range(c - 1, -1, -1):
            tail += used[k]
            if tail + b > rc[k]:
                return False
        return True
    return sum(used) + b <= config.capacity


class BamState:
    """Mutable volumetric accounting for one link under one model.

    Tracks per-class usage and, for ATCS, the loan ledger: own_used[c] is
    what class c drew from its own pool, borrowed[c][d] what it currently
    draws from class d's pool.
    """

    __slots__ = ("kind", "config", "used", "own_used", "borrowed")

    def __init__(self, kind: BamKind, config: BamConfig):
        self.kind = kind
        self.config = config
        count = config.class_count
        self.used = [0] * count
        self.own_used = [0] * count
        self.borrowed = [[0] * count for _ in range(count)]

    def admit(self, c: int, b: int) -> bool:
        return admit(self.kind, self.config, self.used, c, b)

    def commit(self, c: int, b: int) -> Attribution:
        """Account for b admitted slots and say which pools supplied them.

        ATCS draws from the requester's own pool first, then from donor
        pools with spare nominal capacity in ascending priority order
        (skipping the requester). A pool's spare always nets out what it
        has lent to other classes, the requester's own pool included:
        loans are never repatriated by preemption, so an owner returning
        to a lent-out pool borrows elsewhere instead. The scan cannot run
        dry because admission guarantees total spare >= b. Donor order
        shapes only the ledger, never any admission decision.
        """
        if not self.admit(c, b):
            raise PreconditionViolated(
                f"class {c} demand {b} not admissible under {self.kind.value}"
            )
        self.used[c] += b
        count = self.config.class_count
        pools = self.config.pools
        if self.kind is not BamKind.ATCS:
            attr = [0] * count
            attr[c] = b
            return tuple(attr)
        borrowed = self.borrowed

        def pool_spare(d: int) -> int:
            lent_out = sum(borrowed[ci][d] for ci in range(count))
            return pools[d] - self.own_used[d] - lent_out

        own_take = min(b, pool_spare(c))
        self.own_used[c] += own_take
        attr = [0] * count
        attr[c] = own_take
        remaining = b - own_take
        for d in range(count):
            if not remaining:
                break
            if d == c:
                continue
            take = min(pool_spare(d), remaining)
            if take > 0:
                borrowed[c][d] += take
                attr[d] += take
                remaining -= take
        if remaining:
            raise PreconditionViolated(
                f"loan scan ran dry with {remaining} slots unattributed"
            )
        return tuple(attr)

    def release(self, c: int, attribution: Attribution) -> None:
        """Return exactly the slots a prior commit for class c drew."""
        if len(attribution) != self.config.class_count:
            raise LedgerUnderflow(
                f"attribution has {len(attribution)} entries, "
                f"expected {self.config.class_count}"
            )
        b = sum(attribution)
        if self.used[c] - b < 0:
            raise LedgerUnderflow(f"class {c} usage would drop below zero")
        if self.kind is BamKind.ATCS:
            if self.own_used[c] - attribution[c] < 0:
                raise LedgerUnderflow(f"class {c} own-pool draw would drop below zero")
            for d, back in enumerate(attribution):
                if d != c and self.borrowed[c][d] - back < 0:
                    raise LedgerUnderflow(
                        f"loan of class {c} from pool {d} would drop below zero"
                    )
            self.own_used[c] -= attribution[c]
            for d, back in enumerate(attribution):
                if d != c:
                    self.borrowed[c][d] -= back
        self.used[c] -= b

    def check_invariants(self) -> str | None:
        """Return a violation description, or None when all invariants hold."""
        cfg = self.config
        used = self.used
        if any(u < 0 for u in used):
            return f"negative usage {used}"
        if sum(used) > cfg.capacity:
            return f"total usage {sum(used)} exceeds capacity {cfg.capacity}"
        if self.kind is BamKind.MAM:
            for c, u in enumerate(used):
                if u > cfg.pools[c]:
                    return f"MAM class {c} usage {u} exceeds pool {cfg.pools[c]}"
        elif self.kind is BamKind.RDM:
            for k, rc in enumerate(cfg.rdm_rc):
                if sum(used[k:]) > rc:
                    return f"RDM aggregate >= class {k} is {sum(used[k:])} > rc {rc}"
        else:
            count = cfg.class_count
            for c in range(count):
                if self.own_used[c] < 0 or self.own_used[c] > cfg.pools[c]:
                    return f"ATCS own draw {self.own_used[c]} outside pool {cfg.pools[c]}"
                if self.borrowed[c][c] != 0:
                    return f"ATCS class {c} borrows from itself"
                if any(x < 0 for x in self.borrowed[c]):
                    return f"ATCS negative loan row {self.borrowed[c]}"
                claimed = self.own_used[c] + sum(self.borrowed[c])
                if claimed != used[c]:
                    return (
                        f"ATCS class {c} ledger claims {claimed}, usage says {used[c]}"
                    )
            for d in range(count):
                committed = self.own_used[d] + sum(
                    self.borrowed[c][d] for c in range(count)
                )
                if committed > cfg.pools[d]:
                    return (
                        f"ATCS pool {d} oversubscribed: {committed} > {cfg.pools[d]}"
                    )
        return None
