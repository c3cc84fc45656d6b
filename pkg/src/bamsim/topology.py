"""Directed network graph and the fixed per-class paths a scenario routes over.

Traffic in the simulated scenarios is one-way (a single source node fans out
to per-class destinations), so links are directed and no reverse-direction
capacity exists unless the config declares the reverse link explicitly.
Topologies are immutable after construction and safe to share across
replications.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

NodeId = int
LinkId = tuple[NodeId, NodeId]


class UnknownNode(KeyError):
    """A node id that does not exist in the topology."""


class NoSuchLink(KeyError):
    """Two consecutive path nodes that are not joined by a directed link."""


@dataclass(frozen=True)
class Link:
    src: NodeId
    dst: NodeId
    capacity: int  # slots

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise ValueError(f"link {self.src}->{self.dst}: capacity must be positive")

    @property
    def id(self) -> LinkId:
        return (self.src, self.dst)


@dataclass(frozen=True)
class Path:
    """An ordered node walk plus the directed links joining it.

    links[i] connects nodes[i] -> nodes[i+1]; at least one link; a link may
    appear at most once (loops would double-book slots on that link).
    """

    nodes: tuple[NodeId, ...]
    links: tuple[LinkId, ...]

    def __post_init__(self) -> None:
        if len(self.links) < 1 or len(self.nodes) != len(self.links) + 1:
            raise ValueError("path needs >= 2 nodes and one link per hop")
        for (src, dst), a, b in zip(self.links, self.nodes, self.nodes[1:]):
            if (src, dst) != (a, b):
                raise ValueError(f"link {src}->{dst} does not join {a}->{b}")
        if len(set(self.links)) != len(self.links):
            raise ValueError("path repeats a link")


class Topology:
    """Immutable directed graph with slot capacities on each link."""

    def __init__(self, links: Iterable[Link]):
        self._links: dict[LinkId, Link] = {}
        self.nodes: frozenset[NodeId]
        nodes: set[NodeId] = set()
        for link in links:
            if link.id in self._links:
                raise ValueError(f"duplicate link {link.src}->{link.dst}")
            self._links[link.id] = link
            nodes.add(link.src)
            nodes.add(link.dst)
        self.nodes = frozenset(nodes)

    @property
    def links(self) -> tuple[Link, ...]:
        return tuple(self._links.values())

    def link(self, link_id: LinkId) -> Link:
        try:
            return self._links[link_id]
        except KeyError:
            raise NoSuchLink(f"no link {link_id[0]}->{link_id[1]}") from None

    def has_link(self, link_id: LinkId) -> bool:
        return link_id in self._links

    def resolve_path(self, node_seq: Sequence[NodeId]) -> Path:
        """Walk a node sequence and return the Path of directed links it uses.

        Raises UnknownNode for an absent node and NoSuchLink when two
        consecutive nodes are not adjacent.
        """
        if len(node_seq) < 2:
            raise ValueError("a path needs at least 2 nodes")
        for node in node_seq:
            if node not in self.nodes:
                raise UnknownNode(f"node {node} not in topology")
        hops = []
        for a, b in zip(node_seq, node_seq[1:]):
            if (a, b) not in self._links:
                raise NoSuchLink(f"no link {a}->{b}")
            hops.append((a, b))
        return Path(nodes=tuple(node_seq), links=tuple(hops))


def nsfnet_partial_topology(capacity: int = 400) -> Topology:
    """The 5-node NSFNet cutout used by the bundled scenarios.

    Node 14 is the single traffic source; 4 is the shared transit node; 2, 7
    and 5 are the per-class destinations. Every link carries `capacity` slots
    (400 in the bundled configs).
    """
    return Topology(
        Link(src, dst, capacity)
        for src, dst in ((14, 4), (4, 2), (4, 7), (4, 5))
    )
