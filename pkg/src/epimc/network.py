"""Static network model: agents, weighted channels, and delivery guarantees.

Agents are numbered 1..n. A channel (src, dst, bound) is directed and promises
that any message sent on it is delivered within `bound` rounds. The guarantee
relation between agent-time nodes follows from shortest paths over the bounds
and is independent of any concrete run.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple


class Node(NamedTuple):
    """An agent-time pair, the unit at which events occur and knowledge is indexed."""

    agent: int
    time: int

    def __str__(self) -> str:
        return f"{self.agent}@{self.time}"


def scan_key(node: Node) -> tuple[int, int]:
    """Canonical witness-scan order: time ascending, then agent."""
    return (node.time, node.agent)


@dataclass(frozen=True)
class Channel:
    """Directed channel with a maximal delivery delay in rounds (bound >= 1)."""

    src: int
    dst: int
    bound: int


@dataclass(frozen=True)
class Topology:
    """A fixed set of agents plus directed bounded channels.

    Immutable after construction; validate with :func:`validate_topology`
    before use. Undirected links are encoded as a pair of directed channels.
    """

    agent_count: int
    channels: tuple[Channel, ...]

    @classmethod
    def of(cls, agent_count: int, links: list[tuple[int, int, int]]) -> "Topology":
        """Build from (src, dst, bound) triples, canonically ordered."""
        chans = tuple(sorted((Channel(s, d, b) for s, d, b in links),
                             key=lambda c: (c.src, c.dst)))
        return cls(agent_count, chans)

    def agents(self) -> range:
        return range(1, self.agent_count + 1)

    def out_channels(self, agent: int) -> tuple[Channel, ...]:
        return _out_channels(self)[agent]

    def bound(self, src: int, dst: int) -> int | None:
        """Bound of the (src, dst) channel, or None when absent."""
        return _bound_map(self).get((src, dst))


class TopologyError(ValueError):
    """Raised when a topology violates a structural invariant."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def validate_topology(topo: Topology) -> None:
    """Accept iff the topology is well formed; raise on the first violation.

    Distinct error codes: agent-count, zero-bound, self-loop,
    dangling-endpoint, duplicate-channel.
    """
    if topo.agent_count < 1:
        raise TopologyError("agent-count", f"agent count must be >= 1, got {topo.agent_count}")
    seen: set[tuple[int, int]] = set()
    for ch in topo.channels:
        if ch.bound < 1:
            raise TopologyError("zero-bound", f"channel {ch.src}->{ch.dst} has bound {ch.bound}; bounds must be >= 1")
        if ch.src == ch.dst:
            raise TopologyError("self-loop", f"channel {ch.src}->{ch.dst} is a self-loop")
        for end in (ch.src, ch.dst):
            if not 1 <= end <= topo.agent_count:
                raise TopologyError(
                    "dangling-endpoint",
                    f"channel {ch.src}->{ch.dst} references agent {end} outside 1..{topo.agent_count}")
        if (ch.src, ch.dst) in seen:
            raise TopologyError("duplicate-channel", f"duplicate channel {ch.src}->{ch.dst}")
        seen.add((ch.src, ch.dst))


@lru_cache(maxsize=None)
def _out_channels(topo: Topology) -> dict[int, tuple[Channel, ...]]:
    by_src: dict[int, list[Channel]] = {i: [] for i in topo.agents()}
    for ch in topo.channels:
        by_src[ch.src].append(ch)
    return {i: tuple(sorted(cs, key=lambda c: c.dst)) for i, cs in by_src.items()}


@lru_cache(maxsize=None)
def _bound_map(topo: Topology) -> dict[tuple[int, int], int]:
    return {(c.src, c.dst): c.bound for c in topo.channels}


@lru_cache(maxsize=None)
def _wdist_matrix(topo: Topology) -> dict[tuple[int, int], int]:
    """All-pairs shortest path over channel bounds (Floyd-Warshall).

    Missing keys mean unreachable; the diagonal is 0.
    """
    dist: dict[tuple[int, int], int] = {(i, i): 0 for i in topo.agents()}
    for ch in topo.channels:
        cur = dist.get((ch.src, ch.dst))
        if cur is None or ch.bound < cur:
            dist[(ch.src, ch.dst)] = ch.bound
    for k in topo.agents():
        for i in topo.agents():
            ik = dist.get((i, k))
            if ik is None:
                continue
            for j in topo.agents():
                kj = dist.get((k, j))
                if kj is None:
                    continue
                cur = dist.get((i, j))
                if cur is None or ik + kj < cur:
                    dist[(i, j)] = ik + kj
    return dist


def wdist(topo: Topology, src: int, dst: int) -> int | None:
    """Weighted shortest-path distance over bounds; None when unreachable."""
    return _wdist_matrix(topo).get((src, dst))


def bound_guarantee(topo: Topology, a: Node, b: Node) -> bool:
    """True iff information present at node `a` is guaranteed to reach node `b`.

    Closed form of the inductive definition (same-agent forward step, one-hop
    channel step to time t + bound, transitive closure): b.time must be at
    least a.time plus the shortest-path distance from a.agent to b.agent.
    Total on valid topologies.
    """
    d = wdist(topo, a.agent, b.agent)
    return d is not None and b.time >= a.time + d


def min_guarantee_time(topo: Topology, origin: Node, target: int) -> int | None:
    """Least t such that `origin` guarantees reaching agent `target` by t.

    None when the target is unreachable from the origin agent.
    """
    d = wdist(topo, origin.agent, target)
    if d is None:
        return None
    return origin.time + d
