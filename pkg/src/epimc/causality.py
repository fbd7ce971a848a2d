"""Run-level causal relations and detection of relay communication structures.

Two relations drive everything here. Potential causality (written a ~> b in
docstrings) is message-chain reachability over the run's actual deliveries.
The bound guarantee (a --> b, from :mod:`epimc.network`) is reachability over
worst-case channel bounds and holds independently of any run. A centipede is
a causal spine whose intermediate nodes each guarantee delivery to a target
node; a broom is a single hub that guarantees delivery to every target.
"""

from __future__ import annotations

from dataclasses import dataclass

from .network import Node, Topology, bound_guarantee, scan_key
from .runs import Run


def potentially_causes(run: Run, a: Node, b: Node) -> bool:
    """True iff a ~> b: same-agent forward step, an actual send/receive pair,
    or a chain of those. Receives only; undelivered messages contribute nothing."""
    _check_node(run, a)
    _check_node(run, b)
    return a in run.ancestor_map()[b]


def past_cone(run: Run, node: Node) -> frozenset[Node]:
    """All nodes that potentially cause `node`, including the node itself."""
    _check_node(run, node)
    return run.ancestor_map()[node]


def early_delivery_nodes(run: Run) -> frozenset[Node]:
    """Receive nodes where a message arrived strictly before its deadline."""
    topo = run.scenario.topology
    out = set()
    for m, d in run.deliveries.items():
        if d is not None and d < m.sent_at + topo.bound(m.src, m.dst):
            out.add(Node(m.dst, d))
    return frozenset(out)


def find_bridge(run: Run, topo: Topology, a: Node, b: Node) -> Node | None:
    """Given a ~> b without a --> b, the earliest early-delivery node beta
    with a ~> beta --> b. Returns None only if the invariant fails."""
    early = early_delivery_nodes(run)
    anc = run.ancestor_map()
    for beta in _grid(run):
        if beta in early and a in anc[beta] and bound_guarantee(topo, beta, b):
            return beta
    return None


@dataclass(frozen=True)
class Centipede:
    """Causal spine theta_0 ~> ... ~> theta_k with theta_h --> targets[h]."""

    spine: tuple[Node, ...]
    targets: tuple[Node, ...]


@dataclass(frozen=True)
class Broom:
    """A hub causally after the origin that guarantees reaching every target."""

    hub: Node
    origin: Node
    targets: frozenset[Node]


def is_centipede(run: Run, topo: Topology, spine: tuple[Node, ...],
                 targets: tuple[Node, ...]) -> bool:
    """Pure checker for the three centipede conditions; oracle for the finder."""
    if len(spine) != len(targets):
        raise ValueError(f"spine length {len(spine)} != targets length {len(targets)}")
    if len(spine) < 2:
        raise ValueError("a centipede needs at least two nodes")
    if spine[0] != targets[0] or spine[-1] != targets[-1]:
        return False
    anc = run.ancestor_map()
    for prev, nxt in zip(spine, spine[1:]):
        if prev not in anc[nxt]:
            return False
    for h in range(1, len(spine) - 1):
        if not bound_guarantee(topo, spine[h], targets[h]):
            return False
    return True


def is_broom(run: Run, topo: Topology, broom: Broom) -> bool:
    anc = run.ancestor_map()
    if broom.origin not in anc[broom.hub]:
        return False
    return all(bound_guarantee(topo, broom.hub, a) for a in broom.targets)


def find_uneven_centipede(run: Run, topo: Topology,
                          targets: tuple[Node, ...]) -> Centipede | None:
    """Complete search for a centipede witness over targets alpha_0..alpha_k.

    Spine nodes are scanned by (time, agent) ascending at each position, so
    the first witness found is deterministic. Returns None iff no witness
    exists anywhere in the node grid.
    """
    if len(targets) < 2:
        raise ValueError("need alpha_0 and at least one further target")
    for nd in targets:
        _check_node(run, nd)
    anc = run.ancestor_map()
    k = len(targets) - 1
    origin, final = targets[0], targets[k]
    if origin not in anc[final]:
        return None
    # Candidates per intermediate position: nodes guaranteeing the matching
    # target, in scan order. The causal-chain constraint is applied in the DFS.
    per_position = [
        [nd for nd in _grid(run) if bound_guarantee(topo, nd, targets[h])]
        for h in range(1, k)
    ]

    def dfs(h: int, prev: Node) -> list[Node] | None:
        if h == k:
            return [] if prev in anc[final] else None
        for cand in per_position[h - 1]:
            if prev in anc[cand]:
                rest = dfs(h + 1, cand)
                if rest is not None:
                    return [cand] + rest
        return None

    middle = dfs(1, origin)
    if middle is None:
        return None
    return Centipede(spine=(origin, *middle, final), targets=tuple(targets))


def find_uneven_broom(run: Run, topo: Topology, origin: Node,
                      targets: frozenset[Node] | set[Node]) -> Broom | None:
    """First hub (scan order: time, then agent) with origin ~> hub and a
    bound guarantee from the hub to every target; None when no hub exists."""
    if not targets:
        raise ValueError("targets must be nonempty")
    _check_node(run, origin)
    for nd in targets:
        _check_node(run, nd)
    anc = run.ancestor_map()
    tgt = frozenset(targets)
    for hub in _grid(run):
        if origin in anc[hub] and all(bound_guarantee(topo, hub, a) for a in tgt):
            return Broom(hub=hub, origin=origin, targets=tgt)
    return None


def classic_centipede(run: Run, topo: Topology, agents: tuple[int, ...],
                      interval: tuple[int, int]) -> Centipede | None:
    """Even-legged special case: all targets after the first sit at time t'."""
    t, t2 = interval
    if t > t2:
        return None
    targets = (Node(agents[0], t),) + tuple(Node(i, t2) for i in agents[1:])
    return find_uneven_centipede(run, topo, targets)


def classic_broom(run: Run, topo: Topology, origin_agent: int,
                  group: frozenset[int] | set[int],
                  interval: tuple[int, int]) -> Broom | None:
    """Even-legged broom: every group member targeted at time t'."""
    t, t2 = interval
    if t > t2:
        return None
    targets = {Node(i, t2) for i in group}
    return find_uneven_broom(run, topo, Node(origin_agent, t), targets)


def _grid(run: Run) -> list[Node]:
    cached = getattr(run, "_grid_cache", None)
    if cached is None:
        cached = sorted(
            (Node(i, t)
             for i in run.scenario.topology.agents()
             for t in range(run.horizon + 1)),
            key=scan_key)
        run._grid_cache = cached  # type: ignore[attr-defined]
    return cached


def _check_node(run: Run, node: Node) -> None:
    if not 0 <= node.time <= run.horizon:
        raise ValueError(f"node {node} outside horizon 0..{run.horizon}")
    if not 1 <= node.agent <= run.scenario.topology.agent_count:
        raise ValueError(f"node {node} references an unknown agent")
