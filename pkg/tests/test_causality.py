"""Potential causality, cones, early deliveries, bridges, and the finders."""

import itertools

import pytest

from epimc.causality import (classic_broom, classic_centipede,
                             early_delivery_nodes, find_bridge,
                             find_uneven_broom, find_uneven_centipede,
                             is_broom, is_centipede, past_cone,
                             potentially_causes)
from epimc.network import Node, bound_guarantee
from oracles import (brute_broom_exists, brute_centipede_exists,
                     closure_potential_causality)


def test_same_agent_forward(tiny_system):
    run = tiny_system.runs[0]
    assert potentially_causes(run, Node(1, 0), Node(1, 2))
    assert not potentially_causes(run, Node(1, 2), Node(1, 0))


def test_delivery_edge_and_asymmetry(tiny_system):
    run = tiny_system.runs[0]  # relay sent at 0 delivered at 1
    assert potentially_causes(run, Node(1, 0), Node(2, 1))
    assert not potentially_causes(run, Node(2, 1), Node(1, 0))


def test_step_synch_across_agents(pair_system):
    """Cross-agent causality strictly increases time; equal only same-agent."""
    for run in pair_system.runs:
        anc = run.ancestor_map()
        for b, ancestors in anc.items():
            for a in ancestors:
                assert a.time <= b.time
                if a.agent != b.agent:
                    assert a.time < b.time


def test_matches_clause_closure(tiny_system, fig4_system):
    for system in (tiny_system, fig4_system):
        topo = system.scenario.topology
        nodes = [Node(i, t) for i in topo.agents()
                 for t in range(system.scenario.horizon + 1)]
        for run in system.runs:
            closure = closure_potential_causality(run)
            for a in nodes:
                for b in nodes:
                    assert potentially_causes(run, a, b) == ((a, b) in closure)


def test_past_cone_isolated_agent_is_own_line(tiny_system):
    run = tiny_system.runs[-1]  # untriggered: no messages at all
    assert past_cone(run, Node(1, 2)) == {Node(1, 0), Node(1, 1), Node(1, 2)}


def test_past_cone_after_delivery(tiny_system):
    run = tiny_system.runs[0]
    cone = past_cone(run, Node(2, 1))
    assert {Node(1, 0), Node(2, 0), Node(2, 1)} <= cone


def test_past_cone_monotone_on_agent_line(pair_system):
    for run in pair_system.runs[:10]:
        for i in pair_system.scenario.topology.agents():
            prev = frozenset()
            for t in range(run.horizon + 1):
                cone = past_cone(run, Node(i, t))
                assert prev <= cone
                prev = cone


def test_early_delivery_classification(tiny_system):
    for run in tiny_system.runs:
        expected = set()
        for m, d in run.deliveries.items():
            if d is not None and d < m.sent_at + 2:  # single channel, bound 2
                expected.add(Node(m.dst, d))
        assert early_delivery_nodes(run) == expected
    all_latest = [r for r in tiny_system.runs
                  if r.trigger_occurrence and not early_delivery_nodes(r)]
    assert all_latest, "some triggered run delivers everything at the deadline"


def test_bridges_exist_on_every_gap(fig3_system):
    """Wherever causality outruns the guarantee, an early-delivery bridge sits
    between them."""
    topo = fig3_system.scenario.topology
    checked = 0
    for run in fig3_system.runs:
        anc = run.ancestor_map()
        early = early_delivery_nodes(run)
        for b, ancestors in anc.items():
            for a in ancestors:
                if a != b and not bound_guarantee(topo, a, b):
                    beta = find_bridge(run, topo, a, b)
                    checked += 1
                    assert beta is not None
                    assert beta in early
                    assert potentially_causes(run, a, beta)
                    assert bound_guarantee(topo, beta, b)
    assert checked > 0


def test_trivial_centipede_for_adjacent_targets(tiny_system):
    run = tiny_system.runs[0]
    w = find_uneven_centipede(run, tiny_system.scenario.topology,
                              (Node(1, 0), Node(2, 1)))
    assert w is not None
    assert w.spine == (Node(1, 0), Node(2, 1))


def test_fig3_uneven_centipede_found(fig3_system):
    """The outer knower's node precedes the middle target in time, and the
    witness spine passes through the relay."""
    topo = fig3_system.scenario.topology
    targets = (Node(1, 0), Node(4, 4), Node(3, 2))
    witnesses = [(r, find_uneven_centipede(r, topo, targets))
                 for r in fig3_system.runs]
    found = [(r, w) for r, w in witnesses if w is not None]
    assert found
    run, w = found[0]
    assert w.targets[2].time < w.targets[1].time  # uneven: later leg listed earlier
    assert w.spine[1] == Node(2, 1)
    assert is_centipede(run, topo, w.spine, w.targets)


def test_no_chain_means_absent(tiny_system):
    run = tiny_system.runs[-1]  # untriggered: no messages
    topo = tiny_system.scenario.topology
    assert find_uneven_centipede(run, topo, (Node(1, 0), Node(2, 2))) is None


def test_checker_validates_and_rejects(tiny_system):
    run = tiny_system.runs[0]
    topo = tiny_system.scenario.topology
    targets = (Node(1, 0), Node(2, 1))
    w = find_uneven_centipede(run, topo, targets)
    assert is_centipede(run, topo, w.spine, w.targets)
    # break the causal chain
    assert not is_centipede(run, topo, (Node(1, 0), Node(2, 0)),
                            (Node(1, 0), Node(2, 0)))
    with pytest.raises(ValueError):
        is_centipede(run, topo, (Node(1, 0),), targets)


def test_checker_rejects_failed_guarantee(fig3_system):
    topo = fig3_system.scenario.topology
    run = next(r for r in fig3_system.runs if r.trigger_occurrence)
    spine = (Node(1, 0), Node(1, 0), Node(3, 2))
    targets = (Node(1, 0), Node(4, 4), Node(3, 2))
    # agent 1 cannot guarantee agent 4 by time 4 (distance 5), so this spine
    # must be rejected even when the chain holds.
    assert not is_centipede(run, topo, spine, targets)


def test_broom_single_target_matches_exhaustive_scan(tiny_system):
    topo = tiny_system.scenario.topology
    for run in tiny_system.runs:
        for t in range(run.horizon + 1):
            target = Node(2, t)
            found = find_uneven_broom(run, topo, Node(1, 0), {target})
            assert (found is not None) == brute_broom_exists(
                run, topo, Node(1, 0), {target})
            if found is not None:
                assert is_broom(run, topo, found)


def test_fig4_relay_hub_found(fig4_system):
    """When both leaves must be reached by time 2, only the center's early
    arrival node qualifies as the hub."""
    topo = fig4_system.scenario.topology
    targets = frozenset({Node(3, 2), Node(4, 2)})
    runs_with_early_relay = [
        r for r in fig4_system.runs
        if any(m.src == 1 and d == 1 for m, d in r.deliveries.items())]
    assert runs_with_early_relay
    w = find_uneven_broom(runs_with_early_relay[0], topo, Node(1, 0), targets)
    assert w is not None
    assert w.hub == Node(2, 1)


def test_broom_absent_when_target_unreachable(fig4_system):
    topo = fig4_system.scenario.topology
    run = next(r for r in fig4_system.runs if r.trigger_occurrence)
    # No candidate can guarantee agent 3 by time 0.
    assert find_uneven_broom(run, topo, Node(1, 0), {Node(3, 0)}) is None


def test_broom_absence_matches_exhaustive_scan(fig4_system):
    topo = fig4_system.scenario.topology
    grid = [Node(i, t) for i in topo.agents() for t in range(3)]
    run = next(r for r in fig4_system.runs if r.trigger_occurrence)
    for pair in itertools.combinations(grid, 2):
        found = find_uneven_broom(run, topo, Node(1, 0), set(pair))
        assert (found is not None) == brute_broom_exists(run, topo, Node(1, 0), set(pair))


def test_centipede_absence_matches_exhaustive_scan(fig3_system):
    topo = fig3_system.scenario.topology
    run = next(r for r in fig3_system.runs if r.trigger_occurrence)
    grid = [Node(i, t) for i in topo.agents() for t in range(0, run.horizon + 1, 2)]
    for a1 in grid:
        for a2 in grid:
            targets = (Node(1, 0), a1, a2)
            found = find_uneven_centipede(run, topo, targets)
            assert (found is not None) == brute_centipede_exists(run, topo, targets)


def test_classic_wrappers_specialize_the_uneven_finders(fig4_system):
    topo = fig4_system.scenario.topology
    run = next(r for r in fig4_system.runs if r.trigger_occurrence)
    classic = classic_centipede(run, topo, (1, 2, 3), (0, 4))
    uneven = find_uneven_centipede(run, topo, (Node(1, 0), Node(2, 4), Node(3, 4)))
    assert (classic is None) == (uneven is None)
    if classic is not None:
        assert classic == uneven
    cb = classic_broom(run, topo, 1, {3, 4}, (0, 4))
    ub = find_uneven_broom(run, topo, Node(1, 0), {Node(3, 4), Node(4, 4)})
    assert cb == ub


def test_classic_empty_interval_absent(fig4_system):
    topo = fig4_system.scenario.topology
    run = fig4_system.runs[0]
    assert classic_centipede(run, topo, (1, 2), (3, 1)) is None
    assert classic_broom(run, topo, 1, {2}, (3, 1)) is None
