"""Coordination instances, verifiers, bounded-node arithmetic, and policies."""

import pytest

from epimc.coordination import (CoordinationInstance, FixedSchedulePolicy,
                                InstanceError, Kind, PolicyError, Response,
                                beta_node, make_broom_policy,
                                make_chain_policy, response_nodes, solves)
from epimc.network import Node, Topology
from epimc.runs import Action, ScenarioSpec, Trigger, enumerate_runs
from conftest import load_case


def test_instance_validation():
    r = (Response(1, "a"), Response(2, "b"))
    with pytest.raises(InstanceError):
        CoordinationInstance(Kind.WTR, "es", r, ())  # needs k-1 deltas
    with pytest.raises(InstanceError):
        CoordinationInstance(Kind.TTR, "es", r, (1,))  # needs k deltas
    with pytest.raises(InstanceError):
        CoordinationInstance(Kind.OR, "es", r, (1,))  # takes none
    with pytest.raises(InstanceError):
        CoordinationInstance(Kind.SR, "es", ())  # at least one response
    with pytest.raises(InstanceError):
        CoordinationInstance(Kind.OR, "es", (Response(1, "a"), Response(2, "a")))


def test_response_nodes_absent_in_untriggered_runs(wtr_case):
    system, inst = wtr_case
    run = next(r for r in system.runs if r.trigger_occurrence is None)
    assert response_nodes(run, inst) is None


def test_response_nodes_follow_the_relay(wtr_case):
    """Signer acts on hearing; deliverer waits out the two-round gap."""
    system, inst = wtr_case
    for run in system.runs:
        if run.trigger_occurrence is None:
            continue
        sign, deliver = response_nodes(run, inst)
        assert sign == Node(2, 1)  # unit-bound channel from the trigger agent
        # every relay sent at or after the signing carries the news; the
        # policy reacts to whichever lands first
        heard = min(d for m, d in run.deliveries.items()
                    if m.src == 2 and m.dst == 3 and m.sent_at >= sign.time
                    and d is not None)
        assert deliver == Node(3, max(heard, sign.time + 2))


def test_duplicate_response_occurrence_is_a_policy_bug():
    topo = Topology.of(2, [(1, 2, 1)])
    policy = FixedSchedulePolicy(rows=((2, "a", 1), (2, "a", 2)))
    inst = CoordinationInstance(Kind.OR, "es", (Response(2, "a"),))
    system = enumerate_runs(ScenarioSpec(topo, 3, Trigger("es", 1, (0, 0)), policy=policy))
    with pytest.raises(PolicyError):
        response_nodes(system.runs[0], inst)


def test_solved_wtr_also_solves_ordered_variant(wtr_case):
    system, inst = wtr_case
    assert solves(system, inst).solved
    ordered = CoordinationInstance(Kind.OR, inst.trigger, inst.responses)
    assert solves(system, ordered).solved


def test_wtr_naive_policy_fails_only_on_fast_news():
    """Without the wait rule the gap is violated exactly when the news of the
    predecessor's action arrives early."""
    loaded, system = load_case("wtr_chain")
    inst = loaded.instance
    topo = loaded.spec.topology
    naive = make_chain_policy(topo, inst, trigger_agent=1, waits=False)
    naive_system = enumerate_runs(
        ScenarioSpec(topo, loaded.spec.horizon, loaded.spec.trigger, policy=naive))
    verdict = solves(naive_system, inst)
    assert not verdict.solved
    assert verdict.counterexample.clause == 2
    # the latest-delivery runs still satisfy the gap, so the violation is an
    # early-delivery phenomenon
    ok_runs = []
    for run in naive_system.runs:
        if run.trigger_occurrence is None:
            continue
        nodes = response_nodes(run, inst)
        if nodes and nodes[1].time >= nodes[0].time + inst.deltas[0]:
            ok_runs.append(run.run_id)
    assert ok_runs


def test_schedule_policy_fires_in_untriggered_runs():
    topo = Topology.of(2, [(1, 2, 1)])
    policy = FixedSchedulePolicy(rows=((2, "a", 1),))
    inst = CoordinationInstance(Kind.OR, "es", (Response(2, "a"),))
    system = enumerate_runs(ScenarioSpec(
        topo, 3, Trigger("es", 1, (0, 0), may_be_absent=True), policy=policy))
    verdict = solves(system, inst)
    assert not verdict.solved
    assert verdict.counterexample.clause == 1


def test_sr_equals_zero_delta_ttr(case):
    loaded, system = case("sr_broom")
    sr = loaded.instance
    ttr0 = CoordinationInstance(Kind.TTR, sr.trigger, sr.responses,
                                (0,) * len(sr.responses))
    v1, v2 = solves(system, sr), solves(system, ttr0)
    assert v1.solved == v2.solved
    # and on a failing system the verdicts point at the same run and clause
    topo = loaded.spec.topology
    skew = FixedSchedulePolicy(rows=((3, "ack", 2), (4, "fire", 3)))
    bad = enumerate_runs(ScenarioSpec(
        topo, loaded.spec.horizon, loaded.spec.trigger, policy=skew))
    b1, b2 = solves(bad, sr), solves(bad, ttr0)
    assert not b1.solved and not b2.solved
    assert (b1.counterexample.run_id, b1.counterexample.clause) == \
           (b2.counterexample.run_id, b2.counterexample.clause)


def test_beta_node_direct_substitution():
    inst = CoordinationInstance(
        Kind.WTR, "es",
        (Response(1, "a1"), Response(2, "a2"), Response(3, "a3")), (2, 3))
    assert beta_node(inst, 2, 10) == Node(2, 7)
    assert beta_node(inst, 1, 10) == Node(1, 5)
    assert beta_node(inst, 3, 10) == Node(3, 10)  # empty sum at h = k


def test_beta_node_negative_time_rejected():
    inst = CoordinationInstance(Kind.WTR, "es",
                                (Response(1, "a1"), Response(2, "a2")), (5,))
    with pytest.raises(InstanceError):
        beta_node(inst, 1, 3)
    with pytest.raises(InstanceError):
        beta_node(inst, 0, 3)


def test_beta_bound_grows_with_later_final_response():
    """Extending the chain by one response moves every bound weakly later."""
    responses = tuple(Response(i, f"a{i}") for i in (1, 2, 3))
    deltas = (2, 3)
    prefix = CoordinationInstance(Kind.WTR, "es", responses[:2], deltas[:1])
    full = CoordinationInstance(Kind.WTR, "es", responses, deltas)
    for t_k in range(6, 12):
        for t_k1 in range(t_k + deltas[1], 14):
            for h in (1, 2):
                assert beta_node(prefix, h, t_k).time <= beta_node(full, h, t_k1).time


def test_beta_is_an_upper_bound_in_solved_systems(wtr_case):
    system, inst = wtr_case
    assert solves(system, inst).solved
    k = len(inst.responses)
    for run in system.runs:
        if run.trigger_occurrence is None:
            continue
        nodes = response_nodes(run, inst)
        t_k = nodes[-1].time
        for h in range(1, k + 1):
            assert nodes[h - 1].time <= beta_node(inst, h, t_k).time


def test_broom_policy_simultaneous_star():
    topo = Topology.of(4, [(1, 2, 1), (2, 3, 1), (2, 4, 1)])
    inst = CoordinationInstance(Kind.SR, "es", (Response(3, "a"), Response(4, "b")))
    policy = make_broom_policy(topo, inst, hub=2, trigger_agent=1,
                               window_end=1, horizon=5)
    system = enumerate_runs(ScenarioSpec(
        topo, 5, Trigger("es", 1, (0, 1), may_be_absent=True), policy=policy))
    assert solves(system, inst).solved
    for run in system.runs:
        if run.trigger_occurrence is None:
            continue
        nodes = response_nodes(run, inst)
        assert nodes[0].time == nodes[1].time == run.trigger_occurrence.time + 2


def test_broom_policy_exact_stagger(ttr_case):
    system, inst = ttr_case
    assert solves(system, inst).solved
    for run in system.runs:
        if run.trigger_occurrence is None:
            continue
        ack, fire = response_nodes(run, inst)
        assert fire.time - ack.time == inst.deltas[1] - inst.deltas[0] == 3


def test_broom_policy_unreachable_responder():
    topo = Topology.of(3, [(1, 2, 1)])
    inst = CoordinationInstance(Kind.SR, "es", (Response(3, "a"),))
    with pytest.raises(PolicyError):
        make_broom_policy(topo, inst, hub=2, trigger_agent=1, window_end=0, horizon=9)


def test_broom_policy_infeasible_horizon():
    topo = Topology.of(3, [(1, 2, 3), (2, 3, 3)])
    inst = CoordinationInstance(Kind.SR, "es", (Response(3, "a"),))
    with pytest.raises(PolicyError):
        make_broom_policy(topo, inst, hub=2, trigger_agent=1, window_end=2, horizon=4)


def test_chain_policy_two_agent_ordered():
    topo = Topology.of(2, [(1, 2, 2)])
    inst = CoordinationInstance(Kind.OR, "es", (Response(2, "go"),))
    policy = make_chain_policy(topo, inst, trigger_agent=1)
    system = enumerate_runs(ScenarioSpec(
        topo, 4, Trigger("es", 1, (0, 1), may_be_absent=True), policy=policy))
    assert solves(system, inst).solved


def test_chain_policy_unreachable_link():
    topo = Topology.of(3, [(1, 2, 1)])
    inst = CoordinationInstance(Kind.OR, "es", (Response(2, "a"), Response(3, "b")))
    with pytest.raises(PolicyError):
        make_chain_policy(topo, inst, trigger_agent=1)


def test_policies_are_deterministic_functions_of_state(wtr_case, ttr_case):
    """Equal pre-action states across runs always produce equal action sets,
    and the recorded actions match what the policy computes."""
    for system, _ in (wtr_case, ttr_case):
        policy = system.scenario.policy
        seen: dict = {}
        for run in system.runs:
            for i in system.scenario.topology.agents():
                for t in range(run.horizon + 1):
                    state = run.local_state(Node(i, t))
                    log = state.observation_log
                    if log and log[-1][0] == t:
                        pre_events = tuple(e for e in log[-1][1]
                                           if e[0] not in ("act", "send"))
                        pre = log[:-1] + ((t, pre_events),) if pre_events else log[:-1]
                    else:
                        pre = log
                    pre_state = type(state)(i, t, pre)
                    acts = frozenset(policy.actions(pre_state))
                    recorded = frozenset(
                        ev.label for ev in run.events.get(Node(i, t), ())
                        if isinstance(ev, Action))
                    assert acts == recorded
                    key = (i, t, pre)
                    if key in seen:
                        assert seen[key] == acts
                    else:
                        seen[key] = acts
