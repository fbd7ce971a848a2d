"""Theorem sweeps: pass/fail behavior, anti-vacuity, mutation self-test."""

import pytest

from epimc.coordination import (CoordinationInstance, Kind, Response,
                                make_chain_policy)
from epimc.harness import (check_ck_gain, check_classic_gain,
                           check_logic_lemmas, check_nested_gain,
                           check_ttr_theorem, check_wtr_theorem,
                           run_mutation_selftest)
from epimc.logic import ck_fixpoint, OccurredBy
from epimc.network import Node, Topology
from epimc.runs import ScenarioSpec, Trigger, enumerate_runs
from conftest import load_case


def test_nested_gain_single_agent_spontaneous():
    topo = Topology.of(1, [])
    system = enumerate_runs(ScenarioSpec(
        topo, 3, Trigger("es", 1, (0, 1), may_be_absent=True)))
    report = check_nested_gain(system, 3)
    assert report.result == "pass"
    assert report.non_vacuous > 0


@pytest.mark.parametrize("name", ["pair", "ring3", "fig3_centipede", "fig4_broom"])
def test_gain_suites_pass_non_vacuously(name):
    _, system = load_case(name)
    for check in (lambda s: check_nested_gain(s, 2),
                  lambda s: check_ck_gain(s, 2),
                  lambda s: check_classic_gain(s, 2, 2)):
        report = check(system)
        assert report.result == "pass", report.to_lines()
        assert report.non_vacuous > 0


def test_nested_gain_vacuous_when_never_triggered():
    topo = Topology.of(2, [(1, 2, 1)])
    system = enumerate_runs(ScenarioSpec(
        topo, 2, Trigger("es", 1, (1, 0), may_be_absent=True)))
    report = check_nested_gain(system, 2)
    assert report.result == "vacuous"
    assert not report.acceptable


def test_ck_antecedent_false_for_pre_trigger_sets():
    topo = Topology.of(2, [(1, 2, 1)])
    system = enumerate_runs(ScenarioSpec(
        topo, 4, Trigger("es", 1, (2, 2), may_be_absent=True)))
    # A node before the window can never know the trigger atom at its time.
    assert not ck_fixpoint(system, {Node(2, 0)}, OccurredBy(0, "es"))


def test_wtr_theorem_passes(wtr_case):
    system, inst = wtr_case
    report = check_wtr_theorem(system, inst)
    assert report.result == "pass"
    assert report.non_vacuous == sum(1 for r in system.runs if r.trigger_occurrence)


def test_wtr_theorem_reports_unsolved_precondition():
    loaded, _ = load_case("wtr_chain")
    naive = make_chain_policy(loaded.spec.topology, loaded.instance,
                              trigger_agent=1, waits=False)
    system = enumerate_runs(ScenarioSpec(
        loaded.spec.topology, loaded.spec.horizon, loaded.spec.trigger, policy=naive))
    report = check_wtr_theorem(system, loaded.instance)
    assert report.result == "precondition-failed"
    assert not report.violations


def test_wtr_theorem_single_response_degenerates_to_plain_knowledge():
    topo = Topology.of(2, [(1, 2, 2)])
    inst = CoordinationInstance(Kind.WTR, "es", (Response(2, "go"),))
    policy = make_chain_policy(topo, inst, trigger_agent=1)
    system = enumerate_runs(ScenarioSpec(
        topo, 4, Trigger("es", 1, (0, 1), may_be_absent=True), policy=policy))
    report = check_wtr_theorem(system, inst)
    assert report.result == "pass"


def test_ttr_theorem_passes_with_stagger(ttr_case):
    system, inst = ttr_case
    report = check_ttr_theorem(system, inst)
    assert report.result == "pass"
    assert report.non_vacuous > 0


def test_ttr_theorem_sr_common_time(case):
    """With zero offsets the node set sits at one common time and the
    embedded agent-based common knowledge holds there too."""
    from epimc.coordination import response_nodes, solves
    from epimc.logic import CommonKnowledge, Occurred, eval_l0, timestamp, eval_l1

    loaded, system = case("sr_broom")
    inst = loaded.instance
    assert solves(system, inst).solved
    report = check_ttr_theorem(system, CoordinationInstance(
        Kind.TTR, inst.trigger, inst.responses, (0,) * len(inst.responses)))
    assert report.result == "pass"
    f = CommonKnowledge(frozenset({3, 4}), Occurred("es"))
    for run in system.runs:
        if run.trigger_occurrence is None:
            continue
        nodes = response_nodes(run, inst)
        common_time = nodes[0].time
        assert all(nd.time == common_time for nd in nodes)
        assert eval_l0(system, run, common_time, f)
        assert eval_l1(system, run, timestamp(f, common_time))


def test_induction_rule_reproduces_the_tight_coordination_step(ttr_case):
    """The proof of the tight-coordination theorem instantiates the induction
    rule with the response-action atom and the stamped trigger atom over the
    realized response nodes; both the premise and the conclusion hold here."""
    from epimc.coordination import response_nodes
    from epimc.logic import And, NodeEveryone, OccurredBy, runs_satisfying

    system, inst = ttr_case
    run = next(r for r in system.runs if r.trigger_occurrence)
    nodes = response_nodes(run, inst)
    node_set = frozenset(nodes)
    earliest = min(nd.time for nd in nodes)
    phi = OccurredBy(nodes[0].time, inst.responses[0].action)
    psi = OccurredBy(earliest, inst.trigger)
    phi_runs = runs_satisfying(system, phi)
    assert phi_runs, "the action atom is satisfiable"
    premise = runs_satisfying(system, NodeEveryone(node_set, And(phi, psi)))
    assert phi_runs <= premise
    assert phi_runs <= ck_fixpoint(system, node_set, psi)


def test_logic_lemmas_zero_violations(case):
    for name in ("pair", "fig4_broom"):
        _, system = case(name)
        report = check_logic_lemmas(system)
        assert report.result == "pass", report.to_lines()
        for fam, (_, non_vacuous) in report.families.items():
            assert non_vacuous > 0, fam


def test_report_serialization_is_deterministic(fig4_system):
    a = check_ck_gain(fig4_system, 2).to_lines()
    b = check_ck_gain(fig4_system, 2).to_lines()
    assert a == b
    assert a[0] == "== ck-knowledge-gain"
    assert a[-1] == "result: pass"


def test_every_mutation_flips_a_report(fig3_system, fig4_system, wtr_case, ttr_case):
    results = run_mutation_selftest(fig3_system, fig4_system, wtr_case, ttr_case)
    assert len(results) == 6
    for name, flipped, violations in results:
        assert flipped, f"mutation {name} went unnoticed"
        assert violations > 0
