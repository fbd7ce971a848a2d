"""DOT and figure export."""

from epimc.causality import find_uneven_broom, find_uneven_centipede
from epimc.network import Node
from epimc.viz import render_run_figure, run_to_dot


def test_dot_contains_grid_and_delivery_edges(tiny_system):
    run = tiny_system.runs[0]
    dot = run_to_dot(run)
    assert dot.startswith("digraph run {")
    assert '"1@0"' in dot and '"2@2"' in dot
    assert '"1@0" -> "2@1";' in dot  # the early delivery
    assert "rank=same" in dot


def test_dot_marks_witness_structure(fig3_system):
    topo = fig3_system.scenario.topology
    targets = (Node(1, 0), Node(4, 4), Node(3, 2))
    run, witness = next(
        (r, w) for r in fig3_system.runs
        for w in [find_uneven_centipede(r, topo, targets)] if w is not None)
    dot = run_to_dot(run, witness)
    assert '"2@1" [shape=doublecircle]' in dot
    assert '"2@1" -> "4@4" [style=dashed];' in dot


def test_dot_marks_broom_hub(fig4_system):
    topo = fig4_system.scenario.topology
    targets = frozenset({Node(3, 4), Node(4, 5)})
    run = next(r for r in fig4_system.runs if r.trigger_occurrence)
    witness = find_uneven_broom(run, topo, Node(1, 0), targets)
    dot = run_to_dot(run, witness)
    assert "doublecircle" in dot
    assert "[style=dashed];" in dot


def test_dot_is_deterministic(tiny_system):
    run = tiny_system.runs[0]
    assert run_to_dot(run) == run_to_dot(run)


def test_figure_renders_to_file(tmp_path, fig3_system):
    topo = fig3_system.scenario.topology
    targets = (Node(1, 0), Node(4, 4), Node(3, 2))
    run = fig3_system.runs[0]
    witness = find_uneven_centipede(run, topo, targets)
    out = tmp_path / "run.png"
    render_run_figure(run, str(out), witness)
    assert out.exists() and out.stat().st_size > 1000
