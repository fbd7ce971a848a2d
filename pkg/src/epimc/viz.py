"""Diagram export: DOT text and matplotlib figures of a run's node grid.

Both views draw agents as horizontal timelines with solid arrows for actual
message deliveries. When a centipede or broom witness is supplied, its
guarantee legs are drawn dashed and the spine or hub nodes are double-ringed,
mirroring the usual causal-structure diagrams.
"""

from __future__ import annotations

from .causality import Broom, Centipede
from .network import Node
from .runs import Run

Structure = Centipede | Broom | None


def _structure_parts(structure: Structure) -> tuple[set[Node], list[tuple[Node, Node]]]:
    """(highlighted nodes, dashed guarantee edges) for a witness."""
    if structure is None:
        return set(), []
    if isinstance(structure, Centipede):
        highlighted = set(structure.spine)
        dashed = [(structure.spine[h], structure.targets[h])
                  for h in range(1, len(structure.spine) - 1)
                  if structure.spine[h] != structure.targets[h]]
        return highlighted, dashed
    highlighted = {structure.hub}
    dashed = [(structure.hub, tgt) for tgt in sorted(structure.targets)
              if structure.hub != tgt]
    return highlighted, dashed


def run_to_dot(run: Run, structure: Structure = None) -> str:
    """Graphviz text for the node grid of one run.

    Agents are rows (dotted timeline edges), time columns share a rank,
    deliveries are solid edges, witness guarantees dashed, and witness nodes
    use a double circle. The trigger node is drawn bold.
    """
    topo = run.scenario.topology
    horizon = run.horizon
    highlighted, dashed = _structure_parts(structure)
    lines = ["digraph run {", "  rankdir=LR;", '  node [shape=circle, fontsize=10];']
    for nd in sorted((Node(i, t) for i in topo.agents() for t in range(horizon + 1))):
        attrs = []
        if nd in highlighted:
            attrs.append("shape=doublecircle")
        if run.trigger_occurrence == nd:
            attrs.append("style=bold")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f'  "{nd}"{suffix};')
    for t in range(horizon + 1):
        same = " ".join(f'"{Node(i, t)}"' for i in topo.agents())
        lines.append(f"  {{ rank=same; {same} }}")
    for i in topo.agents():
        for t in range(horizon):
            lines.append(f'  "{Node(i, t)}" -> "{Node(i, t + 1)}" '
                         f"[style=dotted, color=gray, arrowhead=none];")
    for m, d in sorted(run.deliveries.items()):
        if d is not None:
            lines.append(f'  "{Node(m.src, m.sent_at)}" -> "{Node(m.dst, d)}";')
    for src, dst in dashed:
        lines.append(f'  "{src}" -> "{dst}" [style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_run_figure(run: Run, path: str, structure: Structure = None) -> None:
    """Render the same diagram with matplotlib and save it to `path`."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    topo = run.scenario.topology
    horizon = run.horizon
    highlighted, dashed = _structure_parts(structure)

    fig, ax = plt.subplots(figsize=(1.2 * (horizon + 2), 0.9 * (topo.agent_count + 1)))
    for i in topo.agents():
        ax.plot([0, horizon], [i, i], color="0.85", lw=1, zorder=1)
    for nd in (Node(i, t) for i in topo.agents() for t in range(horizon + 1)):
        ring = 2.4 if nd in highlighted else 1.0
        ax.scatter([nd.time], [nd.agent], s=160, facecolor="white",
                   edgecolor="black", linewidths=ring, zorder=3)
        if nd in highlighted:
            ax.scatter([nd.time], [nd.agent], s=320, facecolor="none",
                       edgecolor="black", linewidths=1.0, zorder=3)
        if run.trigger_occurrence == nd:
            ax.scatter([nd.time], [nd.agent], marker="*", s=90,
                       color="black", zorder=4)
    arrow = dict(arrowstyle="-|>", color="black", lw=1.4,
                 shrinkA=9, shrinkB=9)
    for m, d in sorted(run.deliveries.items()):
        if d is not None:
            ax.annotate("", xy=(d, m.dst), xytext=(m.sent_at, m.src),
                        arrowprops=arrow, zorder=2)
    dash = dict(arrowstyle="-|>", color="tab:blue", lw=1.2,
                linestyle="--", shrinkA=9, shrinkB=9)
    for src, dst in dashed:
        ax.annotate("", xy=(dst.time, dst.agent), xytext=(src.time, src.agent),
                    arrowprops=dash, zorder=2)
    ax.set_xlim(-0.6, horizon + 0.6)
    ax.set_ylim(topo.agent_count + 0.7, 0.3)
    ax.set_xticks(range(horizon + 1))
    ax.set_yticks(list(topo.agents()))
    ax.set_xlabel("time")
    ax.set_ylabel("agent")
    ax.set_title(f"run {run.run_id}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
