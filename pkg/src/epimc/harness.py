"""Empirical verification of the knowledge-gain and coordination theorems.

Each check sweeps every antecedent instance of one theorem over an enumerated
system and records any instance where the claimed structure or formula fails
to materialize. A passing sweep with zero antecedent-true instances proves
nothing, so reports carry the antecedent-true count and flag vacuous passes;
the CLI treats those as failures.

The sweeps take their finders and evaluation primitives as injectable
parameters so the mutation self-test can corrupt exactly one seam at a time
and confirm the checks would notice.
"""

from __future__ import annotations

import itertools
import time as _time
from dataclasses import dataclass, field

from .causality import (classic_broom, classic_centipede,
                        find_uneven_broom, find_uneven_centipede, is_broom,
                        is_centipede)
from .coordination import (CoordinationInstance, beta_node, response_nodes,
                           solves)
from .logic import (And, CommonKnowledge, EveryoneKnows, Evaluator, Knows,
                    Not, Occurred, OccurredBy, NodeKnows, get_evaluator,
                    timestamp)
from .network import Node, scan_key
from .runs import Action, ExternalInput, System


@dataclass(frozen=True)
class ViolationRecord:
    run_id: int
    description: str

    def to_line(self) -> str:
        return f"violation: run {self.run_id}: {self.description}"


@dataclass
class TheoremReport:
    """Outcome of one theorem sweep: instance counts plus any violations."""

    theorem: str
    instances: int = 0
    non_vacuous: int = 0
    violations: list[ViolationRecord] = field(default_factory=list)
    elapsed: float = 0.0
    notes: dict[str, str] = field(default_factory=dict)
    families: dict[str, tuple[int, int]] = field(default_factory=dict)
    precondition_failure: str | None = None

    @property
    def vacuous(self) -> bool:
        return self.non_vacuous == 0

    @property
    def result(self) -> str:
        if self.precondition_failure is not None:
            return "precondition-failed"
        if self.violations:
            return "fail"
        if self.vacuous:
            return "vacuous"
        return "pass"

    @property
    def acceptable(self) -> bool:
        return self.result == "pass"

    def to_lines(self) -> list[str]:
        """Deterministic serialization; elapsed time deliberately excluded."""
        lines = [f"== {self.theorem}",
                 f"instances: {self.instances}",
                 f"antecedent-true: {self.non_vacuous}",
                 f"violations: {len(self.violations)}"]
        lines.extend(v.to_line() for v in self.violations)
        for name in sorted(self.families):
            checked, nv = self.families[name]
            lines.append(f"family {name}: instances={checked} non_vacuous={nv}")
        for key in sorted(self.notes):
            lines.append(f"note {key}: {self.notes[key]}")
        if self.precondition_failure is not None:
            lines.append(f"precondition: {self.precondition_failure}")
        lines.append(f"result: {self.result}")
        return lines


def _grid(system: System) -> list[Node]:
    topo = system.scenario.topology
    return sorted((Node(i, t) for i in topo.agents()
                   for t in range(system.scenario.horizon + 1)), key=scan_key)


def _trigger_groups(system: System) -> list[tuple[Node, int]]:
    """(trigger node, run mask) per occurrence time, ascending; untriggered
    runs are excluded since every theorem antecedent assumes the trigger."""
    groups: dict[Node, int] = {}
    for r in system.runs:
        if r.trigger_occurrence is not None:
            groups[r.trigger_occurrence] = groups.get(r.trigger_occurrence, 0) | (1 << r.run_id)
    return sorted(groups.items(), key=lambda kv: kv[0].time)


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _default_knows(ev: Evaluator, node: Node, mask: int) -> int:
    return ev.knows_mask(node, mask)


def _default_ck(ev: Evaluator, nodes: frozenset[Node], mask: int) -> int:
    return ev.ck_mask(nodes, mask)


# --- knowledge-gain sweeps -----------------------------------------------------

def check_nested_gain(system: System, max_chain_len: int = 3, *,
                      finder=find_uneven_centipede,
                      knows_fn=_default_knows) -> TheoremReport:
    """Nested node-knowledge of the trigger implies an uneven centipede.

    For every triggered run and every node sequence alpha_1..alpha_k up to
    the chain cap: when the run satisfies the fully nested knowledge of the
    trigger (innermost operator at the trigger node itself), the centipede
    finder must produce a witness for (trigger node, alpha_1..alpha_k).
    """
    start = _time.monotonic()
    ev = get_evaluator(system)
    topo = system.scenario.topology
    label = system.scenario.trigger.label
    grid = _grid(system)
    report = TheoremReport("nested-knowledge-gain")

    for alpha0, group_mask in _trigger_groups(system):
        group_size = group_mask.bit_count()
        base = knows_fn(ev, alpha0, ev.atom_mask(label, alpha0.time))

        def sweep(depth: int, seq: tuple[Node, ...], mask: int) -> None:
            for alpha in grid:
                outer = knows_fn(ev, alpha, mask)
                seq2 = seq + (alpha,)
                report.instances += group_size
                hits = outer & group_mask
                report.non_vacuous += hits.bit_count()
                for rid in _bits(hits):
                    run = system.runs[rid]
                    targets = (alpha0,) + seq2
                    witness = finder(run, topo, targets)
                    if witness is None:
                        report.violations.append(ViolationRecord(
                            rid, f"no uneven centipede for targets "
                                 f"{' '.join(map(str, targets))}"))
                    elif not is_centipede(run, topo, witness.spine, witness.targets):
                        report.violations.append(ViolationRecord(
                            rid, f"finder returned an invalid centipede for "
                                 f"{' '.join(map(str, targets))}"))
                if depth < max_chain_len:
                    sweep(depth + 1, seq2, outer)

        sweep(1, (), base)
    report.elapsed = _time.monotonic() - start
    return report


def check_ck_gain(system: System, max_set_size: int = 3, *,
                  finder=find_uneven_broom,
                  ck_fn=_default_ck) -> TheoremReport:
    """Node-based common knowledge of the trigger implies an uneven broom.

    Checked with the trigger atom stamped at the earliest node of the set
    (the variant the tight-coordination proof uses); the latest-node variant
    is additionally evaluated and its outcome recorded in the notes.
    """
    start = _time.monotonic()
    ev = get_evaluator(system)
    topo = system.scenario.topology
    label = system.scenario.trigger.label
    grid = _grid(system)
    report = TheoremReport("ck-knowledge-gain")
    latest_hits = 0
    latest_violations = 0

    for alpha0, group_mask in _trigger_groups(system):
        group_size = group_mask.bit_count()
        for size in range(1, max_set_size + 1):
            for combo in itertools.combinations(grid, size):
                nodes = frozenset(combo)
                t_earliest = min(nd.time for nd in nodes)
                mask = ck_fn(ev, nodes, ev.atom_mask(label, t_earliest))
                report.instances += group_size
                hits = mask & group_mask
                report.non_vacuous += hits.bit_count()
                for rid in _bits(hits):
                    run = system.runs[rid]
                    witness = finder(run, topo, alpha0, nodes)
                    if witness is None:
                        report.violations.append(ViolationRecord(
                            rid, f"no uneven broom for origin {alpha0} targets "
                                 f"{' '.join(map(str, sorted(nodes)))}"))
                    elif not is_broom(run, topo, witness):
                        report.violations.append(ViolationRecord(
                            rid, f"finder returned an invalid broom for origin {alpha0}"))
                t_latest = max(nd.time for nd in nodes)
                if t_latest != t_earliest:
                    lmask = ck_fn(ev, nodes, ev.atom_mask(label, t_latest)) & group_mask
                    latest_hits += lmask.bit_count()
                    for rid in _bits(lmask):
                        if finder(system.runs[rid], topo, alpha0, nodes) is None:
                            latest_violations += 1
    report.notes["latest-variant"] = (
        f"antecedent-true={latest_hits} violations={latest_violations}")
    report.elapsed = _time.monotonic() - start
    return report


def check_classic_gain(system: System, max_chain_len: int = 3,
                       max_set_size: int = 3, *,
                       centipede_finder=classic_centipede,
                       broom_finder=classic_broom,
                       knows_fn=_default_knows,
                       ck_fn=_default_ck) -> TheoremReport:
    """Agent-based knowledge/common-knowledge gain implies the even-legged
    structures: nested knowledge a centipede, common knowledge a broom, both
    in the interval from the trigger time to the evaluation time."""
    start = _time.monotonic()
    ev = get_evaluator(system)
    topo = system.scenario.topology
    label = system.scenario.trigger.label
    agents = list(topo.agents())
    horizon = system.scenario.horizon
    report = TheoremReport("classic-knowledge-gain")
    cent_counts = [0, 0]
    broom_counts = [0, 0]

    for alpha0, group_mask in _trigger_groups(system):
        group_size = group_mask.bit_count()
        i0, t0 = alpha0.agent, alpha0.time
        for t2 in range(t0, horizon + 1):
            base = knows_fn(ev, Node(i0, t2), ev.atom_mask(label, t2))
            layers: list[tuple[tuple[int, ...], int]] = [((), base)]
            for _ in range(max_chain_len):
                nxt = []
                for seq, mask in layers:
                    for i in agents:
                        outer = knows_fn(ev, Node(i, t2), mask)
                        seq2 = seq + (i,)
                        cent_counts[0] += group_size
                        hits = outer & group_mask
                        cent_counts[1] += hits.bit_count()
                        for rid in _bits(hits):
                            run = system.runs[rid]
                            witness = centipede_finder(run, topo, (i0,) + seq2, (t0, t2))
                            if witness is None:
                                report.violations.append(ViolationRecord(
                                    rid, f"no centipede for agents {(i0,) + seq2} "
                                         f"interval [{t0},{t2}]"))
                        nxt.append((seq2, outer))
                layers = nxt
            for size in range(1, min(max_set_size, len(agents)) + 1):
                for combo in itertools.combinations(agents, size):
                    group = frozenset(combo)
                    nodes = frozenset(Node(i, t2) for i in group)
                    mask = ck_fn(ev, nodes, ev.atom_mask(label, t2))
                    broom_counts[0] += group_size
                    hits = mask & group_mask
                    broom_counts[1] += hits.bit_count()
                    for rid in _bits(hits):
                        run = system.runs[rid]
                        witness = broom_finder(run, topo, i0, group, (t0, t2))
                        if witness is None:
                            report.violations.append(ViolationRecord(
                                rid, f"no broom for origin {i0} group "
                                     f"{sorted(group)} interval [{t0},{t2}]"))
    report.families["centipede"] = tuple(cent_counts)
    report.families["broom"] = tuple(broom_counts)
    report.instances = cent_counts[0] + broom_counts[0]
    report.non_vacuous = cent_counts[1] + broom_counts[1]
    report.elapsed = _time.monotonic() - start
    return report


# --- coordination theorems -----------------------------------------------------

def check_wtr_theorem(system: System, inst: CoordinationInstance, *,
                      beta_fn=beta_node, knows_fn=_default_knows) -> TheoremReport:
    """In a system solving a weakly timed instance, every triggered run
    satisfies the nested knowledge chain through the bounded response nodes:
    the final responder knows, at its response node, the chain of latest
    possible nodes of its predecessors, down to the trigger atom stamped at
    the first bounded time.

    The main-text variant that stamps the atom with the realized first
    response time is evaluated too and recorded in the notes.
    """
    start = _time.monotonic()
    report = TheoremReport("wtr-nested-knowledge")
    verdict = solves(system, inst)
    if not verdict.solved:
        report.precondition_failure = verdict.to_line()
        report.elapsed = _time.monotonic() - start
        return report
    ev = get_evaluator(system)
    label = inst.trigger
    k = len(inst.responses)
    realized_failures = 0
    for run in system.runs:
        if run.trigger_occurrence is None:
            continue
        nodes = response_nodes(run, inst)
        alpha_k = nodes[-1]
        betas = [beta_fn(inst, h, alpha_k.time) for h in range(1, k)]
        t_bound_first = beta_fn(inst, 1, alpha_k.time).time
        report.instances += 1
        report.non_vacuous += 1
        mask = ev.atom_mask(label, t_bound_first)
        for beta in betas:
            mask = knows_fn(ev, beta, mask)
        mask = knows_fn(ev, alpha_k, mask)
        if not mask >> run.run_id & 1:
            chain = " ".join(str(nd) for nd in [alpha_k, *reversed(betas)])
            report.violations.append(ViolationRecord(
                run.run_id,
                f"nested knowledge chain {chain} of tocc({t_bound_first}, {label}) fails"))
        rmask = ev.atom_mask(label, nodes[0].time)
        for beta in betas:
            rmask = knows_fn(ev, beta, rmask)
        rmask = knows_fn(ev, alpha_k, rmask)
        if not rmask >> run.run_id & 1:
            realized_failures += 1
    report.notes["realized-t1-variant"] = f"failures={realized_failures}"
    report.elapsed = _time.monotonic() - start
    return report


def check_ttr_theorem(system: System, inst: CoordinationInstance, *,
                      ck_fn=_default_ck) -> TheoremReport:
    """In a system solving a tightly timed instance, every triggered run has
    common knowledge, over the realized response nodes, of the trigger atom
    stamped at the earliest response time."""
    start = _time.monotonic()
    report = TheoremReport("ttr-common-knowledge")
    verdict = solves(system, inst)
    if not verdict.solved:
        report.precondition_failure = verdict.to_line()
        report.elapsed = _time.monotonic() - start
        return report
    ev = get_evaluator(system)
    for run in system.runs:
        if run.trigger_occurrence is None:
            continue
        nodes = response_nodes(run, inst)
        node_set = frozenset(nodes)
        earliest = min(nodes, key=scan_key)
        report.instances += 1
        report.non_vacuous += 1
        mask = ck_fn(ev, node_set, ev.atom_mask(inst.trigger, earliest.time))
        if not mask >> run.run_id & 1:
            report.violations.append(ViolationRecord(
                run.run_id,
                f"no common knowledge of tocc({earliest.time}, {inst.trigger}) over "
                f"{' '.join(str(nd) for nd in sorted(node_set))}"))
    report.elapsed = _time.monotonic() - start
    return report


# --- logic lemma suites ---------------------------------------------------------

def _event_labels(system: System) -> list[str]:
    seen = {system.scenario.trigger.label}
    for run in system.runs:
        for evs in run.events.values():
            for ev in evs:
                if isinstance(ev, (ExternalInput, Action)):
                    seen.add(ev.label)
    return sorted(seen)


def _lemma_formula_pool(system: System) -> list:
    """Deterministic mix of stamped atoms, negations, conjunctions, a
    knowledge-wrapped atom, and enough tautologies to exercise necessitation.

    Observed labels are padded with never-occurring ones so even single-label
    systems get a full pool of atoms (stamped atoms of unknown labels are
    simply false everywhere)."""
    horizon = system.scenario.horizon
    labels = (_event_labels(system) + ["ghost_a", "ghost_b"])[:3]
    times = sorted({0, horizon // 2, horizon})
    atoms = [OccurredBy(t, lbl) for lbl in labels for t in times]
    pool = list(atoms)
    pool += [Not(a) for a in atoms[:4]]
    pool += [And(a, b) for a, b in zip(atoms, atoms[1:])][:3]
    pool.append(NodeKnows(Node(1, horizon), atoms[0]))
    tautologies = [Not(And(a, Not(a))) for a in atoms]
    pool += tautologies
    pool += [Not(Not(t)) for t in tautologies[:3]]
    return pool


def _lemma_node_sets(system: System) -> list[frozenset[Node]]:
    topo = system.scenario.topology
    horizon = system.scenario.horizon
    agents = list(topo.agents())
    marks = sorted({0, max(0, horizon - 2), max(0, horizon - 1), horizon})
    a0 = agents[0]
    sets: list[frozenset[Node]] = [frozenset({Node(a0, t)}) for t in marks]
    if len(agents) > 1:
        b = agents[1]
        sets += [frozenset({Node(a0, t), Node(b, t)}) for t in marks[:2]]
        sets.append(frozenset({Node(a0, max(0, horizon - 2)), Node(b, horizon)}))
        sets.append(frozenset({Node(a0, 0), Node(b, horizon)}))
        sets.append(frozenset({Node(b, 0), Node(a0, horizon)}))
    else:
        sets += [frozenset({Node(a0, s), Node(a0, t)})
                 for s, t in itertools.combinations(marks, 2)]
    if len(agents) > 2:
        sets.append(frozenset({Node(agents[0], horizon), Node(agents[1], horizon),
                               Node(agents[2], horizon)}))
        sets.append(frozenset({Node(agents[0], max(0, horizon - 2)),
                               Node(agents[1], max(0, horizon - 1)),
                               Node(agents[2], horizon)}))
    else:
        sets.append(frozenset(Node(a0, t) for t in marks[:3]))
    seen: list[frozenset[Node]] = []
    for s in sets:
        if s not in seen:
            seen.append(s)
    return seen[:12]


def check_logic_lemmas(system: System, *, ts_depth: int = 2) -> TheoremReport:
    """The S5 axioms, the fixed-point axiom, the induction rule, and a bounded
    dual-evaluation sweep of the timestamping embedding, all as run-set
    inclusions over a deterministic formula and node-set pool."""
    start = _time.monotonic()
    ev = get_evaluator(system)
    report = TheoremReport("logic-lemmas")
    pool = _lemma_formula_pool(system)
    masks = [ev.l1_mask(f) for f in pool]
    node_sets = _lemma_node_sets(system)
    full = ev.full_mask
    fam: dict[str, list[int]] = {name: [0, 0] for name in
                                 ("K", "T", "4", "5", "N", "fixpoint", "induction")}

    def record(name: str, non_vacuous: bool, holds: bool, describe: str) -> None:
        fam[name][0] += 1
        if non_vacuous:
            fam[name][1] += 1
        if not holds:
            report.violations.append(ViolationRecord(-1, f"axiom {name}: {describe}"))

    for nodes in node_sets:
        for pi, phi_mask in enumerate(masks):
            ck_phi = ev.ck_mask(nodes, phi_mask)
            record("T", ck_phi != 0, ck_phi & ~phi_mask == 0,
                   f"T fails for pool[{pi}] over {sorted(nodes)}")
            ck_ck = ev.ck_mask(nodes, ck_phi)
            record("4", ck_phi != 0, ck_phi & ~ck_ck == 0,
                   f"4 fails for pool[{pi}] over {sorted(nodes)}")
            not_ck = full & ~ck_phi
            record("5", not_ck != 0, not_ck & ~ev.ck_mask(nodes, not_ck) == 0,
                   f"5 fails for pool[{pi}] over {sorted(nodes)}")
            record("N", phi_mask == full,
                   phi_mask != full or ck_phi == full,
                   f"necessitation fails for pool[{pi}] over {sorted(nodes)}")
            fix_rhs = ev.everyone_mask(nodes, phi_mask & ck_phi)
            record("fixpoint", ck_phi != 0, ck_phi & ~fix_rhs == 0,
                   f"fixpoint fails for pool[{pi}] over {sorted(nodes)}")
            for qi, psi_mask in enumerate(masks):
                if (pi + qi) % 2:
                    continue  # deterministic half of the pairs keeps this light
                impl = (full & ~phi_mask) | psi_mask
                prem = ev.ck_mask(nodes, phi_mask) & ev.ck_mask(nodes, impl)
                record("K", prem != 0, prem & ~ev.ck_mask(nodes, psi_mask) == 0,
                       f"K fails for pool[{pi}],pool[{qi}] over {sorted(nodes)}")
                premise_holds = phi_mask & ~ev.everyone_mask(nodes, phi_mask & psi_mask) == 0
                concl = phi_mask & ~ev.ck_mask(nodes, psi_mask) == 0
                record("induction", premise_holds and phi_mask != 0,
                       (not premise_holds) or concl,
                       f"induction fails for pool[{pi}],pool[{qi}] over {sorted(nodes)}")

    ts_report = check_timestamp_embedding(system, max_depth=ts_depth)
    report.families = {name: (c[0], c[1]) for name, c in fam.items()}
    report.families["timestamp"] = (ts_report.instances, ts_report.non_vacuous)
    report.violations.extend(ts_report.violations)
    report.instances = sum(c for c, _ in report.families.values())
    report.non_vacuous = sum(nv for _, nv in report.families.values())
    report.elapsed = _time.monotonic() - start
    return report


def check_timestamp_embedding(system: System, max_depth: int = 3,
                              agent_limit: int = 2, label_limit: int = 2,
                              spot_check_stride: int = 1000) -> TheoremReport:
    """Exhaustive dual evaluation of the timestamping embedding.

    Enumerates every agent-based formula up to the height cap over the first
    agents and labels (padded with a never-occurring label), evaluates it at
    every run and time, and compares with the node-based evaluation of its
    timestamped translation. The top layer streams over composed run-set
    masks; a deterministic stride of top formulas is additionally
    materialized and re-evaluated recursively as a cross-check.
    """
    start = _time.monotonic()
    ev = get_evaluator(system)
    horizon = system.scenario.horizon
    agents = list(system.scenario.topology.agents())[:agent_limit]
    labels = _event_labels(system)
    labels = (labels + ["unobserved_event"])[:label_limit]
    times = list(range(horizon + 1))
    report = TheoremReport("timestamp-embedding")

    groups = [frozenset(c) for size in range(1, len(agents) + 1)
              for c in itertools.combinations(agents, size)]
    unary_ops: list[tuple] = [("not",)]
    unary_ops += [("K", i) for i in agents]
    unary_ops += [("E", g) for g in groups]
    unary_ops += [("C", g) for g in groups]

    def apply_unary_l0(op: tuple, mask: int, t: int) -> int:
        if op[0] == "not":
            return ev.full_mask & ~mask
        if op[0] == "K":
            return ev.knows_mask(Node(op[1], t), mask)
        nodes = frozenset(Node(i, t) for i in op[1])
        if op[0] == "E":
            return ev.everyone_mask(nodes, mask)
        return ev.ck_mask(nodes, mask)

    def build_unary(op: tuple, f):
        if op[0] == "not":
            return Not(f)
        if op[0] == "K":
            return Knows(op[1], f)
        if op[0] == "E":
            return EveryoneKnows(op[1], f)
        return CommonKnowledge(op[1], f)

    def eval_l1_mask(f) -> int:
        return ev.l1_mask(f)

    # Materialized layers up to height max_depth-1: formula, per-time L0
    # masks, per-time L1 masks of the timestamped translation.
    atoms = [Occurred(lbl) for lbl in labels]
    layers: list[list[tuple]] = [[]]
    cum: list[tuple] = []
    mismatches = 0

    def check_entry(f, l0_masks, l1_masks) -> None:
        nonlocal mismatches
        report.instances += len(times)
        report.non_vacuous += len(times)
        for ti, t in enumerate(times):
            if l0_masks[ti] != l1_masks[ti]:
                mismatches += 1
                if mismatches <= 5:
                    report.violations.append(ViolationRecord(
                        -1, f"timestamp mismatch for {f!r} at t={t}"))

    for a in atoms:
        l0 = tuple(ev.l0_mask(a, t) for t in times)
        l1 = tuple(eval_l1_mask(timestamp(a, t)) for t in times)
        check_entry(a, l0, l1)
        layers[0].append((a, l0, l1))
    cum.extend(layers[0])

    for depth in range(1, max_depth):
        layer: list[tuple] = []
        prev_layer = layers[depth - 1]
        shorter = [e for lay in layers[:depth - 1] for e in lay]
        for op in unary_ops:
            for (f, l0, l1) in prev_layer:
                g = build_unary(op, f)
                g0 = tuple(apply_unary_l0(op, l0[ti], t) for ti, t in enumerate(times))
                g1 = tuple(eval_l1_mask(timestamp(g, t)) for t in times)
                check_entry(g, g0, g1)
                layer.append((g, g0, g1))
        for (f, f0, f1) in prev_layer:
            for (g, g0, g1) in cum:
                h = And(f, g)
                h0 = tuple(a & b for a, b in zip(f0, g0))
                h1 = tuple(a & b for a, b in zip(f1, g1))
                check_entry(h, h0, h1)
                layer.append((h, h0, h1))
        for (f, f0, f1) in shorter:
            for (g, g0, g1) in prev_layer:
                h = And(f, g)
                h0 = tuple(a & b for a, b in zip(f0, g0))
                h1 = tuple(a & b for a, b in zip(f1, g1))
                check_entry(h, h0, h1)
                layer.append((h, h0, h1))
        layers.append(layer)
        cum.extend(layer)

    # Top layer: stream composed masks without materializing the formulas,
    # spot-checking a deterministic stride by full recursive re-evaluation.
    if max_depth >= 1:
        top_index = 0
        prev_layer = layers[max_depth - 1]
        shorter = [e for lay in layers[:max_depth - 1] for e in lay]

        def stream(f, l0_masks, l1_masks) -> None:
            nonlocal mismatches, top_index
            top_index += 1
            report.instances += len(times)
            report.non_vacuous += len(times)
            for ti in range(len(times)):
                if l0_masks[ti] != l1_masks[ti]:
                    mismatches += 1
                    if mismatches <= 5:
                        report.violations.append(ViolationRecord(
                            -1, f"timestamp mismatch for {f!r} at t={times[ti]}"))
            if top_index % spot_check_stride == 0:
                for t in times:
                    direct0 = ev.l0_mask(f, t)
                    direct1 = eval_l1_mask(timestamp(f, t))
                    if direct0 != direct1:
                        mismatches += 1
                        report.violations.append(ViolationRecord(
                            -1, f"spot-check mismatch for {f!r} at t={t}"))

        for op in unary_ops:
            for (f, l0, l1) in prev_layer:
                g = build_unary(op, f)
                g0 = tuple(apply_unary_l0(op, l0[ti], t) for ti, t in enumerate(times))
                g1 = tuple(_apply_unary_l1(ev, op, l1[ti], t) for ti, t in enumerate(times))
                stream(g, g0, g1)
        for (f, f0, f1) in prev_layer:
            for (g, g0, g1) in cum:
                stream(And(f, g), tuple(a & b for a, b in zip(f0, g0)),
                       tuple(a & b for a, b in zip(f1, g1)))
        for (f, f0, f1) in shorter:
            for (g, g0, g1) in prev_layer:
                stream(And(f, g), tuple(a & b for a, b in zip(f0, g0)),
                       tuple(a & b for a, b in zip(f1, g1)))
    if mismatches > 5:
        report.notes["suppressed-mismatches"] = str(mismatches - 5)
    report.elapsed = _time.monotonic() - start
    return report


def _apply_unary_l1(ev: Evaluator, op: tuple, mask: int, t: int) -> int:
    """The node-based mask transformer matching a timestamped unary operator."""
    if op[0] == "not":
        return ev.full_mask & ~mask
    if op[0] == "K":
        return ev.knows_mask(Node(op[1], t), mask)
    nodes = frozenset(Node(i, t) for i in op[1])
    if op[0] == "E":
        return ev.everyone_mask(nodes, mask)
    return ev.ck_mask(nodes, mask)


# --- mutation self-test ----------------------------------------------------------

def _mut_centipede_skip_hubs(run, topo, targets):
    """Drops every witness that needs an intermediate node off the endpoints."""
    w = find_uneven_centipede(run, topo, targets)
    if w is not None and any(nd not in (w.targets[0], w.targets[-1]) for nd in w.spine):
        return None
    return w


def _mut_knows_drop_modality(ev, node, mask):
    """Treats knowledge of a fact as the fact itself."""
    return mask


def _mut_broom_endpoint_hubs(run, topo, origin, targets):
    """Only admits hubs that are the origin or one of the targets."""
    w = find_uneven_broom(run, topo, origin, targets)
    if w is not None and w.hub != origin and w.hub not in targets:
        return None
    return w


def _mut_ck_any_member(ev, nodes, mask):
    """Marks a component when any member satisfies the fact, not all."""
    out = 0
    for comp in ev.components(nodes):
        if comp & mask:
            out |= comp
    return out


def _mut_beta_one_early(inst, h, t_k):
    """Shifts every bounded response node one round early."""
    nd = beta_node(inst, h, t_k)
    return Node(nd.agent, max(0, nd.time - 1))


def _mut_ck_never(ev, nodes, mask):
    """Common knowledge never holds."""
    return 0


MUTATIONS: dict[str, dict] = {
    "centipede-finder-skips-hubs": {
        "suite": "nested", "kwargs": {"finder": _mut_centipede_skip_hubs}},
    "knowledge-drops-modality": {
        "suite": "nested", "kwargs": {"knows_fn": _mut_knows_drop_modality}},
    "broom-finder-endpoint-hubs": {
        "suite": "ck", "kwargs": {"finder": _mut_broom_endpoint_hubs}},
    "ck-marks-any-member": {
        "suite": "ck", "kwargs": {"ck_fn": _mut_ck_any_member}},
    "beta-node-one-early": {
        "suite": "wtr", "kwargs": {"beta_fn": _mut_beta_one_early}},
    "ttr-ck-never-holds": {
        "suite": "ttr", "kwargs": {"ck_fn": _mut_ck_never}},
}


def run_mutation_selftest(nested_system: System, ck_system: System,
                          wtr_case: tuple[System, CoordinationInstance],
                          ttr_case: tuple[System, CoordinationInstance],
                          max_chain_len: int = 2,
                          max_set_size: int = 2) -> list[tuple[str, bool, int]]:
    """Runs every registered mutation against its suite and reports whether
    at least one check flipped to a violation. All must flip."""
    results = []
    for name in sorted(MUTATIONS):
        spec = MUTATIONS[name]
        suite, kwargs = spec["suite"], spec["kwargs"]
        if suite == "nested":
            rep = check_nested_gain(nested_system, max_chain_len, **kwargs)
        elif suite == "ck":
            rep = check_ck_gain(ck_system, max_set_size, **kwargs)
        elif suite == "wtr":
            rep = check_wtr_theorem(wtr_case[0], wtr_case[1], **kwargs)
        else:
            rep = check_ttr_theorem(ttr_case[0], ttr_case[1], **kwargs)
        results.append((name, len(rep.violations) > 0, len(rep.violations)))
    return results
