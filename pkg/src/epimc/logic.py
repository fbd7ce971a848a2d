"""Formula ASTs, parsing, and model checking for the two epistemic languages.

The agent-based language has atoms ``occ(e)`` and modalities indexed by
agents; truth depends on an evaluation time. The node-based language has
time-stamped atoms ``tocc(t, e)`` and modalities indexed by agent-time nodes;
its formulas state run-global facts, so truth needs no evaluation time.

Knowledge at a node quantifies over the runs whose local state at that node
matches. Common knowledge over a node set is computed on the connected
components of the union of the per-node indistinguishability relations, which
agrees with the every-finite-depth definition because mutual-knowledge
iteration stabilizes after at most one step per run (validated against
:func:`eval_ck_bounded`, the literal bounded iteration).

Evaluation is pure over immutable systems; per-system caches are guarded by a
lock so concurrent queries are safe.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .network import Node
from .runs import HorizonExceeded, Run, System, occurred_by


class ParseError(ValueError):
    """Syntax or well-formedness error, with 1-based line/column position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


# --- abstract syntax ---------------------------------------------------------

@dataclass(frozen=True)
class Occurred:
    """Agent-based atom: the labeled event has occurred by the evaluation time."""

    label: str


@dataclass(frozen=True)
class OccurredBy:
    """Node-based atom: the labeled event has occurred by the stamped time."""

    time: int
    label: str


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Knows:
    agent: int
    body: "Formula"


@dataclass(frozen=True)
class EveryoneKnows:
    group: frozenset[int]
    body: "Formula"


@dataclass(frozen=True)
class CommonKnowledge:
    group: frozenset[int]
    body: "Formula"


@dataclass(frozen=True)
class NodeKnows:
    node: Node
    body: "Formula"


@dataclass(frozen=True)
class NodeEveryone:
    nodes: frozenset[Node]
    body: "Formula"


@dataclass(frozen=True)
class NodeCommon:
    nodes: frozenset[Node]
    body: "Formula"


Formula = (Occurred | OccurredBy | Not | And | Knows | EveryoneKnows
           | CommonKnowledge | NodeKnows | NodeEveryone | NodeCommon)
FormulaL0 = Formula
FormulaL1 = Formula

_L0_HEADS = (Occurred, Knows, EveryoneKnows, CommonKnowledge)
_L1_HEADS = (OccurredBy, NodeKnows, NodeEveryone, NodeCommon)


def implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, Not(b)))


def formula_language(f: Formula) -> str:
    """"l0" or "l1"; raises ValueError on a mixed-language tree."""
    kinds = set()

    def walk(g: Formula) -> None:
        if isinstance(g, _L0_HEADS):
            kinds.add("l0")
        elif isinstance(g, _L1_HEADS):
            kinds.add("l1")
        if isinstance(g, Not):
            walk(g.body)
        elif isinstance(g, And):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, (Knows, NodeKnows, EveryoneKnows, CommonKnowledge,
                            NodeEveryone, NodeCommon)):
            walk(g.body)

    walk(f)
    if kinds == {"l0"}:
        return "l0"
    if kinds == {"l1"}:
        return "l1"
    raise ValueError(f"formula mixes languages: {sorted(kinds)}")


def _validate_for_system(f: Formula, system: System) -> None:
    horizon = system.scenario.horizon
    n = system.scenario.topology.agent_count

    def check_agent(i: int) -> None:
        if not 1 <= i <= n:
            raise ValueError(f"agent {i} outside 1..{n}")

    def check_node(nd: Node) -> None:
        check_agent(nd.agent)
        if not 0 <= nd.time <= horizon:
            raise HorizonExceeded(f"node {nd} outside horizon 0..{horizon}")

    def walk(g: Formula) -> None:
        if isinstance(g, OccurredBy):
            if not 0 <= g.time <= horizon:
                raise HorizonExceeded(f"tocc time {g.time} outside horizon 0..{horizon}")
        elif isinstance(g, Knows):
            check_agent(g.agent)
            walk(g.body)
        elif isinstance(g, (EveryoneKnows, CommonKnowledge)):
            if not g.group:
                raise ValueError("empty agent group")
            for i in sorted(g.group):
                check_agent(i)
            walk(g.body)
        elif isinstance(g, NodeKnows):
            check_node(g.node)
            walk(g.body)
        elif isinstance(g, (NodeEveryone, NodeCommon)):
            if not g.nodes:
                raise ValueError("empty node set")
            for nd in sorted(g.nodes):
                check_node(nd)
            walk(g.body)
        elif isinstance(g, Not):
            walk(g.body)
        elif isinstance(g, And):
            walk(g.left)
            walk(g.right)

    walk(f)


# --- evaluation engine --------------------------------------------------------

class Evaluator:
    """Per-system model-checking engine over run-set bitmasks.

    Bit i of a mask is run i of the system's canonical order. Knowledge at a
    node intersects equivalence classes of local-state equality; common
    knowledge marks whole connected components of the union relation.
    """

    def __init__(self, system: System):
        self.system = system
        self.nruns = len(system.runs)
        self.full_mask = (1 << self.nruns) - 1
        self._lock = threading.RLock()
        self._classes: dict[tuple[int, int], tuple[int, ...]] = {}
        self._components: dict[frozenset[Node], tuple[int, ...]] = {}
        self._atoms: dict[tuple[str, int], int] = {}
        self._l1_masks: dict[Formula, int] = {}
        self._l0_masks: dict[tuple[Formula, int], int] = {}

    def classes_at(self, agent: int, time: int) -> tuple[int, ...]:
        """Masks of the local-state equivalence classes at (agent, time)."""
        key = (agent, time)
        with self._lock:
            got = self._classes.get(key)
            if got is not None:
                return got
            groups: dict[object, int] = {}
            for r in self.system.runs:
                state = r._states[key]
                groups[state] = groups.get(state, 0) | (1 << r.run_id)
            masks = tuple(sorted(groups.values(), key=_lowest_bit))
            self._classes[key] = masks
            return masks

    def knows_mask(self, node: Node, inner: int) -> int:
        """Runs where the agent at this node knows `inner` (class containment)."""
        out = 0
        for cls in self.classes_at(node.agent, node.time):
            if cls & inner == cls:
                out |= cls
        return out

    def everyone_mask(self, nodes: frozenset[Node], inner: int) -> int:
        out = self.full_mask
        for nd in sorted(nodes):
            out &= self.knows_mask(nd, inner)
        return out

    def components(self, nodes: frozenset[Node]) -> tuple[int, ...]:
        """Connected components of the union indistinguishability relation."""
        with self._lock:
            got = self._components.get(nodes)
            if got is not None:
                return got
        parent = list(range(self.nruns))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a: int, b: int) -> None:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        for nd in sorted(nodes):
            for cls in self.classes_at(nd.agent, nd.time):
                members = _bits(cls)
                for other in members[1:]:
                    union(members[0], other)
        comps: dict[int, int] = {}
        for rid in range(self.nruns):
            root = find(rid)
            comps[root] = comps.get(root, 0) | (1 << rid)
        masks = tuple(sorted(comps.values(), key=_lowest_bit))
        with self._lock:
            self._components[nodes] = masks
        return masks

    def ck_mask(self, nodes: frozenset[Node], inner: int) -> int:
        """Runs where `inner` is common knowledge over the node set: the union
        of the components wholly inside `inner`."""
        out = 0
        for comp in self.components(nodes):
            if comp & inner == comp:
                out |= comp
        return out

    def atom_mask(self, label: str, time: int) -> int:
        key = (label, time)
        with self._lock:
            got = self._atoms.get(key)
            if got is not None:
                return got
        out = 0
        for r in self.system.runs:
            if occurred_by(r, label, time):
                out |= 1 << r.run_id
        with self._lock:
            self._atoms[key] = out
        return out

    def l1_mask(self, f: Formula) -> int:
        with self._lock:
            got = self._l1_masks.get(f)
        if got is not None:
            return got
        if isinstance(f, OccurredBy):
            out = self.atom_mask(f.label, f.time)
        elif isinstance(f, Not):
            out = self.full_mask & ~self.l1_mask(f.body)
        elif isinstance(f, And):
            out = self.l1_mask(f.left) & self.l1_mask(f.right)
        elif isinstance(f, NodeKnows):
            out = self.knows_mask(f.node, self.l1_mask(f.body))
        elif isinstance(f, NodeEveryone):
            out = self.everyone_mask(f.nodes, self.l1_mask(f.body))
        elif isinstance(f, NodeCommon):
            out = self.ck_mask(f.nodes, self.l1_mask(f.body))
        else:
            raise TypeError(f"not a node-based formula: {f!r}")
        with self._lock:
            self._l1_masks[f] = out
        return out

    def l0_mask(self, f: Formula, t: int) -> int:
        with self._lock:
            got = self._l0_masks.get((f, t))
        if got is not None:
            return got
        if isinstance(f, Occurred):
            out = self.atom_mask(f.label, t)
        elif isinstance(f, Not):
            out = self.full_mask & ~self.l0_mask(f.body, t)
        elif isinstance(f, And):
            out = self.l0_mask(f.left, t) & self.l0_mask(f.right, t)
        elif isinstance(f, Knows):
            out = self.knows_mask(Node(f.agent, t), self.l0_mask(f.body, t))
        elif isinstance(f, EveryoneKnows):
            nodes = frozenset(Node(i, t) for i in f.group)
            out = self.everyone_mask(nodes, self.l0_mask(f.body, t))
        elif isinstance(f, CommonKnowledge):
            nodes = frozenset(Node(i, t) for i in f.group)
            out = self.ck_mask(nodes, self.l0_mask(f.body, t))
        else:
            raise TypeError(f"not an agent-based formula: {f!r}")
        with self._lock:
            self._l0_masks[(f, t)] = out
        return out


def _lowest_bit(mask: int) -> int:
    return (mask & -mask).bit_length()


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def get_evaluator(system: System) -> Evaluator:
    ev = system.caches.get("evaluator")
    if ev is None:
        ev = Evaluator(system)
        system.caches["evaluator"] = ev
    return ev


# --- public checking operations ----------------------------------------------

def eval_l1(system: System, run: Run, f: Formula) -> bool:
    """Truth of a node-based formula in one run of the system."""
    _validate_for_system(f, system)
    ev = get_evaluator(system)
    return bool(ev.l1_mask(f) >> run.run_id & 1)


def eval_l0(system: System, run: Run, t: int, f: Formula) -> bool:
    """Truth of an agent-based formula at evaluation time t in one run."""
    if not 0 <= t <= system.scenario.horizon:
        raise HorizonExceeded(f"evaluation time {t} outside 0..{system.scenario.horizon}")
    _validate_for_system(f, system)
    ev = get_evaluator(system)
    return bool(ev.l0_mask(f, t) >> run.run_id & 1)


def runs_satisfying(system: System, f: Formula) -> frozenset[int]:
    """Run ids of the system where the node-based formula holds."""
    _validate_for_system(f, system)
    ev = get_evaluator(system)
    return frozenset(_bits(ev.l1_mask(f)))


def ck_fixpoint(system: System, nodes: frozenset[Node] | set[Node],
                f: Formula) -> frozenset[int]:
    """Run ids where `f` is common knowledge over the node set.

    Computed on connected components of the union indistinguishability
    relation; a component is marked iff every member run satisfies `f`.
    """
    if not nodes:
        raise ValueError("empty node set")
    _validate_for_system(f, system)
    ev = get_evaluator(system)
    return frozenset(_bits(ev.ck_mask(frozenset(nodes), ev.l1_mask(f))))


def eval_ck_bounded(system: System, run: Run, nodes: frozenset[Node] | set[Node],
                    f: Formula, depth: int) -> bool:
    """Literal evaluation of depth-many nestings of everyone-knows.

    Serves as the independent oracle for :func:`ck_fixpoint`: the fixpoint
    must agree with this at depth = number of runs.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not nodes:
        raise ValueError("empty node set")
    _validate_for_system(f, system)
    ev = get_evaluator(system)
    nodeset = frozenset(nodes)
    cur = ev.l1_mask(f)
    for _ in range(depth):
        cur = ev.everyone_mask(nodeset, cur)
    return bool(cur >> run.run_id & 1)


def timestamp(f: Formula, t: int) -> Formula:
    """Meaning-preserving embedding of an agent-based formula at time t.

    Atoms pick up the stamp, modal indices become nodes at t, and the
    translation recurses through every connective, so truth at (run, t)
    coincides with node-based truth on the run.
    """
    if isinstance(f, Occurred):
        return OccurredBy(t, f.label)
    if isinstance(f, Not):
        return Not(timestamp(f.body, t))
    if isinstance(f, And):
        return And(timestamp(f.left, t), timestamp(f.right, t))
    if isinstance(f, Knows):
        return NodeKnows(Node(f.agent, t), timestamp(f.body, t))
    if isinstance(f, EveryoneKnows):
        return NodeEveryone(frozenset(Node(i, t) for i in f.group), timestamp(f.body, t))
    if isinstance(f, CommonKnowledge):
        return NodeCommon(frozenset(Node(i, t) for i in f.group), timestamp(f.body, t))
    raise TypeError(f"not an agent-based formula: {f!r}")


# --- concrete syntax -----------------------------------------------------------

def formula_to_text(f: Formula) -> str:
    """Canonical text form; parses back to an equal tree."""
    if isinstance(f, Occurred):
        return f"occ({f.label})"
    if isinstance(f, OccurredBy):
        return f"tocc({f.time}, {f.label})"
    if isinstance(f, Not):
        return f"!{formula_to_text(f.body)}"
    if isinstance(f, And):
        return f"({formula_to_text(f.left)} & {formula_to_text(f.right)})"
    if isinstance(f, Knows):
        return f"K[{f.agent}] {formula_to_text(f.body)}"
    if isinstance(f, NodeKnows):
        return f"K[{f.node.agent}@{f.node.time}] {formula_to_text(f.body)}"
    if isinstance(f, EveryoneKnows):
        return f"E{{{', '.join(str(i) for i in sorted(f.group))}}} {formula_to_text(f.body)}"
    if isinstance(f, CommonKnowledge):
        return f"C{{{', '.join(str(i) for i in sorted(f.group))}}} {formula_to_text(f.body)}"
    if isinstance(f, NodeEveryone):
        inner = ", ".join(f"{nd.agent}@{nd.time}" for nd in sorted(f.nodes))
        return f"E{{{inner}}} {formula_to_text(f.body)}"
    if isinstance(f, NodeCommon):
        inner = ", ".join(f"{nd.agent}@{nd.time}" for nd in sorted(f.nodes))
        return f"C{{{inner}}} {formula_to_text(f.body)}"
    raise TypeError(f"not a formula: {f!r}")


def _tokenize(text: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            col += 1
            i += 1
            continue
        if ch in "(){}[],@&!":
            tokens.append((ch, ch, line, col))
            col += 1
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("NAME", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(("EOF", "", line, col))
    return tokens


class _Parser:
    """Recursive-descent parser for the shared concrete grammar.

    The language is inferred from the indices: ``K[1]`` and ``occ`` make an
    agent-based formula, ``K[1@3]`` and ``tocc`` a node-based one. Mixing the
    two in one formula is rejected with a position.
    """

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.language: str | None = None

    def peek(self) -> tuple[str, str, int, int]:
        return self.tokens[self.pos]

    def take(self, kind: str, value: str | None = None) -> tuple[str, str, int, int]:
        tok = self.tokens[self.pos]
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise ParseError(f"expected {want}, found {tok[1] or 'end of input'}",
                             tok[2], tok[3])
        self.pos += 1
        return tok

    def fail(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok[2], tok[3])

    def set_language(self, lang: str, tok: tuple[str, str, int, int]) -> None:
        if self.language is None:
            self.language = lang
        elif self.language != lang:
            raise ParseError("agent-based and node-based syntax mixed in one formula",
                             tok[2], tok[3])

    def parse(self) -> Formula:
        f = self.formula()
        tok = self.peek()
        if tok[0] != "EOF":
            raise ParseError(f"unexpected trailing input {tok[1]!r}", tok[2], tok[3])
        return f

    def formula(self) -> Formula:
        left = self.unary()
        while self.peek()[0] == "&":
            self.take("&")
            right = self.unary()
            left = And(left, right)
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok[0] == "!":
            self.take("!")
            return Not(self.unary())
        if tok[0] == "(":
            self.take("(")
            f = self.formula()
            self.take(")")
            return f
        if tok[0] == "NAME":
            if tok[1] == "K":
                return self.knows()
            if tok[1] in ("E", "C"):
                return self.group_modality(tok[1])
            if tok[1] == "occ":
                return self.occ_atom()
            if tok[1] == "tocc":
                return self.tocc_atom()
            raise self.fail(f"unknown construct {tok[1]!r}")
        raise self.fail(f"expected a formula, found {tok[1] or 'end of input'!r}")

    def index(self) -> int | Node:
        tok = self.take("INT")
        agent = int(tok[1])
        if agent < 1:
            raise ParseError(f"agent ids start at 1, got {agent}", tok[2], tok[3])
        if self.peek()[0] == "@":
            self.take("@")
            ttok = self.take("INT")
            self.set_language("l1", tok)
            return Node(agent, int(ttok[1]))
        self.set_language("l0", tok)
        return agent

    def knows(self) -> Formula:
        self.take("NAME", "K")
        self.take("[")
        idx = self.index()
        self.take("]")
        body = self.unary()
        if isinstance(idx, Node):
            return NodeKnows(idx, body)
        return Knows(idx, body)

    def group_modality(self, which: str) -> Formula:
        self.take("NAME", which)
        open_tok = self.take("{")
        if self.peek()[0] == "}":
            raise ParseError("empty node set", open_tok[2], open_tok[3])
        indices = [self.index()]
        while self.peek()[0] == ",":
            self.take(",")
            indices.append(self.index())
        self.take("}")
        body = self.unary()
        if isinstance(indices[0], Node):
            nodes = frozenset(indices)
            return NodeEveryone(nodes, body) if which == "E" else NodeCommon(nodes, body)
        group = frozenset(indices)
        return EveryoneKnows(group, body) if which == "E" else CommonKnowledge(group, body)

    def occ_atom(self) -> Formula:
        tok = self.take("NAME", "occ")
        self.take("(")
        label = self.take("NAME")[1]
        self.take(")")
        self.set_language("l0", tok)
        return Occurred(label)

    def tocc_atom(self) -> Formula:
        tok = self.take("NAME", "tocc")
        self.take("(")
        time = int(self.take("INT")[1])
        self.take(",")
        label = self.take("NAME")[1]
        self.take(")")
        self.set_language("l1", tok)
        return OccurredBy(time, label)


def parse_formula(text: str) -> Formula:
    """Parse the ASCII formula grammar; raises ParseError with position."""
    return _Parser(text).parse()
