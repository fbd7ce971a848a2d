"""Run semantics and exhaustive enumeration for full-information relay systems.

Every agent forwards its complete history to each out-neighbor on every round
(once it has anything to tell), and the environment nondeterministically picks
the trigger occurrence plus a delivery round for each message within the
channel bound. Enumerating all such choices yields the finite system of runs
that serves as the possible-worlds universe for knowledge queries.

Round structure at a node (agent i, time t), in canonical order:
receives scheduled for t, then the external input (if the environment placed
it here), then protocol actions computed from the state *including* same-round
arrivals, then the relay sends. Message payloads are the sender's observation
log at send time, so received logs embed sender logs recursively.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

from .network import Node, Topology, validate_topology

DEFAULT_CAP = 20000


class MessageId(NamedTuple):
    """(src, dst, sent_at) uniquely names a message: one per channel per round."""

    src: int
    dst: int
    sent_at: int

    def __str__(self) -> str:
        return f"{self.src}>{self.dst}@{self.sent_at}"


@dataclass(frozen=True)
class ExternalInput:
    label: str


@dataclass(frozen=True)
class Send:
    message: MessageId


@dataclass(frozen=True)
class Receive:
    message: MessageId


@dataclass(frozen=True)
class Action:
    label: str


Event = ExternalInput | Send | Receive | Action

# Raw observation-log entries are nested tuples so local states hash and
# compare structurally:
#   ("input", label) | ("recv", MessageId, payload_log) | ("act", label)
#   | ("send", MessageId)
# An observation log is a tuple of (time, (raw_event, ...)) pairs for the
# times with at least one event, ascending.
RawEvent = tuple
ObservationLog = tuple


class LocalState(NamedTuple):
    """An agent's complete view at a time: its observation log with payloads."""

    agent: int
    time: int
    observation_log: ObservationLog


class ResponsePolicy(Protocol):
    """Deterministic map from a local state to the actions performed this round."""

    def actions(self, state: LocalState) -> frozenset[str]: ...


@dataclass(frozen=True)
class Trigger:
    """The spontaneous external input: label, target agent, occurrence window."""

    label: str
    agent: int
    window: tuple[int, int]
    may_be_absent: bool = False


@dataclass(frozen=True)
class ScenarioSpec:
    topology: Topology
    horizon: int
    trigger: Trigger
    policy: ResponsePolicy | None = None
    cap: int = DEFAULT_CAP


class ScenarioError(ValueError):
    """Raised for structurally invalid scenarios."""


class EnumerationCapError(RuntimeError):
    """Raised when the run count exceeds the configured cap."""

    def __init__(self, cap: int, estimate: int):
        super().__init__(
            f"enumeration exceeds cap of {cap} runs (estimated count: {estimate})")
        self.cap = cap
        self.estimate = estimate


class HorizonExceeded(ValueError):
    """Raised when a query references a time beyond the scenario horizon."""


class QuietVariantError(LookupError):
    """Raised when no run matches the quiet-variant construction.

    Signals a capped enumeration or a modeling bug, never silently ignored.
    """


class MessageRecord(NamedTuple):
    """Environment bookkeeping for one message; delivered_at None = in flight."""

    message: MessageId
    delivered_at: int | None


def validate_scenario(scenario: ScenarioSpec) -> None:
    validate_topology(scenario.topology)
    if scenario.horizon < 0:
        raise ScenarioError(f"horizon must be >= 0, got {scenario.horizon}")
    trig = scenario.trigger
    if not 1 <= trig.agent <= scenario.topology.agent_count:
        raise ScenarioError(f"trigger agent {trig.agent} outside 1..{scenario.topology.agent_count}")
    w0, w1 = trig.window
    if w0 > w1 and not trig.may_be_absent:
        raise ScenarioError("empty trigger window requires may_be_absent")
    if w1 > scenario.horizon and w0 <= w1:
        raise ScenarioError(f"trigger window {trig.window} exceeds horizon {scenario.horizon}")
    if w0 < 0:
        raise ScenarioError("trigger window must start at time >= 0")
    if scenario.cap < 1:
        raise ScenarioError("cap must be >= 1")


def _trigger_choices(trig: Trigger) -> list[int | None]:
    w0, w1 = trig.window
    choices: list[int | None] = list(range(w0, w1 + 1))
    if trig.may_be_absent:
        choices.append(None)
    return choices


def _delivery_options(scenario: ScenarioSpec, msg: MessageId) -> list[int | None]:
    """Legal delivery rounds, ascending, with in-flight-at-horizon last."""
    bound = scenario.topology.bound(msg.src, msg.dst)
    assert bound is not None
    latest = msg.sent_at + bound
    opts: list[int | None] = list(range(msg.sent_at + 1, min(latest, scenario.horizon) + 1))
    if latest > scenario.horizon:
        opts.append(None)
    return opts


def _default_delivery(scenario: ScenarioSpec, msg: MessageId) -> int | None:
    """Canonical environment default: the latest allowed delivery."""
    bound = scenario.topology.bound(msg.src, msg.dst)
    assert bound is not None
    latest = msg.sent_at + bound
    return latest if latest <= scenario.horizon else None


class _Draft(NamedTuple):
    trigger_time: int | None
    raw_events: dict[Node, tuple[RawEvent, ...]]
    deliveries: dict[MessageId, int | None]
    states: dict[tuple[int, int], ObservationLog]


def _replay(
    scenario: ScenarioSpec,
    trigger_time: int | None,
    assignment: dict[MessageId, int | None],
    fill_default: bool = False,
) -> tuple[str, object]:
    """Deterministic replay of one environment-choice assignment.

    Returns ("run", draft) when every message that arises has an assigned
    delivery, or ("pending", messages) naming the unassigned messages of the
    earliest round that needs a choice. With fill_default, unassigned messages
    get the latest allowed delivery instead.
    """
    topo = scenario.topology
    horizon = scenario.horizon
    agents = list(topo.agents())
    trig = scenario.trigger
    assignment = dict(assignment)

    logs: dict[int, list] = {i: [] for i in agents}
    log_tuple: dict[int, ObservationLog] = {i: () for i in agents}
    payload_snaps: dict[tuple[int, int], ObservationLog] = {}
    states: dict[tuple[int, int], ObservationLog] = {}
    deliveries: dict[MessageId, int | None] = {}
    scheduled: dict[int, list[MessageId]] = {}
    raw_events: dict[Node, tuple[RawEvent, ...]] = {}

    for t in range(horizon + 1):
        buckets: dict[int, list[RawEvent]] = {}
        for m in sorted(scheduled.get(t, ())):
            payload = payload_snaps[(m.src, m.sent_at)]
            buckets.setdefault(m.dst, []).append(("recv", m, payload))
        if trigger_time == t:
            buckets.setdefault(trig.agent, []).append(("input", trig.label))
        if scenario.policy is not None:
            for i in agents:
                bucket = buckets.get(i)
                pre = log_tuple[i] + ((t, tuple(bucket)),) if bucket else log_tuple[i]
                labels = scenario.policy.actions(LocalState(i, t, pre))
                for lab in sorted(labels):
                    buckets.setdefault(i, []).append(("act", lab))
        new_msgs: list[MessageId] = []
        for i in agents:
            bucket = buckets.get(i)
            pre = log_tuple[i] + ((t, tuple(bucket)),) if bucket else log_tuple[i]
            if not pre:
                continue
            payload_snaps[(i, t)] = pre
            for ch in topo.out_channels(i):
                m = MessageId(i, ch.dst, t)
                buckets.setdefault(i, []).append(("send", m))
                new_msgs.append(m)
        unassigned = [m for m in new_msgs if m not in assignment]
        if unassigned:
            if fill_default:
                for m in unassigned:
                    assignment[m] = _default_delivery(scenario, m)
            else:
                return ("pending", sorted(unassigned))
        for m in new_msgs:
            d = assignment[m]
            deliveries[m] = d
            if d is not None:
                scheduled.setdefault(d, []).append(m)
        for i in agents:
            bucket = buckets.get(i)
            if bucket:
                logs[i].append((t, tuple(bucket)))
                log_tuple[i] = tuple(logs[i])
                raw_events[Node(i, t)] = tuple(bucket)
            states[(i, t)] = log_tuple[i]
    return ("run", _Draft(trigger_time, raw_events, deliveries, states))


def _raw_to_event(raw: RawEvent) -> Event:
    kind = raw[0]
    if kind == "input":
        return ExternalInput(raw[1])
    if kind == "recv":
        return Receive(raw[1])
    if kind == "act":
        return Action(raw[1])
    if kind == "send":
        return Send(raw[1])
    raise AssertionError(f"unknown raw event {raw!r}")


@dataclass(eq=False)
class Run:
    """One complete execution: events per node plus the environment's choices."""

    scenario: ScenarioSpec
    run_id: int
    trigger_occurrence: Node | None
    events: dict[Node, tuple[Event, ...]]
    deliveries: dict[MessageId, int | None]
    _states: dict[tuple[int, int], ObservationLog] = field(repr=False)
    _ancestors: dict[Node, frozenset[Node]] | None = field(default=None, repr=False)
    _first_occurrence: dict[str, int] | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def horizon(self) -> int:
        return self.scenario.horizon

    @property
    def environment(self) -> tuple[MessageRecord, ...]:
        return tuple(MessageRecord(m, d) for m, d in sorted(self.deliveries.items()))

    def in_flight(self) -> tuple[MessageId, ...]:
        return tuple(m for m, d in sorted(self.deliveries.items()) if d is None)

    def local_state(self, node: Node) -> LocalState:
        if not 0 <= node.time <= self.horizon:
            raise HorizonExceeded(f"time {node.time} outside 0..{self.horizon}")
        if not 1 <= node.agent <= self.scenario.topology.agent_count:
            raise ValueError(f"agent {node.agent} outside topology")
        return LocalState(node.agent, node.time, self._states[(node.agent, node.time)])

    def ancestor_map(self) -> dict[Node, frozenset[Node]]:
        """Per-node potential-cause sets (message-chain reachability), cached
        behind the run's lock so concurrent queries are safe."""
        with self._lock:
            if self._ancestors is None:
                arrivals: dict[Node, list[MessageId]] = {}
                for m, d in self.deliveries.items():
                    if d is not None:
                        arrivals.setdefault(Node(m.dst, d), []).append(m)
                anc: dict[Node, frozenset[Node]] = {}
                for t in range(self.horizon + 1):
                    for i in self.scenario.topology.agents():
                        nd = Node(i, t)
                        s = {nd}
                        if t > 0:
                            s |= anc[Node(i, t - 1)]
                        for m in arrivals.get(nd, ()):
                            s |= anc[Node(m.src, m.sent_at)]
                        anc[nd] = frozenset(s)
                self._ancestors = anc
            return self._ancestors

    def first_occurrence(self, label: str) -> int | None:
        """Earliest time an external input or action with this label occurred."""
        if self._first_occurrence is None:
            first: dict[str, int] = {}
            for node, evs in self.events.items():
                for ev in evs:
                    if isinstance(ev, (ExternalInput, Action)):
                        if ev.label not in first or node.time < first[ev.label]:
                            first[ev.label] = node.time
            self._first_occurrence = first
        return self._first_occurrence.get(label)


def local_state(run: Run, node: Node) -> LocalState:
    """Agent `node.agent`'s view at `node.time`: deterministic fold of its events."""
    return run.local_state(node)


def occurred_by(run: Run, label: str, t: int) -> bool:
    """True iff an external input or action with `label` occurred at time <= t."""
    first = run.first_occurrence(label)
    return first is not None and first <= t


@dataclass(eq=False)
class System:
    """The exhaustive, canonically ordered set of runs for one scenario."""

    scenario: ScenarioSpec
    runs: tuple[Run, ...]
    _choice_index: dict | None = field(default=None, repr=False)
    caches: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.runs)

    def run_by_choices(self, trigger_time: int | None,
                       deliveries: dict[MessageId, int | None]) -> Run | None:
        if self._choice_index is None:
            self._choice_index = {
                (r.trigger_occurrence.time if r.trigger_occurrence else None,
                 frozenset(r.deliveries.items())): r
                for r in self.runs
            }
        return self._choice_index.get((trigger_time, frozenset(deliveries.items())))


def _estimate_run_count(scenario: ScenarioSpec) -> int:
    """Cheap estimate: per trigger choice, the product of per-message option
    counts along the all-default replay. Exact when the message structure does
    not depend on delivery choices."""
    total = 0
    for trig in _trigger_choices(scenario.trigger):
        kind, draft = _replay(scenario, trig, {}, fill_default=True)
        assert kind == "run"
        product = 1
        for m in draft.deliveries:
            product *= len(_delivery_options(scenario, m))
        total += product
    return total


def enumerate_runs(scenario: ScenarioSpec) -> System:
    """Enumerate every run permitted by the scenario, canonically ordered.

    Order: trigger occurrence times ascending, the untriggered family last,
    and within a trigger choice the per-message delivery choices
    lexicographically (messages by send round then channel, delivery rounds
    ascending with in-flight last). Deterministic: equal scenarios yield
    bit-identical systems.
    """
    validate_scenario(scenario)
    drafts: list[_Draft] = []
    cap = scenario.cap

    def expand(trig: int | None, assignment: dict[MessageId, int | None]) -> None:
        kind, result = _replay(scenario, trig, assignment)
        if kind == "run":
            if len(drafts) >= cap:
                raise EnumerationCapError(cap, _estimate_run_count(scenario))
            drafts.append(result)
            return
        msgs = result
        option_lists = [_delivery_options(scenario, m) for m in msgs]
        for combo in itertools.product(*option_lists):
            ext = dict(assignment)
            ext.update(zip(msgs, combo))
            expand(trig, ext)

    for trig in _trigger_choices(scenario.trigger):
        expand(trig, {})
    if not drafts:
        raise ScenarioError("scenario admits no runs")

    runs = []
    for idx, draft in enumerate(drafts):
        trig_node = (Node(scenario.trigger.agent, draft.trigger_time)
                     if draft.trigger_time is not None else None)
        events = {node: tuple(_raw_to_event(r) for r in raw)
                  for node, raw in draft.raw_events.items()}
        runs.append(Run(scenario, idx, trig_node, events, draft.deliveries, draft.states))
    return System(scenario, tuple(runs))


def agree_on(r: Run, r2: Run, node: Node) -> bool:
    """True iff the runs look identical at this node: equal local state, same
    arrivals (inputs and received messages), same actions performed."""
    if r.local_state(node) != r2.local_state(node):
        return False
    evs, evs2 = r.events.get(node, ()), r2.events.get(node, ())
    arrivals = lambda evs: {e for e in evs if isinstance(e, (Receive, ExternalInput))}
    acts = lambda evs: {e for e in evs if isinstance(e, Action)}
    return arrivals(evs) == arrivals(evs2) and acts(evs) == acts(evs2)


def find_quiet_variant(system: System, run: Run, node: Node) -> Run:
    """The run that agrees with `run` on the past cone of `node` and takes the
    canonical environment defaults everywhere else.

    Deliveries landing inside the cone are kept; every other message is
    delivered at the latest allowed round (so no early-delivery events occur
    outside the cone); the trigger choice is kept as in `run`. Raises
    QuietVariantError if the system contains no such run or the constructed
    run fails the cone-equality or agreement checks.
    """
    if not 0 <= node.time <= run.horizon:
        raise HorizonExceeded(f"time {node.time} outside 0..{run.horizon}")
    cone = run.ancestor_map()[node]
    keep: dict[MessageId, int | None] = {}
    for m, d in run.deliveries.items():
        if d is not None and Node(m.dst, d) in cone:
            keep[m] = d
    trig = run.trigger_occurrence.time if run.trigger_occurrence else None
    kind, draft = _replay(system.scenario, trig, keep, fill_default=True)
    assert kind == "run"
    variant = system.run_by_choices(trig, draft.deliveries)
    if variant is None:
        raise QuietVariantError(
            f"no run in system with the quiet-variant choices for node {node}")
    if variant.ancestor_map()[node] != cone:
        raise QuietVariantError(f"quiet variant changes the past cone of {node}")
    for psi in sorted(cone):
        if not agree_on(run, variant, psi):
            raise QuietVariantError(f"quiet variant disagrees at cone node {psi}")
    return variant


# --- canonical serialization -------------------------------------------------

def _event_token(ev: Event) -> str:
    if isinstance(ev, ExternalInput):
        return f"input({ev.label})"
    if isinstance(ev, Receive):
        return f"recv({ev.message})"
    if isinstance(ev, Action):
        return f"act({ev.label})"
    return f"send({ev.message})"


def run_to_lines(run: Run) -> list[str]:
    """Line-oriented canonical form: one line per nonempty node, sorted by
    (time, agent), plus the trigger header and the in-flight tail."""
    lines = [f"run {run.run_id}"]
    if run.trigger_occurrence is None:
        lines.append("trigger: absent")
    else:
        t = run.trigger_occurrence
        lines.append(f"trigger: {run.scenario.trigger.label}@{t.time} agent {t.agent}")
    for node in sorted(run.events, key=lambda nd: (nd.time, nd.agent)):
        toks = " ".join(_event_token(e) for e in run.events[node])
        lines.append(f"{node}: {toks}")
    flight = run.in_flight()
    if flight:
        lines.append("inflight: " + " ".join(str(m) for m in flight))
    return lines


def dump_system(system: System) -> str:
    blocks = ["\n".join(run_to_lines(r)) for r in system.runs]
    return "\n\n".join(blocks) + "\n"


# --- observation-log queries (used by response policies) ---------------------

def _entries_contain(entries: ObservationLog, kind: str, label: str) -> bool:
    for _, evs in entries:
        for raw in evs:
            if raw[0] == kind and raw[1] == label:
                return True
            if raw[0] == "recv" and _entries_contain(raw[2], kind, label):
                return True
    return False


def first_hearing(state: LocalState, kind: str, label: str) -> int | None:
    """Earliest time this agent's log contained the fact that a (kind, label)
    event occurred, whether observed locally or learned from a payload."""
    for entry in state.observation_log:
        if _entries_contain((entry,), kind, label):
            return entry[0]
    return None


def occurrence_time(state: LocalState, kind: str, label: str) -> int | None:
    """The time at which a (kind, label) event occurred, as recorded in this
    state (directly or inside payloads); None when unknown here."""
    best: int | None = None

    def walk(entries: ObservationLog) -> None:
        nonlocal best
        for t, evs in entries:
            for raw in evs:
                if raw[0] == kind and raw[1] == label:
                    if best is None or t < best:
                        best = t
                elif raw[0] == "recv":
                    walk(raw[2])

    walk(state.observation_log)
    return best
