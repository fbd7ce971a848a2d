"""Timed coordination problems, their verifiers, and response policies.

A coordination instance names a trigger event and an ordered list of
responses. The four kinds differ only in the timing clause:

* ordered: each response no later than the next;
* simultaneous: all responses at one time;
* weakly timed: consecutive gaps bounded from below by the deltas;
* tightly timed: pairwise differences exactly the delta differences.

Policies are pure functions of the full relayed local state, so equal states
always produce equal action sets across runs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .network import Node, Topology, wdist
from .runs import (Action, LocalState, Run, System, first_hearing,
                   occurrence_time)


class Kind(str, enum.Enum):
    OR = "OR"
    SR = "SR"
    WTR = "WTR"
    TTR = "TTR"


@dataclass(frozen=True)
class Response:
    agent: int
    action: str


class InstanceError(ValueError):
    """Raised for malformed coordination instances."""


class PolicyError(ValueError):
    """Raised when a policy cannot be built or misbehaves structurally."""


@dataclass(frozen=True)
class CoordinationInstance:
    """Trigger label plus ordered responses and the kind-specific deltas.

    Weakly timed instances carry k-1 deltas (consecutive lower-bound gaps);
    tightly timed instances carry k deltas (offsets from a common anchor);
    ordered and simultaneous instances carry none.
    """

    kind: Kind
    trigger: str
    responses: tuple[Response, ...]
    deltas: tuple[int, ...] = ()

    def __post_init__(self):
        k = len(self.responses)
        if k < 1:
            raise InstanceError("at least one response required")
        labels = [r.action for r in self.responses]
        if len(set(labels)) != k:
            raise InstanceError("response action labels must be distinct")
        if self.trigger in labels:
            raise InstanceError("trigger label collides with a response action")
        if self.kind in (Kind.OR, Kind.SR):
            if self.deltas:
                raise InstanceError(f"{self.kind.value} takes no deltas")
        elif self.kind is Kind.WTR:
            if len(self.deltas) != k - 1:
                raise InstanceError(f"WTR needs exactly {k - 1} deltas, got {len(self.deltas)}")
            if any(d < 0 for d in self.deltas):
                raise InstanceError("WTR deltas are nonnegative lower-bound gaps")
        elif self.kind is Kind.TTR:
            if len(self.deltas) != k:
                raise InstanceError(f"TTR needs exactly {k} deltas, got {len(self.deltas)}")


def _occurrences(run: Run, resp: Response) -> list[Node]:
    found = []
    for node, evs in run.events.items():
        if node.agent != resp.agent:
            continue
        for ev in evs:
            if isinstance(ev, Action) and ev.label == resp.action:
                found.append(node)
    found.sort()
    return found


def response_nodes(run: Run, inst: CoordinationInstance) -> tuple[Node, ...] | None:
    """The node where each response's action occurs, in response order.

    None when any response is missing from the run. A response action
    occurring more than once is a policy bug and raises PolicyError.
    """
    nodes: list[Node] = []
    for resp in inst.responses:
        found = _occurrences(run, resp)
        if len(found) > 1:
            raise PolicyError(
                f"action {resp.action!r} performed {len(found)} times in run {run.run_id}")
        if not found:
            return None
        nodes.append(found[0])
    return tuple(nodes)


@dataclass(frozen=True)
class Counterexample:
    run_id: int
    clause: int
    detail: str
    nodes: tuple[Node, ...] = ()

    def to_line(self) -> str:
        timing = " ".join(str(nd) for nd in self.nodes)
        suffix = f" nodes {timing}" if timing else ""
        return f"run {self.run_id} clause {self.clause}: {self.detail}{suffix}"


@dataclass(frozen=True)
class SolveVerdict:
    solved: bool
    counterexample: Counterexample | None = None

    def to_line(self) -> str:
        if self.solved:
            return "solved"
        return "counterexample " + self.counterexample.to_line()


def solves(system: System, inst: CoordinationInstance) -> SolveVerdict:
    """Check both clauses on every run; first violating run (canonical order)
    is returned as the counterexample.

    Clause 1: responses occur exactly once iff the trigger occurs (an action
    censored by the horizon counts as a violation). Clause 2 is the
    kind-specific timing condition on the realized response nodes.
    """
    for run in system.runs:
        triggered = run.trigger_occurrence is not None
        nodes: list[Node] = []
        for resp in inst.responses:
            found = _occurrences(run, resp)
            if len(found) > 1:
                raise PolicyError(
                    f"action {resp.action!r} performed {len(found)} times in run {run.run_id}")
            if not triggered and found:
                return SolveVerdict(False, Counterexample(
                    run.run_id, 1,
                    f"response {resp.action!r} occurs in an untriggered run",
                    tuple(found)))
            if triggered and not found:
                return SolveVerdict(False, Counterexample(
                    run.run_id, 1, f"response {resp.action!r} missing in a triggered run"))
            if found:
                nodes.append(found[0])
        if not triggered:
            continue
        bad = _timing_violation(inst, tuple(nodes))
        if bad is not None:
            return SolveVerdict(False, Counterexample(run.run_id, 2, bad, tuple(nodes)))
    return SolveVerdict(True)


def _timing_violation(inst: CoordinationInstance, nodes: tuple[Node, ...]) -> str | None:
    times = [nd.time for nd in nodes]
    if inst.kind is Kind.OR:
        for h in range(len(times) - 1):
            if times[h] > times[h + 1]:
                return f"response {h + 1} at {times[h]} after response {h + 2} at {times[h + 1]}"
    elif inst.kind is Kind.SR:
        if len(set(times)) > 1:
            return f"responses not simultaneous: times {times}"
    elif inst.kind is Kind.WTR:
        for h in range(len(times) - 1):
            if times[h + 1] < times[h] + inst.deltas[h]:
                return (f"gap {times[h + 1] - times[h]} between responses {h + 1} and {h + 2} "
                        f"below delta {inst.deltas[h]}")
    elif inst.kind is Kind.TTR:
        # Pairwise exact offsets, verbatim from the definition.
        k = len(times)
        for h in range(k):
            for g in range(k):
                if times[h] - times[g] != inst.deltas[h] - inst.deltas[g]:
                    return (f"t{h + 1}-t{g + 1} = {times[h] - times[g]} but deltas differ by "
                            f"{inst.deltas[h] - inst.deltas[g]}")
    return None


def beta_node(inst: CoordinationInstance, h: int, t_k: int) -> Node:
    """Latest possible node for response h given the final response at t_k:
    the responder's agent at t_k minus the sum of the intervening deltas."""
    if inst.kind is not Kind.WTR:
        raise InstanceError("beta nodes are defined for weakly timed instances")
    k = len(inst.responses)
    if not 1 <= h <= k:
        raise InstanceError(f"h must be in 1..{k}, got {h}")
    t = t_k - sum(inst.deltas[h - 1:k - 1])
    if t < 0:
        raise InstanceError(f"beta time {t} negative: instance infeasible at t_k={t_k}")
    return Node(inst.responses[h - 1].agent, t)


# --- builtin policies ----------------------------------------------------------

@dataclass(frozen=True)
class TriggerOffsetPolicy:
    """Respond at a fixed offset from the trigger occurrence time.

    Each row (agent, action, offset) fires at trigger_time + offset, once the
    agent's relayed state reveals the trigger time. Offsets must be large
    enough that the state is guaranteed to reveal it by then; the builders
    below compute such offsets from the channel bounds.
    """

    trigger: str
    rows: tuple[tuple[int, str, int], ...]

    def actions(self, state: LocalState) -> frozenset[str]:
        mine = [row for row in self.rows if row[0] == state.agent]
        if not mine:
            return frozenset()
        s = occurrence_time(state, "input", self.trigger)
        if s is None:
            return frozenset()
        return frozenset(a for (_, a, off) in mine if state.time == s + off)


@dataclass(frozen=True)
class ChainPolicy:
    """Each responder acts on hearing of its predecessor, optionally waiting.

    Responder 1 acts the round its state first reveals the trigger. Responder
    h+1 acts on hearing that responder h acted at some time t, waiting (when
    waits is set and the instance has deltas) until t plus the gap delta.
    Dropping the wait reproduces the naive protocol that overshoots
    lower-bound gaps on fast deliveries.
    """

    trigger: str
    responses: tuple[Response, ...]
    deltas: tuple[int, ...]
    waits: bool = True

    def actions(self, state: LocalState) -> frozenset[str]:
        out = set()
        for h, resp in enumerate(self.responses, start=1):
            if resp.agent != state.agent:
                continue
            if occurrence_time(state, "act", resp.action) is not None:
                continue  # already performed; perfect recall keeps this stable
            if h == 1:
                heard = first_hearing(state, "input", self.trigger)
                due = heard
            else:
                pred = self.responses[h - 2]
                pred_time = occurrence_time(state, "act", pred.action)
                if pred_time is None:
                    continue
                heard = first_hearing(state, "act", pred.action)
                delta = self.deltas[h - 2] if self.waits and h - 2 < len(self.deltas) else 0
                due = max(heard, pred_time + delta)
            if due is not None and state.time == due:
                out.add(resp.action)
        return frozenset(out)


@dataclass(frozen=True)
class FixedSchedulePolicy:
    """Unconditional timetable: rows (agent, action, time), trigger or not."""

    rows: tuple[tuple[int, str, int], ...]

    def actions(self, state: LocalState) -> frozenset[str]:
        return frozenset(a for (i, a, t) in self.rows
                         if i == state.agent and t == state.time)


def make_broom_policy(topo: Topology, inst: CoordinationInstance, hub: int,
                      trigger_agent: int, window_end: int,
                      horizon: int) -> TriggerOffsetPolicy:
    """Common-anchor schedule for tightly timed (or simultaneous) instances.

    Every responder fires at trigger_time + D + delta_h where D covers the
    worst-case relay route through the hub, so the pairwise offsets hold
    exactly in every run and each responder is guaranteed to know the trigger
    time before acting. Raises PolicyError when the hub route is missing or
    the latest schedule overruns the horizon.
    """
    if inst.kind not in (Kind.TTR, Kind.SR):
        raise InstanceError("broom scheduling applies to TTR or SR instances")
    deltas = inst.deltas if inst.kind is Kind.TTR else (0,) * len(inst.responses)
    to_hub = wdist(topo, trigger_agent, hub)
    if to_hub is None:
        raise PolicyError(f"hub {hub} unreachable from trigger agent {trigger_agent}")
    legs = []
    for resp, delta in zip(inst.responses, deltas):
        leg = wdist(topo, hub, resp.agent)
        if leg is None:
            raise PolicyError(f"responder {resp.agent} unreachable from hub {hub}")
        legs.append((resp, delta, leg))
    anchor = max(to_hub + leg - delta for (_, delta, leg) in legs)
    latest = window_end + anchor + max(deltas)
    if latest > horizon:
        raise PolicyError(
            f"schedule infeasible: latest response at {latest} exceeds horizon {horizon}")
    rows = tuple((resp.agent, resp.action, anchor + delta)
                 for (resp, delta, _) in legs)
    return TriggerOffsetPolicy(trigger=inst.trigger, rows=rows)


def make_chain_policy(topo: Topology, inst: CoordinationInstance,
                      trigger_agent: int, *, waits: bool = True) -> ChainPolicy:
    """Relay chain for ordered or weakly timed instances.

    Responder h acts on learning (from its relayed state) that responder h-1
    acted, waiting out the gap delta when `waits` is set. Requires each link
    of the chain to be reachable so the news always arrives.
    """
    if inst.kind not in (Kind.OR, Kind.WTR):
        raise InstanceError("chain policies apply to OR or WTR instances")
    prev = trigger_agent
    for resp in inst.responses:
        if wdist(topo, prev, resp.agent) is None:
            raise PolicyError(f"responder {resp.agent} unreachable from agent {prev}")
        prev = resp.agent
    return ChainPolicy(trigger=inst.trigger, responses=inst.responses,
                       deltas=inst.deltas, waits=waits)
