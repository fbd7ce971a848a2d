"""Scenario file loading: YAML with a published schema.

A scenario file names the topology, horizon, trigger, an optional builtin
response policy (chain, broom, or a fixed schedule table), an optional
coordination instance, and an enumeration cap. See the schema below for the
exact shape; the CLI validates files against it before building anything.
"""

from __future__ import annotations

from dataclasses import dataclass

import jsonschema
import yaml

from .coordination import (CoordinationInstance, FixedSchedulePolicy, Kind,
                           Response, make_broom_policy, make_chain_policy)
from .network import Topology
from .runs import (DEFAULT_CAP, ResponsePolicy, ScenarioError, ScenarioSpec,
                   Trigger, validate_scenario)

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["agents", "channels", "horizon", "trigger"],
    "additionalProperties": False,
    "properties": {
        "agents": {"type": "integer", "minimum": 1},
        "channels": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to", "bound"],
                "additionalProperties": False,
                "properties": {
                    "from": {"type": "integer", "minimum": 1},
                    "to": {"type": "integer", "minimum": 1},
                    "bound": {"type": "integer", "minimum": 1},
                },
            },
        },
        "horizon": {"type": "integer", "minimum": 0},
        "trigger": {
            "type": "object",
            "required": ["label", "agent", "window"],
            "additionalProperties": False,
            "properties": {
                "label": {"type": "string", "minLength": 1},
                "agent": {"type": "integer", "minimum": 1},
                "window": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "may_be_absent": {"type": "boolean"},
            },
        },
        "policy": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["chain", "broom", "schedule"]},
                "wait": {"type": "boolean"},
                "hub": {"type": "integer", "minimum": 1},
                "rows": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["agent", "action", "at"],
                        "additionalProperties": False,
                        "properties": {
                            "agent": {"type": "integer", "minimum": 1},
                            "action": {"type": "string", "minLength": 1},
                            "at": {"type": "integer", "minimum": 0},
                        },
                    },
                },
            },
        },
        "instance": {
            "type": "object",
            "required": ["kind", "responses"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["OR", "SR", "WTR", "TTR"]},
                "trigger": {"type": "string", "minLength": 1},
                "responses": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["agent", "action"],
                        "additionalProperties": False,
                        "properties": {
                            "agent": {"type": "integer", "minimum": 1},
                            "action": {"type": "string", "minLength": 1},
                        },
                    },
                },
                "deltas": {"type": "array", "items": {"type": "integer"}},
            },
        },
        "cap": {"type": "integer", "minimum": 1},
    },
}


@dataclass(frozen=True)
class LoadedScenario:
    """A parsed scenario file: what to enumerate plus the instance, if any."""

    spec: ScenarioSpec
    instance: CoordinationInstance | None


def scenario_from_dict(data: dict) -> LoadedScenario:
    """Build a scenario from schema-shaped data; raises ScenarioError."""
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {path}: {exc.message}") from exc

    topo = Topology.of(data["agents"],
                       [(c["from"], c["to"], c["bound"]) for c in data["channels"]])
    tr = data["trigger"]
    trigger = Trigger(label=tr["label"], agent=tr["agent"],
                      window=(tr["window"][0], tr["window"][1]),
                      may_be_absent=tr.get("may_be_absent", False))

    instance = None
    if "instance" in data:
        inst = data["instance"]
        instance = CoordinationInstance(
            kind=Kind(inst["kind"]),
            trigger=inst.get("trigger", trigger.label),
            responses=tuple(Response(r["agent"], r["action"]) for r in inst["responses"]),
            deltas=tuple(inst.get("deltas", ())),
        )

    policy = _build_policy(data.get("policy"), topo, trigger, instance,
                           data["horizon"])
    spec = ScenarioSpec(topology=topo, horizon=data["horizon"], trigger=trigger,
                        policy=policy, cap=data.get("cap", DEFAULT_CAP))
    validate_scenario(spec)
    return LoadedScenario(spec=spec, instance=instance)


def _build_policy(policy_data: dict | None, topo: Topology, trigger: Trigger,
                  instance: CoordinationInstance | None,
                  horizon: int) -> ResponsePolicy | None:
    if policy_data is None:
        return None
    kind = policy_data["kind"]
    if kind == "schedule":
        rows = policy_data.get("rows", [])
        if not rows:
            raise ScenarioError("schedule policy requires at least one row")
        return FixedSchedulePolicy(
            rows=tuple((r["agent"], r["action"], r["at"]) for r in rows))
    if instance is None:
        raise ScenarioError(f"{kind} policy requires an instance section")
    if kind == "chain":
        return make_chain_policy(topo, instance, trigger_agent=trigger.agent,
                                 waits=policy_data.get("wait", True))
    hub = policy_data.get("hub")
    if hub is None:
        raise ScenarioError("broom policy requires a hub")
    return make_broom_policy(topo, instance, hub=hub,
                             trigger_agent=trigger.agent,
                             window_end=trigger.window[1], horizon=horizon)


def load_scenario(path: str) -> LoadedScenario:
    """Load and validate a YAML scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"scenario file {path} must hold a mapping")
    return scenario_from_dict(data)
