"""Batch command-line front door.

Subcommands: ``enumerate`` (run counts and canonical dumps), ``check``
(formula verdicts per run), ``find`` (structure witnesses with optional DOT
and figure output), and ``verify`` (theorem suites with pass/fail reports).

Exit status: 0 on success, 1 when a verification reports a violation, a
vacuous pass, or an unsolved-instance precondition, 2 on usage, schema, or
parse errors. Output is byte-deterministic for fixed inputs and flags.
"""

from __future__ import annotations

import argparse
import sys

from . import causality, harness
from .coordination import InstanceError, Kind, PolicyError, solves
from .logic import ParseError, eval_l1, formula_language, formula_to_text, parse_formula
from .network import Node, TopologyError
from .runs import (EnumerationCapError, HorizonExceeded, ScenarioError, System,
                   dump_system, enumerate_runs, run_to_lines)
from .scenario import LoadedScenario, load_scenario
from .viz import render_run_figure, run_to_dot

USAGE_ERRORS = (ScenarioError, TopologyError, ParseError, PolicyError,
                InstanceError, EnumerationCapError, HorizonExceeded)


def _load(args: argparse.Namespace) -> tuple[LoadedScenario, System]:
    loaded = load_scenario(args.scenario)
    spec = loaded.spec
    if getattr(args, "cap", None):
        from dataclasses import replace
        spec = replace(spec, cap=args.cap)
    return loaded, enumerate_runs(spec)


def _parse_node(text: str) -> Node:
    agent, _, time = text.partition("@")
    try:
        return Node(int(agent), int(time))
    except ValueError as exc:
        raise ScenarioError(f"malformed node {text!r}, expected i@t") from exc


def _parse_nodes(text: str) -> list[Node]:
    return [_parse_node(part.strip()) for part in text.split(",") if part.strip()]


def cmd_enumerate(args: argparse.Namespace) -> int:
    _, system = _load(args)
    print(f"runs: {len(system)}")
    if args.dump:
        print()
        print(dump_system(system), end="")
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    _, system = _load(args)
    formula = parse_formula(args.formula)
    if formula_language(formula) == "l0":
        raise ScenarioError(
            "check evaluates node-based formulas; timestamp the agent-based "
            "formula or use K[i@t] syntax")
    print(f"formula: {formula_to_text(formula)}")
    runs = system.runs
    if args.run is not None:
        runs = (_run_by_id(system, args.run),)
    for run in runs:
        verdict = "true" if eval_l1(system, run, formula) else "false"
        print(f"run {run.run_id}: {verdict}")
    return 0


def _run_by_id(system: System, run_id: int):
    if not 0 <= run_id < len(system.runs):
        raise ScenarioError(f"unknown run id {run_id}; system has {len(system.runs)} runs")
    return system.runs[run_id]


def cmd_find(args: argparse.Namespace) -> int:
    loaded, system = _load(args)
    run = _run_by_id(system, args.run)
    topo = loaded.spec.topology
    structure = None
    if args.structure == "centipede":
        targets = tuple(_parse_nodes(args.targets or ""))
        if len(targets) < 2:
            raise ScenarioError("centipede search needs --targets with at least two nodes")
        structure = causality.find_uneven_centipede(run, topo, targets)
        if structure is None:
            print("centipede: absent")
        else:
            print("centipede: found")
            print("spine: " + " ".join(str(nd) for nd in structure.spine))
            print("targets: " + " ".join(str(nd) for nd in structure.targets))
    elif args.structure == "broom":
        if not args.origin or not args.targets:
            raise ScenarioError("broom search needs --origin and --targets")
        origin = _parse_node(args.origin)
        targets = frozenset(_parse_nodes(args.targets))
        structure = causality.find_uneven_broom(run, topo, origin, targets)
        if structure is None:
            print("broom: absent")
        else:
            print("broom: found")
            print(f"hub: {structure.hub}")
            print("targets: " + " ".join(str(nd) for nd in sorted(structure.targets)))
    elif args.structure == "classic-centipede":
        agents = _parse_agent_list(args.agents)
        interval = _parse_interval(args.interval)
        structure = causality.classic_centipede(run, topo, agents, interval)
        if structure is None:
            print("centipede: absent")
        else:
            print("centipede: found")
            print("spine: " + " ".join(str(nd) for nd in structure.spine))
            print("targets: " + " ".join(str(nd) for nd in structure.targets))
    else:  # classic-broom: first agent is the origin, the rest the group
        agents = _parse_agent_list(args.agents)
        if len(agents) < 2:
            raise ScenarioError("classic-broom needs an origin agent plus a group")
        interval = _parse_interval(args.interval)
        structure = causality.classic_broom(run, topo, agents[0],
                                            frozenset(agents[1:]), interval)
        if structure is None:
            print("broom: absent")
        else:
            print("broom: found")
            print(f"hub: {structure.hub}")
            print("targets: " + " ".join(str(nd) for nd in sorted(structure.targets)))
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(run_to_dot(run, structure))
        print(f"dot: {args.dot}")
    if args.fig:
        render_run_figure(run, args.fig, structure)
        print(f"fig: {args.fig}")
    return 0


def _parse_agent_list(text: str | None) -> tuple[int, ...]:
    if not text:
        raise ScenarioError("classic structures need --agents")
    try:
        return tuple(int(part.strip()) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ScenarioError(f"malformed agent list {text!r}") from exc


def _parse_interval(text: str | None) -> tuple[int, int]:
    if not text:
        raise ScenarioError("classic structures need --interval t:t2")
    left, sep, right = text.partition(":")
    if not sep:
        raise ScenarioError(f"malformed interval {text!r}, expected t:t2")
    try:
        return (int(left), int(right))
    except ValueError as exc:
        raise ScenarioError(f"malformed interval {text!r}") from exc


SUITES = ("nested", "ck", "classic", "wtr", "ttr", "lemmas")


def cmd_verify(args: argparse.Namespace) -> int:
    loaded, system = _load(args)
    if args.suite == "all":
        # coordination suites only apply when the scenario carries a matching
        # instance; the generic suites always run
        selected = ["nested", "ck", "classic", "lemmas"]
        if loaded.instance is not None:
            if loaded.instance.kind in (Kind.WTR,):
                selected.append("wtr")
            if loaded.instance.kind in (Kind.TTR, Kind.SR):
                selected.append("ttr")
    else:
        selected = [args.suite]
    reports = []
    for suite in selected:
        if suite == "nested":
            reports.append(harness.check_nested_gain(system, args.max_chain))
        elif suite == "ck":
            reports.append(harness.check_ck_gain(system, args.max_set))
        elif suite == "classic":
            reports.append(harness.check_classic_gain(system, args.max_chain, args.max_set))
        elif suite == "lemmas":
            reports.append(harness.check_logic_lemmas(system))
        elif suite in ("wtr", "ttr"):
            inst = loaded.instance
            if inst is None:
                raise ScenarioError(f"suite {suite} requires an instance section")
            if suite == "wtr":
                if inst.kind is not Kind.WTR:
                    raise ScenarioError(
                        f"suite wtr requires a WTR instance, scenario has "
                        f"{inst.kind.value}")
                reports.append(harness.check_wtr_theorem(system, inst))
            else:
                if inst.kind is Kind.SR:
                    # a simultaneous instance is the all-zero-offset tight one
                    from .coordination import CoordinationInstance
                    inst = CoordinationInstance(Kind.TTR, inst.trigger,
                                                inst.responses,
                                                (0,) * len(inst.responses))
                elif inst.kind is not Kind.TTR:
                    raise ScenarioError(
                        f"suite ttr requires a TTR or SR instance, scenario "
                        f"has {inst.kind.value}")
                reports.append(harness.check_ttr_theorem(system, inst))
    for report in reports:
        for line in report.to_lines():
            print(line)
        print()
    ok = all(r.acceptable for r in reports)
    print(f"overall: {'pass' if ok else 'fail'}")
    return 0 if ok else 1


def cmd_solve(args: argparse.Namespace) -> int:
    loaded, system = _load(args)
    if loaded.instance is None:
        raise ScenarioError("solve requires an instance section")
    verdict = solves(system, loaded.instance)
    print(verdict.to_line())
    if verdict.solved:
        return 0
    run = _run_by_id(system, verdict.counterexample.run_id)
    for line in run_to_lines(run):
        print(line)
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epimc",
        description="Enumerate bounded-delay message-passing runs and check "
                    "node-based knowledge, causal structures, and timed coordination.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        p.add_argument("--cap", type=int, default=None,
                       help="override the scenario's enumeration cap")

    p = sub.add_parser("enumerate", help="count runs, optionally dump them")
    add_scenario(p)
    p.add_argument("--dump", action="store_true", help="print the canonical run dump")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("check", help="evaluate a formula on every run")
    add_scenario(p)
    p.add_argument("--formula", required=True, help="formula text, e.g. 'K[1@2] tocc(0, es)'")
    p.add_argument("--run", type=int, default=None, help="restrict to one run id")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("find", help="search one run for a communication structure")
    add_scenario(p)
    p.add_argument("--run", type=int, required=True, help="run id")
    p.add_argument("--structure", required=True,
                   choices=("centipede", "broom", "classic-centipede", "classic-broom"))
    p.add_argument("--targets", help="comma-separated nodes i@t (uneven structures)")
    p.add_argument("--origin", help="origin node i@t (uneven broom)")
    p.add_argument("--agents", help="comma-separated agents (classic structures)")
    p.add_argument("--interval", help="interval t:t2 (classic structures)")
    p.add_argument("--dot", help="write a DOT diagram to this path")
    p.add_argument("--fig", help="render a figure (png/pdf) to this path")
    p.set_defaults(func=cmd_find)

    p = sub.add_parser("verify", help="run theorem suites and report violations")
    add_scenario(p)
    p.add_argument("--suite", default="all", choices=("all",) + SUITES)
    p.add_argument("--max-chain", type=int, default=3,
                   help="nesting cap for knowledge chains (default 3)")
    p.add_argument("--max-set", type=int, default=3,
                   help="size cap for common-knowledge node sets (default 3)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", help="check the scenario's instance against its policy")
    add_scenario(p)
    p.set_defaults(func=cmd_solve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
