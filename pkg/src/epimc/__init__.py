"""Epistemic model checking for synchronous message-passing systems.

The package enumerates every run a bounded-delay relay network can produce,
evaluates agent-based and node-based knowledge formulas over the resulting
possible-worlds universe, detects the centipede and broom communication
structures that nested and common knowledge require, and verifies timed
coordination problems against response policies.
"""

from .causality import (Broom, Centipede, classic_broom, classic_centipede,
                        early_delivery_nodes, find_bridge, find_uneven_broom,
                        find_uneven_centipede, is_broom, is_centipede,
                        past_cone, potentially_causes)
from .coordination import (CoordinationInstance, Kind, Response, SolveVerdict,
                           beta_node, make_broom_policy, make_chain_policy,
                           response_nodes, solves)
from .harness import (TheoremReport, check_ck_gain, check_classic_gain,
                      check_logic_lemmas, check_nested_gain,
                      check_timestamp_embedding, check_ttr_theorem,
                      check_wtr_theorem, run_mutation_selftest)
from .logic import (ck_fixpoint, eval_ck_bounded, eval_l0, eval_l1,
                    parse_formula, formula_to_text, runs_satisfying, timestamp)
from .network import (Channel, Node, Topology, TopologyError, bound_guarantee,
                      min_guarantee_time, validate_topology, wdist)
from .runs import (LocalState, Run, ScenarioSpec, System, Trigger, agree_on,
                   dump_system, enumerate_runs, find_quiet_variant,
                   local_state, occurred_by)
from .scenario import LoadedScenario, load_scenario, scenario_from_dict

__version__ = "0.1.0"
