from .errors import *
from .units import Dimension, parse_unit
from .vocabulary import Schema, load_schema, is_subtype
from .design_graph import DesignGraph, Edge, instantiate, connect, validate, export, load
from .rule_engine import Rule, Match, load_rule, find_matches, apply_rule, run_rule
from .solution_path import (SolverOptions, ConstraintNetwork, collect_network, network_from_document, plan, solve,
                            solve_graph, sensitivity, sensitivity_table, degrees_of_freedom)
from .dimension import PiGroup, dim_of, pi_groups, pi_report, evaluate_groups, pi_table, design_sequence
from .process_chain import ChainSpec, ChainResult, load_chain, run_chain
from .production_system import (Production, Activity, Trace, ExecutionContext, load_production, execute_activity,
                                run_production, eval_decision)
from .bundle import LanguageBundle, load_bundle, execute, bundled_language
