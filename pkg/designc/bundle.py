""" a language bundle is a directory:

    vocabulary.json        the class diagram
    rules/*.json           one rule per file
    production.json        the activity program
    chains/*.json          process chain descriptions (optional)
    params.json            default parameters {name: "0.5 [kg/s]" | number | bool | string} (optional)
"""
import glob
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from .design_graph import DesignGraph
from .errors import DesignError, LoadError
from .expressions import parse_quantity
from .process_chain import load_chain
from .production_system import ExecutionContext, Production, execute_activity, load_production
from .rule_engine import load_rule
from .solution_path import SolverOptions
from .units import DIMENSIONLESS
from .vocabulary import Schema, load_schema, read_document

logger = logging.getLogger(__name__)

BUNDLED = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'languages')


@dataclass
class LanguageBundle:
    path: str
    schema: Schema
    rules: Dict[str, Any] = field(default_factory=dict)
    chains: Dict[str, Any] = field(default_factory=dict)
    production: Optional[Production] = None
    params: Dict[str, tuple] = field(default_factory=dict)

    @property
    def name(self):
        return os.path.basename(os.path.normpath(self.path))

    def context(self, solver_options=None, max_steps=None, tmp_root=None):
        context = ExecutionContext(self.schema, self.rules, self.chains, self.production, dict(self.params),
                                   solver_options or SolverOptions(), bundle_dir=self.path, tmp_root=tmp_root)
        if max_steps is not None:
            context.max_steps = max_steps
        return context


def bundled_language(name):
    """ path of a language shipped with the package, e.g. 'exhaust' """
    return os.path.join(BUNDLED, name)


def read_param(name, value):
    """
    :return: (value, Dimension) for numbers and quantity strings, (value, kind) otherwise
    """
    if isinstance(value, bool):
        return value, 'boolean'
    if isinstance(value, (int, float)):
        return float(value), DIMENSIONLESS
    if not isinstance(value, str):
        raise LoadError("parameter '%s': cannot read %r" % (name, value))
    try:
        return parse_quantity(value, "parameter '%s'" % name)
    except DesignError:
        return value, 'string'


def read_params(document, source='params'):
    data = read_document(document, source)
    if not isinstance(data, dict):
        raise LoadError("%s: expected an object of name -> value" % source)
    params = {}
    problems = []
    for name, value in sorted(data.items()):
        try:
            params[name] = read_param(name, value)
        except LoadError as err:
            problems.append("%s: %s" % (source, err))
    if problems:
        raise LoadError(problems[0], problems)
    return params


def merge_params(defaults, overrides):
    """ overrides replace defaults by name and must keep their dimension (or kind) """
    merged = dict(defaults)
    problems = []
    for name, (value, kind) in sorted(overrides.items()):
        if name in defaults and defaults[name][1] != kind:
            problems.append("parameter '%s': override has %s, expected %s" % (name, kind, defaults[name][1]))
            continue
        merged[name] = (value, kind)
    if problems:
        raise LoadError(problems[0], problems)
    return merged


def _read_file(path):
    with open(path) as f:
        return f.read()


def load_bundle(path, overrides=None):
    """
    load every document of a bundle; all unresolved references are reported together

    :param overrides: dict name -> raw value, or the path of a params document
    :return: LanguageBundle
    """
    if not os.path.isdir(path):
        raise LoadError("bundle '%s' is not a directory" % path)
    problems = []

    def collect(err, where):
        if isinstance(err, LoadError):
            problems.extend("%s: %s" % (where, p) for p in err.problems)
        else:
            problems.append("%s: %s" % (where, err))

    try:
        schema = load_schema(_read_file(os.path.join(path, 'vocabulary.json')), 'vocabulary.json')
    except (OSError, DesignError) as err:
        collect(err, os.path.join(path, 'vocabulary.json'))
        raise LoadError(problems[0], problems)

    params = {}
    params_path = os.path.join(path, 'params.json')
    try:
        if os.path.exists(params_path):
            params = read_params(_read_file(params_path), 'params.json')
        if isinstance(overrides, str):
            overrides = read_params(_read_file(overrides), overrides)
        elif overrides:
            overrides = read_params(dict(overrides), 'overrides')
        if overrides:
            params = merge_params(params, overrides)
    except (OSError, DesignError) as err:
        collect(err, 'parameters')

    rules, rule_names = {}, set()
    for rule_path in sorted(glob.glob(os.path.join(path, 'rules', '*.json'))):
        where = os.path.relpath(rule_path, path)
        try:
            text = _read_file(rule_path)
            data = read_document(text, where)
            rule_names.add((data.get('name') if isinstance(data, dict) else None) or where)
            rule = load_rule(text, schema, params, where)
        except (OSError, DesignError) as err:
            collect(err, where)
            continue
        if rule.name in rules:
            problems.append("%s: duplicate rule name '%s'" % (where, rule.name))
        rules[rule.name] = rule

    chains = {}
    for chain_path in sorted(glob.glob(os.path.join(path, 'chains', '*.json'))):
        where = os.path.relpath(chain_path, path)
        try:
            chain = load_chain(_read_file(chain_path), schema, where)
        except (OSError, DesignError) as err:
            collect(err, where)
            continue
        if chain.name in chains:
            problems.append("%s: duplicate chain name '%s'" % (where, chain.name))
        chains[chain.name] = chain

    production = None
    try:
        production = load_production(_read_file(os.path.join(path, 'production.json')), schema,
                                     rule_names, chains, params, 'production.json')
    except (OSError, DesignError) as err:
        collect(err, 'production.json')

    if problems:
        raise LoadError("bundle '%s': %s" % (path, problems[0]), problems)
    logger.info("loaded bundle %s: %d classes, %d rules, %d chains",
                path, len(schema.classes), len(rules), len(chains))
    return LanguageBundle(os.path.abspath(path), schema, rules, chains, production, params)


def execute(bundle, solver_options=None, max_steps=None, tmp_root=None):
    """
    run the bundle's main activity on an empty design graph

    :return: (DesignGraph, Trace, ExecutionContext); errors carry the partial trace as .trace and
             the graph as .graph
    """
    graph = DesignGraph(bundle.schema)
    context = bundle.context(solver_options, max_steps, tmp_root)
    try:
        trace = execute_activity(bundle.production.main, graph, context)
    except DesignError as err:
        err.graph = graph
        err.context = context
        raise
    return graph, trace, context


__all__ = ['LanguageBundle', 'load_bundle', 'execute', 'read_params', 'read_param', 'merge_params',
           'bundled_language', 'BUNDLED']
