""" the production system: executes the activity program of a design language over the
design graph.

    {"main": "Main",
     "activities": [{"name": "Main", "steps": [
         {"rule": "Axiom"},
         {"activity": "Aftertreatment"},
         {"decision": "count(SCRSystem) == 0", "then": [{"rule": "SCRsystem"}], "else": []},
         {"loop": "attr(SCRSystem, pressureLoss) > 2000 [Pa]", "body": [...], "maxIter": 20},
         {"chain": "pressureLoss"},
         {"solve": {"partial": false}}]}]}
"""
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import networkx as nx
import pandas as pd

from .dimension import BOOLEAN, infer
from .errors import (DesignError, DimensionError, EvaluationError, LoadError, ParseError, SolverError, StepError,
                     ValidationFailure)
from .expressions import Query, evaluate, parse, to_text
from .process_chain import NodeSelector, run_chain, select
from .rule_engine import MODES, run_rule
from .solution_path import SolverOptions, collect_network, solve_graph
from .vocabulary import read_document

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 10000
DEFAULT_MAX_STEPS = 100000


@dataclass
class RuleCall:
    rule: str
    mode: Optional[str] = None
    required: Optional[bool] = None


@dataclass
class SubActivity:
    activity: str


@dataclass
class ChainCall:
    chain: str


@dataclass
class Decision:
    predicate: Any
    then: List[Any] = field(default_factory=list)
    otherwise: List[Any] = field(default_factory=list)


@dataclass
class Loop:
    predicate: Any
    body: List[Any] = field(default_factory=list)
    max_iter: int = DEFAULT_MAX_ITER


@dataclass
class Solve:
    partial: bool = False


Step = Union[RuleCall, SubActivity, ChainCall, Decision, Loop, Solve]


@dataclass
class Activity:
    name: str
    steps: List[Any] = field(default_factory=list)


@dataclass
class Production:
    activities: Dict[str, Activity]
    main: str

    def activity(self, name):
        return self.activities[name]


# ~~~~~ loading ~~~~~

class _StepReader(object):

    def __init__(self, schema, rule_names, activity_names, chain_names, params, problems):
        self.schema = schema
        self.rule_names = set(rule_names)
        self.activity_names = set(activity_names)
        self.chain_names = set(chain_names)
        self.context = {"params.%s" % name: kind for name, (_, kind) in (params or {}).items()}
        self.problems = problems
        self.calls = set()

    def steps(self, entries, where):
        if not isinstance(entries, list):
            self.problems.append("%s: steps must be a list" % where)
            return []
        steps = []
        for index, entry in enumerate(entries):
            step = self.step(entry, "%s/%d" % (where, index))
            if step is not None:
                steps.append(step)
        return steps

    def predicate(self, text, where):
        try:
            expr = parse(text, where)
            if infer(expr, self.context, self.schema) != BOOLEAN:
                self.problems.append("%s: predicate '%s' is not boolean" % (where, text))
            return expr
        except (ParseError, DimensionError) as err:
            self.problems.append("%s: %s" % (where, err))
            return None

    def step(self, entry, where):
        if isinstance(entry, str) and entry == 'solve':
            return Solve()
        if not isinstance(entry, dict):
            self.problems.append("%s: cannot read step %r" % (where, entry))
            return None

        if 'rule' in entry:
            if entry['rule'] not in self.rule_names:
                self.problems.append("%s: unknown rule '%s'" % (where, entry['rule']))
            if entry.get('mode') is not None and entry['mode'] not in MODES:
                self.problems.append("%s: unknown mode '%s'" % (where, entry['mode']))
            return RuleCall(entry['rule'], entry.get('mode'), entry.get('required'))
        if 'activity' in entry:
            if entry['activity'] not in self.activity_names:
                self.problems.append("%s: unknown activity '%s'" % (where, entry['activity']))
            self.calls.add(entry['activity'])
            return SubActivity(entry['activity'])
        if 'chain' in entry:
            if entry['chain'] not in self.chain_names:
                self.problems.append("%s: unknown chain '%s'" % (where, entry['chain']))
            return ChainCall(entry['chain'])
        if 'decision' in entry:
            return Decision(self.predicate(entry['decision'], where),
                            self.steps(entry.get('then', []), where + '/then'),
                            self.steps(entry.get('else', []), where + '/else'))
        if 'loop' in entry:
            bound = entry.get('maxIter', DEFAULT_MAX_ITER)
            if isinstance(bound, bool) or not isinstance(bound, int) or bound < 1:
                self.problems.append("%s: maxIter must be a positive integer" % where)
                bound = DEFAULT_MAX_ITER
            return Loop(self.predicate(entry['loop'], where), self.steps(entry.get('body', []), where + '/body'),
                        bound)
        if 'solve' in entry:
            return Solve(bool((entry['solve'] or {}).get('partial', False)))
        self.problems.append("%s: unknown step %r" % (where, sorted(entry)))
        return None


def load_production(document, schema, rule_names, chain_names, params=None, source='production'):
    """
    parse the activity program and check every reference; sub-activity calls must not recurse

    :param rule_names: names of the rules available to RuleCall steps
    :param chain_names: names of the chains available to ChainCall steps
    :param params: dict name -> (value, Dimension or kind), visible to predicates as params.name
    :return: Production
    """
    data = read_document(document, source)
    problems = []
    entries = data.get('activities', [])
    names = [a.get('name') for a in entries]
    for name in set(n for n in names if names.count(n) > 1):
        problems.append("%s: duplicate activity '%s'" % (source, name))

    reader = _StepReader(schema, rule_names, names, chain_names, params, problems)
    activities = {}
    calls = nx.DiGraph()
    for entry in entries:
        reader.calls = set()
        activity = Activity(entry.get('name'), reader.steps(entry.get('steps', []), "%s:%s" % (source, entry.get('name'))))
        activities[activity.name] = activity
        calls.add_node(activity.name)
        calls.add_edges_from((activity.name, callee) for callee in reader.calls)

    main = data.get('main', names[0] if len(names) == 1 else None)
    if main not in activities:
        problems.append("%s: main activity '%s' is not defined" % (source, main))
    for cycle in sorted(sorted(c) for c in nx.simple_cycles(calls)):
        problems.append("%s: recursive activities %s" % (source, ','.join(cycle)))

    if problems:
        raise LoadError(problems[0], problems)
    return Production(activities, main)


# ~~~~~ decisions ~~~~~

def eval_decision(predicate, graph, params=None):
    """
    evaluate a predicate against the current graph

    :param predicate: expression text or AST, boolean, may use count/exists/attr queries
    :param params: dict name -> (value, kind), visible as params.name
    :return: bool
    """
    if isinstance(predicate, str):
        predicate = parse(predicate, 'decision')
    params = params or {}

    def lookup(name):
        head, _, rest = name.partition('.')
        if head == 'params' and rest in params:
            return params[rest][0]
        raise EvaluationError("unknown name '%s' in decision" % name)

    value = evaluate(predicate, lookup, lambda q: query(q, graph))
    if not isinstance(value, bool):
        raise EvaluationError("decision %s is not boolean (got %r)" % (to_text(predicate), value))
    return value


def query(expr, graph):
    """ the count/exists/attr graph query primitives """
    if not isinstance(expr, Query):
        raise EvaluationError("not a graph query: %r" % (expr,))
    found = select(NodeSelector(expr.cls, expr.where), graph)
    if expr.func == 'count':
        return float(len(found))
    if expr.func == 'exists':
        return bool(found)
    if len(found) != 1:
        raise EvaluationError("attr(%s, %s): %d instances, expected a unique one" % (expr.cls, expr.attr, len(found)))
    value = graph.get(found[0], expr.attr)
    if value is None:
        raise EvaluationError("attr(%s, %s) is unset" % (expr.cls, expr.attr))
    return value


# ~~~~~ trace ~~~~~

@dataclass
class TraceEntry:
    index: int
    path: str
    kind: str
    name: Optional[str] = None
    matches: Optional[int] = None
    delta: Optional[dict] = None
    value: Any = None
    solved: Optional[int] = None
    chain: Optional[dict] = None
    elapsed: float = 0.0

    def as_dict(self, timings=False):
        data = {'index': self.index, 'path': self.path, 'kind': self.kind}
        for key in ('name', 'matches', 'delta', 'value', 'solved', 'chain'):
            if getattr(self, key) is not None:
                data[key] = getattr(self, key)
        if timings:
            data['elapsed'] = self.elapsed
        return data


class Trace(object):
    """ one entry per executed step, in execution order """

    def __init__(self):
        self.entries = []
        self.validation = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def add(self, path, kind, **fields):
        entry = TraceEntry(len(self.entries), path, kind, **fields)
        self.entries.append(entry)
        return entry

    def to_frame(self):
        columns = ['index', 'path', 'kind', 'name', 'matches', 'delta', 'value', 'solved', 'chain', 'elapsed']
        return pd.DataFrame([e.as_dict(timings=True) for e in self.entries], columns=columns)

    def lines(self):
        """ canonical line-delimited JSON, timings excluded """
        return [json.dumps(e.as_dict(), sort_keys=True) for e in self.entries]

    def write_jsonl(self, stream):
        for line in self.lines():
            stream.write(line + '\n')


# ~~~~~ execution ~~~~~

@dataclass
class ExecutionContext:
    schema: Any
    rules: Dict[str, Any] = field(default_factory=dict)
    chains: Dict[str, Any] = field(default_factory=dict)
    production: Optional[Production] = None
    params: Dict[str, tuple] = field(default_factory=dict)
    solver_options: SolverOptions = field(default_factory=SolverOptions)
    max_steps: int = DEFAULT_MAX_STEPS
    bundle_dir: Optional[str] = None
    tmp_root: Optional[str] = None
    steps_taken: int = 0
    last_solution: Any = None

    def tick(self, path):
        self.steps_taken += 1
        if self.steps_taken > self.max_steps:
            raise StepError("step budget of %d exhausted" % self.max_steps, path)


def execute_activity(activity, graph, context, validate=True):
    """
    run an activity's steps in order over the graph

    :param activity: Activity, or its name in context.production
    :param validate: check the final graph; a failing check raises ValidationFailure
    :return: Trace (attached as .trace to any DesignError raised on the way)
    """
    if isinstance(activity, str):
        activity = context.production.activity(activity)
    trace = Trace()
    try:
        _run_steps(activity.steps, activity.name, graph, context, trace)
        if validate:
            report = graph.validate()
            trace.validation = report.as_dict()
            if not report.ok:
                raise ValidationFailure(report)
    except DesignError as err:
        err.trace = trace
        raise
    return trace


def run_production(production, graph, context):
    context.production = production
    return execute_activity(production.main, graph, context)


def _run_steps(steps, where, graph, context, trace):
    for index, step in enumerate(steps):
        path = "%s/%d" % (where, index)
        context.tick(path)
        started = time.perf_counter()
        entry = _run_step(step, path, graph, context, trace)
        if entry is not None:
            entry.elapsed = time.perf_counter() - started


def _run_step(step, path, graph, context, trace):
    if isinstance(step, RuleCall):
        rule = context.rules[step.rule]
        mode = step.mode or rule.mode
        required = rule.required if step.required is None else step.required
        try:
            found, delta = run_rule(rule, graph, mode, context.params)
        except (SolverError, StepError):
            raise
        except DesignError as err:
            raise StepError("rule '%s': %s" % (rule.name, err), path) from err
        if not found:
            if required:
                raise StepError("required rule '%s' has no match" % rule.name, path)
            logger.info("%s: rule %s has no match, skipped", path, rule.name)
        return trace.add(path, 'rule', name=rule.name, matches=found, delta=delta.as_dict())

    if isinstance(step, SubActivity):
        entry = trace.add(path, 'activity', name=step.activity)
        _run_steps(context.production.activity(step.activity).steps, "%s:%s" % (path, step.activity),
                   graph, context, trace)
        return entry

    if isinstance(step, ChainCall):
        spec = context.chains[step.chain]
        try:
            result = run_chain(spec, graph, context.bundle_dir, context.tmp_root)
        except StepError as err:
            err.step = path
            raise
        return trace.add(path, 'chain', name=step.chain, chain=result.as_dict())

    if isinstance(step, Solve):
        solution = _solve(graph, context, step.partial)
        return trace.add(path, 'solve', solved=len(solution.values) if solution else 0)

    if isinstance(step, Decision):
        solution = _solve(graph, context, partial=True)
        value = _predicate(step.predicate, path, graph, context)
        entry = trace.add(path, 'decision', value=value, solved=len(solution.values) if solution else 0)
        _run_steps(step.then if value else step.otherwise, path + ('/then' if value else '/else'),
                   graph, context, trace)
        return entry

    if isinstance(step, Loop):
        iteration = 0
        while True:
            solution = _solve(graph, context, partial=True)
            value = _predicate(step.predicate, path, graph, context)
            trace.add(path, 'loop', value=value, solved=len(solution.values) if solution else 0)
            if not value:
                return None
            if iteration == step.max_iter:
                raise StepError("loop still running after maxIter=%d iterations" % step.max_iter, path)
            _run_steps(step.body, "%s/body" % path, graph, context, trace)
            iteration += 1
            context.tick(path)

    raise StepError("cannot execute %r" % (step,), path)


def _predicate(predicate, path, graph, context):
    try:
        return eval_decision(predicate, graph, context.params)
    except DesignError as err:
        raise StepError("predicate %s: %s" % (to_text(predicate), err), path) from err


def _solve(graph, context, partial):
    """ solve the equation network of the current graph; None when there is nothing to solve """
    if not collect_network(graph, context.schema).equations:
        return None
    solution = solve_graph(graph, context.schema, context.solver_options, partial=partial)
    if partial and solution.plan.underdetermined:
        logger.info("implicit solve left %d unknown(s) undetermined", len(solution.plan.underdetermined))
    context.last_solution = solution
    return solution


__all__ = ['RuleCall', 'SubActivity', 'ChainCall', 'Decision', 'Loop', 'Solve', 'Activity', 'Production',
           'TraceEntry', 'Trace', 'ExecutionContext', 'load_production', 'execute_activity', 'run_production',
           'eval_decision', 'query', 'DEFAULT_MAX_ITER', 'DEFAULT_MAX_STEPS']
