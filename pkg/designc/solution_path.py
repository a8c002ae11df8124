""" the solution path generator: assemble the equation network induced by the design graph,
match equations to unknowns, condense the resulting dataflow into strongly connected
components and solve them in topological order.

Singletons are solved by isolating the unknown symbolically when it occurs once under
invertible operators, otherwise by a damped 1-D Newton iteration; blocks (algebraic loops)
by damped multivariate Newton with a forward-difference Jacobian.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import networkx as nx
import numpy as np
import pandas as pd
from networkx.algorithms import bipartite
from tqdm import tqdm

from .dimension import dim_of, dimension_from_document
from .errors import (ConvergenceError, DimensionError, EvaluationError, LoadError, ParseError,
                     ResidualError, UnderdeterminedError)
from .expressions import (BinOp, Call, Num, Unary, Var, constant_fraction, count_var, evaluate, names,
                          parse_equation, substitute, to_text, variables)
from .units import DIMENSIONLESS
from .vocabulary import read_document

logger = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    tolerance: float = 1e-9
    max_iter: int = 100
    min_damping: float = 2.0 ** -20
    guesses: Dict[str, float] = field(default_factory=dict)  # by variable label or 'Class.attr'


@dataclass
class Variable:
    key: Any
    label: str
    dimension: Any = DIMENSIONLESS
    value: Optional[float] = None  # None: unknown
    guess: float = 1.0
    group: Optional[str] = None
    name: Optional[str] = None

    @property
    def known(self):
        return self.value is not None


@dataclass
class EquationInstance:
    id: str
    lhs: Any
    rhs: Any
    variables: List[Any]

    @property
    def text(self):
        return "%s == %s" % (to_text(self.lhs), to_text(self.rhs))

    def sides(self, values):
        lookup = values.get
        return evaluate(self.lhs, lookup), evaluate(self.rhs, lookup)

    def residual(self, values):
        a, b = self.sides(values)
        return a - b

    def relative_residual(self, values):
        a, b = self.sides(values)
        return abs(a - b) / (1.0 + abs(a) + abs(b))


class ConstraintNetwork(object):

    def __init__(self, variables, equations):
        """
        :param variables: list of Variable (order is kept)
        :param equations: list of EquationInstance
        """
        self.variables = {v.key: v for v in variables}
        self.equations = list(equations)

    def __len__(self):
        return len(self.equations)

    def knowns(self):
        return [k for k, v in self.variables.items() if v.known]

    def unknowns(self):
        return [k for k, v in self.variables.items() if not v.known]

    def label(self, key):
        return self.variables[key].label

    def find(self, label_or_key):
        if label_or_key in self.variables:
            return label_or_key
        for key, variable in self.variables.items():
            if variable.label == label_or_key:
                return key
        raise KeyError("no variable '%s' in the network" % (label_or_key,))

    def known_values(self):
        return {k: v.value for k, v in self.variables.items() if v.known}

    def with_values(self, values=None, guesses=None):
        """ a copy with some known values and initial guesses replaced """
        values = values or {}
        guesses = guesses or {}
        copied = []
        for key, variable in self.variables.items():
            changes = {}
            if key in values:
                changes['value'] = values[key]
            if key in guesses:
                changes['guess'] = guesses[key]
            copied.append(replace(variable, **changes))
        return ConstraintNetwork(copied, self.equations)


# ~~~~~ network assembly ~~~~~

def collect_network(graph, schema):
    """
    one equation per (node, class equation) including inherited ones, plus one equality per
    edge binding; attributes written by the solver count as unknowns again

    :return: ConstraintNetwork
    """
    equations = []
    referenced = []

    def bind(nid, name):
        key = (nid, name)
        if schema.find_attribute(graph.node_class(nid), name) is None:
            raise LoadError("equation references undeclared attribute '%s' on node %d" % (name, nid))
        if key not in referenced:
            referenced.append(key)
        return Var(key, "%s[%d].%s" % (graph.node_class(nid), nid, name))

    for nid in graph.nodes():
        cls = graph.node_class(nid)
        for owner, index, text, lhs, rhs in schema.all_equations(cls):
            mapping = {name: bind(nid, name) for name in _names(lhs, rhs)}
            lhs, rhs = substitute(lhs, mapping), substitute(rhs, mapping)
            equations.append(EquationInstance("%s.eq%d@%d" % (owner, index, nid), lhs, rhs,
                                              variables(BinOp('-', lhs, rhs))))

    for edge in graph.edges():
        association = schema.find_association(graph.node_class(edge.source), edge.assoc)
        for src, dst in association.bindings:
            lhs, rhs = bind(edge.source, src), bind(edge.target, dst)
            equations.append(EquationInstance("%s[%d->%d].%s=%s" % (edge.assoc, edge.source, edge.target, src, dst),
                                              lhs, rhs, [lhs.key, rhs.key]))

    network_variables = []
    for nid, name in referenced:
        cls = graph.node_class(nid)
        attribute = schema.find_attribute(cls, name)
        value = graph.get(nid, name)
        derived = graph.is_derived(nid, name)
        guess = attribute.default if attribute.default is not None else 1.0
        if derived and value is not None:
            guess = value
        network_variables.append(Variable(
            (nid, name), "%s[%d].%s" % (cls, nid, name), attribute.dimension,
            None if (value is None or derived) else float(value), float(guess), cls, name))

    logger.debug("collected %d equations over %d variables", len(equations), len(network_variables))
    return ConstraintNetwork(network_variables, equations)


def _names(lhs, rhs):
    return sorted(names(lhs) | names(rhs))


def network_from_document(document, source='network'):
    """
    a standalone network {variables: [{name, dimension, value?, guess?}], equations: ["a == b"]}

    :return: ConstraintNetwork
    """
    data = read_document(document, source)
    declared = []
    context = {}
    problems = []
    for entry in data.get('variables', []):
        name = entry.get('name')
        try:
            dimension = dimension_from_document(entry.get('dimension'))
        except DimensionError as err:
            problems.append("variable '%s': %s" % (name, err))
            continue
        if name in context:
            problems.append("duplicate variable '%s'" % name)
            continue
        context[name] = dimension
        value = entry.get('value')
        declared.append(Variable(name, name, dimension, None if value is None else float(value),
                                 float(entry.get('guess', 1.0)), None, name))

    equations = []
    for index, text in enumerate(data.get('equations', [])):
        where = "equation %d '%s'" % (index, text)
        try:
            lhs, rhs = parse_equation(text, where)
            mapping = {name: Var(name, name) for name in _names(lhs, rhs)}
            unknown = set(mapping) - set(context)
            if unknown:
                problems.append("%s: undeclared variable(s) %s" % (where, ', '.join(sorted(unknown))))
                continue
            lhs, rhs = substitute(lhs, mapping), substitute(rhs, mapping)
            left, right = dim_of(lhs, context), dim_of(rhs, context)
            if left != right:
                raise DimensionError("dimension mismatch %s vs %s" % (left, right), text)
        except (ParseError, DimensionError) as err:
            problems.append("%s: %s" % (where, err))
            continue
        equations.append(EquationInstance("eq%d" % index, lhs, rhs, variables(BinOp('-', lhs, rhs))))

    if problems:
        raise LoadError("%s: %s" % (source, problems[0]), problems)
    used = set(k for eq in equations for k in eq.variables)
    return ConstraintNetwork([v for v in declared if v.known or v.key in used], equations)


# ~~~~~ planning ~~~~~

@dataclass
class Component:
    kind: str  # 'singleton' | 'block'
    equations: List[int]
    outputs: List[Any]
    method: str  # 'isolate' | 'newton1d' | 'newtonNd'
    isolated: Any = None


@dataclass
class SolutionPlan:
    components: List[Component]
    residual_checks: List[int]
    underdetermined: List[Any] = field(default_factory=list)
    dropped_equations: List[int] = field(default_factory=list)

    def outputs(self):
        return [key for component in self.components for key in component.outputs]

    def as_dict(self, network):
        return {
            'components': [{
                'kind': c.kind,
                'method': c.method,
                'equations': [network.equations[i].id for i in c.equations],
                'outputs': [network.label(k) for k in c.outputs],
            } for c in self.components],
            'residual_checks': [network.equations[i].id for i in self.residual_checks],
            'underdetermined': [network.label(k) for k in self.underdetermined],
        }


def maximum_matching(network):
    """
    maximum bipartite matching of equations to the unknowns occurring in them (Hopcroft-Karp)

    :return: dict equation index -> unknown key
    """
    unknown = set(network.unknowns())
    b = nx.Graph()
    eq_nodes = [('e', i) for i in range(len(network.equations))]
    b.add_nodes_from(eq_nodes, bipartite=0)
    b.add_nodes_from((('v', k) for k in network.unknowns()), bipartite=1)
    for i, eq in enumerate(network.equations):
        b.add_edges_from((('e', i), ('v', k)) for k in eq.variables if k in unknown)
    matching = bipartite.hopcroft_karp_matching(b, top_nodes=eq_nodes)
    return {node[1]: matching[node][1] for node in eq_nodes if node in matching}


def _underdetermined_part(network, matched):
    """ unknowns and equations reachable from unmatched unknowns by alternating paths """
    eq_of = {key: i for i, key in matched.items()}
    uses = {}
    for i, eq in enumerate(network.equations):
        for key in eq.variables:
            uses.setdefault(key, []).append(i)
    start = [k for k in network.unknowns() if k not in eq_of]
    seen_vars, seen_eqs = set(start), set()
    frontier = list(start)
    while frontier:
        key = frontier.pop()
        for i in uses.get(key, []):
            if i in seen_eqs:
                continue
            seen_eqs.add(i)
            out = matched.get(i)
            if out is not None and out not in seen_vars:
                seen_vars.add(out)
                frontier.append(out)
    return start, seen_vars, seen_eqs


def plan(network, partial=False):
    """
    :param network: ConstraintNetwork
    :param partial: drop the underdetermined part instead of failing
    :return: SolutionPlan
    """
    matched = maximum_matching(network)
    unmatched, dropped_vars, dropped_eqs = _underdetermined_part(network, matched)

    if unmatched and not partial:
        labels = [network.label(k) for k in unmatched]
        involved = sorted(network.label(k) for k in dropped_vars)
        blocking = sorted(network.equations[i].id for i in dropped_eqs)
        raise UnderdeterminedError(
            "underdetermined: no equation left for %s (underdetermined subsystem: %s over %s)"
            % (', '.join(labels), ', '.join(blocking) or 'no equations', ', '.join(involved)), labels, blocking)

    matched = {i: k for i, k in matched.items() if i not in dropped_eqs}
    eq_of = {key: i for i, key in matched.items()}

    dataflow = nx.DiGraph()
    dataflow.add_nodes_from(sorted(matched))
    for j in sorted(matched):
        for key in network.equations[j].variables:
            if key in eq_of and key != matched[j]:
                dataflow.add_edge(eq_of[key], j)

    condensed = nx.condensation(dataflow)
    order = nx.lexicographical_topological_sort(condensed, key=lambda c: min(condensed.nodes[c]['members']))

    components = []
    for c in order:
        members = sorted(condensed.nodes[c]['members'])
        outputs = [matched[i] for i in members]
        if len(members) == 1:
            isolated = isolate(network.equations[members[0]], outputs[0])
            components.append(Component('singleton', members, outputs,
                                        'isolate' if isolated is not None else 'newton1d', isolated))
        else:
            components.append(Component('block', members, outputs, 'newtonNd'))

    checks = sorted(i for i in range(len(network.equations)) if i not in matched and i not in dropped_eqs)
    if unmatched:
        logger.info("partial plan: %d unknown(s) left undetermined", len(dropped_vars))
    return SolutionPlan(components, checks, sorted(dropped_vars, key=str), sorted(dropped_eqs))


# ~~~~~ symbolic isolation ~~~~~

def isolate(equation, key):
    """
    solve an equation for an unknown occurring exactly once under invertible operators

    :return: AST over the other variables, or None when isolation does not apply
    """
    lhs, rhs = equation.lhs, equation.rhs
    if count_var(lhs, key) + count_var(rhs, key) != 1:
        return None
    if count_var(lhs, key):
        return _isolate(lhs, rhs, key)
    return _isolate(rhs, lhs, key)


def _isolate(expr, target, key):
    if isinstance(expr, Var):
        return target if expr.key == key else None
    if isinstance(expr, Unary) and expr.op == '-':
        return _isolate(expr.operand, Unary('-', target), key)
    if isinstance(expr, Call):
        inverse = {'exp': lambda t: Call('ln', (t,)),
                   'ln': lambda t: Call('exp', (t,)),
                   'sqrt': lambda t: BinOp('^', t, Num(2.0, DIMENSIONLESS, '2'))}.get(expr.func)
        return _isolate(expr.args[0], inverse(target), key) if inverse else None
    if not isinstance(expr, BinOp):
        return None

    in_left = count_var(expr.left, key) > 0
    other = expr.right if in_left else expr.left
    if expr.op == '+':
        return _isolate(expr.left if in_left else expr.right, BinOp('-', target, other), key)
    if expr.op == '-':
        if in_left:
            return _isolate(expr.left, BinOp('+', target, other), key)
        return _isolate(expr.right, BinOp('-', other, target), key)
    if expr.op == '*':
        return _isolate(expr.left if in_left else expr.right, BinOp('/', target, other), key)
    if expr.op == '/':
        if in_left:
            return _isolate(expr.left, BinOp('*', target, other), key)
        return _isolate(expr.right, BinOp('/', other, target), key)
    if expr.op == '^' and in_left:
        power = constant_fraction(expr.right)
        if not power:
            return None
        inverse = 1 / power
        return _isolate(expr.left, BinOp('^', target, Num(float(inverse), DIMENSIONLESS, str(inverse))), key)
    return None


# ~~~~~ numeric solution ~~~~~

def _residuals(network, indices, values):
    f = np.empty(len(indices))
    scale = np.empty(len(indices))
    for n, i in enumerate(indices):
        a, b = network.equations[i].sides(values)
        f[n] = a - b
        scale[n] = 1.0 + abs(a) + abs(b)
    return f, scale


def newton(network, indices, keys, values, x0, options):
    """
    damped Newton on the equations `indices` for the unknowns `keys`; values is updated in place

    :return: numpy array solution
    """
    x = np.array(x0, dtype=float)

    def residuals(point):
        trial = dict(values)
        trial.update(zip(keys, point))
        f, scale = _residuals(network, indices, trial)
        if not np.all(np.isfinite(f)):
            raise EvaluationError("non-finite residual")
        return f, scale

    try:
        f, scale = residuals(x)
    except EvaluationError as err:
        raise ConvergenceError("cannot evaluate %s at the initial guess: %s" % (_ids(network, indices), err))

    for iteration in range(options.max_iter + 1):
        if np.max(np.abs(f) / scale) <= options.tolerance:
            values.update(zip(keys, x))
            logger.debug("newton converged for %s in %d iterations", _ids(network, indices), iteration)
            return x
        if iteration == options.max_iter:
            break

        jacobian = np.empty((len(indices), len(keys)))
        for j in range(len(keys)):
            h = math.sqrt(np.finfo(float).eps) * max(abs(x[j]), 1.0)
            step = x.copy()
            step[j] += h
            try:
                jacobian[:, j] = (residuals(step)[0] - f) / h
            except EvaluationError:
                step[j] = x[j] - h
                jacobian[:, j] = (f - residuals(step)[0]) / h
        try:
            dx = np.linalg.solve(jacobian, -f)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(jacobian, -f, rcond=None)[0]

        damping = 1.0
        norm = np.linalg.norm(f)
        while damping >= options.min_damping:
            candidate = x + damping * dx
            try:
                f_new, scale_new = residuals(candidate)
            except EvaluationError:
                damping /= 2.0
                continue
            if np.linalg.norm(f_new) < norm:
                x, f, scale = candidate, f_new, scale_new
                break
            damping /= 2.0
        else:
            raise ConvergenceError("newton line search failed for %s (residual %.3g)"
                                   % (_ids(network, indices), norm))

    raise ConvergenceError("newton did not converge for %s in %d iterations (residual %.3g)"
                           % (_ids(network, indices), options.max_iter, float(np.max(np.abs(f) / scale))))


def _ids(network, indices):
    return ', '.join(network.equations[i].id for i in indices)


def _initial_guess(network, key, options):
    variable = network.variables[key]
    if variable.label in options.guesses:
        return float(options.guesses[variable.label])
    if variable.group is not None and "%s.%s" % (variable.group, variable.name) in options.guesses:
        return float(options.guesses["%s.%s" % (variable.group, variable.name)])
    return variable.guess


def solve(solution_plan, network, options=None):
    """
    execute the plan component by component

    :return: dict unknown key -> value
    """
    options = options or SolverOptions()
    values = network.known_values()

    for component in solution_plan.components:
        if component.method == 'isolate':
            key = component.outputs[0]
            try:
                value = evaluate(component.isolated, values.get)
                trial = dict(values)
                trial[key] = value
                if math.isfinite(value) and \
                        network.equations[component.equations[0]].relative_residual(trial) <= options.tolerance:
                    values[key] = value
                    continue
                guess = value if math.isfinite(value) else _initial_guess(network, key, options)
            except EvaluationError:
                guess = _initial_guess(network, key, options)
            newton(network, component.equations, component.outputs, values, [guess], options)
        else:
            x0 = [_initial_guess(network, key, options) for key in component.outputs]
            newton(network, component.equations, component.outputs, values, x0, options)

    dropped = set(solution_plan.dropped_equations)
    for i, equation in enumerate(network.equations):
        if i in dropped:
            continue
        try:
            r = equation.relative_residual(values)
        except EvaluationError as err:
            raise ResidualError("equation %s cannot be evaluated: %s" % (equation.id, err), equation.id)
        if not r <= options.tolerance:
            raise ResidualError("equation %s violated after solution (relative residual %.3g): %s"
                                % (equation.id, r, equation.text), equation.id, r)

    return {key: float(values[key]) for key in solution_plan.outputs()}


def residuals(network, values):
    """ relative residual per equation id """
    merged = network.known_values()
    merged.update(values)
    found = {}
    for equation in network.equations:
        try:
            found[equation.id] = equation.relative_residual(merged)
        except EvaluationError:
            found[equation.id] = None
    return found


# ~~~~~ sensitivity ~~~~~

def sensitivity(network, output, input, options=None, step=1e-6):
    """
    central finite difference d(output)/d(input) with two full re-solves

    :param output: unknown variable key or label
    :param input: known variable key or label
    :return: float
    """
    output, input = network.find(output), network.find(input)
    if not network.variables[input].known:
        raise UnderdeterminedError("sensitivity input %s is not a known" % network.label(input))
    if output == input:
        return 1.0
    if network.variables[output].known:
        return 0.0

    base_plan = plan(network)
    base = solve(base_plan, network, options)
    up, down, h = _perturbed_solves(network, base_plan, base, input, options, step)
    return (up[output] - down[output]) / (2.0 * h)


def _perturbed_solves(network, base_plan, base, input, options, step):
    x = network.variables[input].value
    h = step * max(abs(x), 1.0)
    guesses = dict(base)
    up = solve(base_plan, network.with_values({input: x + h}, guesses), options)
    down = solve(base_plan, network.with_values({input: x - h}, guesses), options)
    return up, down, h


def sensitivity_table(network, outputs=None, inputs=None, options=None, step=1e-6, progress=False):
    """
    all partial derivatives of outputs with respect to inputs, with normalized elasticities
    (x / y) * dy/dx; the largest elasticities (the critical design drivers) come first

    :return: pandas.DataFrame
    """
    base_plan = plan(network)
    base = solve(base_plan, network, options)
    outputs = [network.find(o) for o in outputs] if outputs else base_plan.outputs()
    inputs = [network.find(i) for i in inputs] if inputs else network.knowns()

    rows = []
    for input in tqdm(inputs, disable=not progress):
        up, down, h = _perturbed_solves(network, base_plan, base, input, options, step)
        x = network.variables[input].value
        for output in outputs:
            derivative = (up[output] - down[output]) / (2.0 * h)
            y = base[output]
            rows.append({
                'output': network.label(output),
                'input': network.label(input),
                'derivative': derivative,
                'elasticity': derivative * x / y if y != 0 else float('nan'),
            })
    table = pd.DataFrame(rows, columns=['output', 'input', 'derivative', 'elasticity'])
    if len(table):
        order = table['elasticity'].abs().fillna(-1.0).sort_values(ascending=False, kind='mergesort').index
        table = table.loc[order].reset_index(drop=True)
    return table


def degrees_of_freedom(network, group=None):
    """
    unmatched unknowns per subsystem (the free parameters left to fix)

    :param group: callable key -> subsystem name, defaults to the variable's class
    :return: dict name -> count
    """
    if group is None:
        group = lambda key: network.variables[key].group or str(key)
    matched = set(maximum_matching(network).values())
    counts = {}
    for key in network.unknowns():
        name = group(key)
        counts[name] = counts.get(name, 0) + (0 if key in matched else 1)
    return counts


# ~~~~~ graph-level helpers ~~~~~

@dataclass
class Solution:
    network: ConstraintNetwork
    plan: SolutionPlan
    values: Dict[Any, float]

    def as_dict(self):
        return {
            'plan': self.plan.as_dict(self.network),
            'values': {self.network.label(k): v for k, v in self.values.items()},
            'residuals': residuals(self.network, self.values),
        }


def solve_graph(graph, schema, options=None, partial=False):
    """ collect, plan, solve and write the values back into the graph as derived values """
    network = collect_network(graph, schema)
    solution_plan = plan(network, partial=partial)
    values = solve(solution_plan, network, options)
    for (nid, name), value in values.items():
        graph.set_attr(nid, name, value, derived=True)
    logger.info("solved %d unknown(s) in %d component(s)", len(values), len(solution_plan.components))
    return Solution(network, solution_plan, values)


__all__ = ['SolverOptions', 'Variable', 'EquationInstance', 'ConstraintNetwork', 'Component', 'SolutionPlan',
           'Solution', 'collect_network', 'network_from_document', 'maximum_matching', 'plan', 'isolate',
           'solve', 'residuals', 'newton', 'sensitivity', 'sensitivity_table', 'degrees_of_freedom',
           'solve_graph']
