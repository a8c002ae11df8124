""" graph rewrite rules: typed, injective subgraph matching with attribute predicates, and
single-pushout style application with dangling-edge deletion.

    {"name": "SCRsystem",
     "lhs": {"nodes": [{"pid": "e", "class": "CombustionEngine"}], "edges": []},
     "rhs": {"nodes": [{"pid": "e", "class": "CombustionEngine"},
                       {"pid": "s", "class": "SCRSystem", "assign": {"residenceTime": "0.05 [s]"}}],
             "edges": [["e", "exhaustLine", "s"]]},
     "mode": "first", "required": true}

Assignment expressions see the matched nodes as pid.attr and the run parameters as
params.name; where-predicates see the attributes of their own node by bare name.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx
from networkx.algorithms import isomorphism as iso

from .design_graph import Edge
from .dimension import BOOLEAN, infer
from .errors import DimensionError, EvaluationError, GraphError, LoadError, ParseError, StaleMatchError
from .expressions import evaluate, names, parse, to_text
from .vocabulary import read_document

logger = logging.getLogger(__name__)

MODES = ('first', 'forall')


@dataclass
class PatternNode:
    pid: str
    cls: str
    where: Optional[object] = None
    assign: Dict[str, object] = field(default_factory=dict)


@dataclass
class Rule:
    name: str
    lhs_nodes: List[PatternNode]
    lhs_edges: List[Tuple[str, str, str]]
    rhs_nodes: List[PatternNode]
    rhs_edges: List[Tuple[str, str, str]]
    mode: str = 'first'
    required: bool = False
    source: Optional[str] = None

    @property
    def lhs_pids(self):
        return [n.pid for n in self.lhs_nodes]

    @property
    def rhs_pids(self):
        return [n.pid for n in self.rhs_nodes]

    @property
    def preserved(self):
        return [pid for pid in self.lhs_pids if pid in self.rhs_pids]

    @property
    def deleted(self):
        return [pid for pid in self.lhs_pids if pid not in self.rhs_pids]

    @property
    def created(self):
        return [pid for pid in self.rhs_pids if pid not in self.lhs_pids]


@dataclass(frozen=True)
class Match:
    items: Tuple[Tuple[str, int], ...] = ()  # (pid, NodeId) sorted by pid

    @classmethod
    def from_mapping(cls, mapping):
        return cls(tuple(sorted(mapping.items())))

    def __getitem__(self, pid):
        return dict(self.items)[pid]

    def __len__(self):
        return len(self.items)

    def as_dict(self):
        return dict(self.items)

    def key(self):
        return tuple(nid for _, nid in self.items)


@dataclass
class Delta:
    created_nodes: List[int] = field(default_factory=list)
    deleted_nodes: List[int] = field(default_factory=list)
    created_edges: list = field(default_factory=list)
    deleted_edges: list = field(default_factory=list)
    updated: List[Tuple[int, str]] = field(default_factory=list)

    def merge(self, other):
        self.created_nodes += other.created_nodes
        self.deleted_nodes += other.deleted_nodes
        self.created_edges += other.created_edges
        self.deleted_edges += other.deleted_edges
        self.updated += other.updated
        return self

    @property
    def empty(self):
        return not (self.created_nodes or self.deleted_nodes or self.created_edges
                    or self.deleted_edges or self.updated)

    def as_dict(self):
        return {
            'created_nodes': list(self.created_nodes),
            'deleted_nodes': list(self.deleted_nodes),
            'created_edges': [e.as_dict() for e in self.created_edges],
            'deleted_edges': [e.as_dict() for e in self.deleted_edges],
            'updated': [[nid, name] for nid, name in self.updated],
        }


# ~~~~~ loading ~~~~~

def _read_edges(entries, where, problems):
    edges = []
    for entry in entries:
        if isinstance(entry, dict):
            entry = (entry.get('source'), entry.get('assoc'), entry.get('target'))
        if len(entry) != 3:
            problems.append("%s: edge %r must be [source, assoc, target]" % (where, entry))
            continue
        edges.append(tuple(entry))
    return edges


def load_rule(document, schema, params=None, source=None):
    """
    parse and check a rule against the schema

    :param document: JSON text or decoded dict
    :param params: dict name -> (value, Dimension); when given, assignments using params are
                   dimension checked at load
    :return: Rule
    """
    data = read_document(document, source)
    name = data.get('name') or source
    where = "rule '%s'" % name
    problems = []

    def read_nodes(side):
        nodes = []
        for entry in data.get(side, {}).get('nodes', []):
            pid, cls = entry.get('pid'), entry.get('class')
            if cls not in schema.classes:
                problems.append("%s: %s node '%s' has unknown class '%s'" % (where, side, pid, cls))
                continue
            if any(n.pid == pid for n in nodes):
                problems.append("%s: duplicate %s pid '%s'" % (where, side, pid))
                continue
            predicate = None
            if entry.get('where') is not None:
                try:
                    predicate = parse(entry['where'], "%s %s.where" % (where, pid))
                    if infer(predicate, schema.attribute_context(cls), schema) != BOOLEAN:
                        problems.append("%s: where-predicate of '%s' is not boolean" % (where, pid))
                except (ParseError, DimensionError) as err:
                    problems.append("%s: %s" % (where, err))
            assign = {}
            for attr, text in sorted(entry.get('assign', {}).items()):
                try:
                    assign[attr] = parse(text if isinstance(text, str) else json.dumps(text),
                                         "%s %s.%s" % (where, pid, attr))
                except ParseError as err:
                    problems.append(str(err))
            nodes.append(PatternNode(pid, cls, predicate, assign))
        return nodes

    rule = Rule(name, read_nodes('lhs'), _read_edges(data.get('lhs', {}).get('edges', []), where, problems),
                read_nodes('rhs'), _read_edges(data.get('rhs', {}).get('edges', []), where, problems),
                data.get('mode', 'first'), bool(data.get('required', False)), source)

    if rule.mode not in MODES:
        problems.append("%s: unknown mode '%s'" % (where, rule.mode))
    for node in rule.lhs_nodes:
        if node.assign:
            problems.append("%s: assignments belong on the rhs (lhs node '%s')" % (where, node.pid))
    lhs_class = {n.pid: n.cls for n in rule.lhs_nodes}
    rhs_class = {n.pid: n.cls for n in rule.rhs_nodes}
    for pid in rule.preserved:
        if lhs_class[pid] != rhs_class[pid]:
            problems.append("%s: preserved node '%s' changes class" % (where, pid))

    for side, classes, edges in (('lhs', lhs_class, rule.lhs_edges), ('rhs', rhs_class, rule.rhs_edges)):
        for src, assoc, dst in edges:
            if src not in classes or dst not in classes:
                problems.append("%s: %s edge %s-%s->%s references an unknown pid" % (where, side, src, assoc, dst))
                continue
            association = schema.find_association(classes[src], assoc)
            if association is None:
                problems.append("%s: class '%s' declares no association '%s'" % (where, classes[src], assoc))
            elif side == 'rhs' and not schema.is_subtype(classes[dst], association.target):
                problems.append("%s: '%s' expects %s, pid '%s' is a %s"
                                % (where, assoc, association.target, dst, classes[dst]))
            elif side == 'lhs' and not (schema.is_subtype(classes[dst], association.target)
                                        or schema.is_subtype(association.target, classes[dst])):
                problems.append("%s: lhs edge '%s' can never reach a %s" % (where, assoc, classes[dst]))
        if len(set(edges)) != len(edges):
            problems.append("%s: duplicate %s edge" % (where, side))

    for node in rule.rhs_nodes:
        for attr, expr in node.assign.items():
            try:
                check_assignment(rule, schema, node, attr, expr, params)
            except (DimensionError, GraphError) as err:
                problems.append("%s: %s" % (where, err))

    if problems:
        raise LoadError(problems[0], problems)
    return rule


def assignment_context(rule, schema, params=None):
    context = {}
    for node in rule.lhs_nodes:
        for attr, kind in schema.attribute_context(node.cls).items():
            context["%s.%s" % (node.pid, attr)] = kind
    for name, (_, dim) in (params or {}).items():
        context["params.%s" % name] = dim
    return context


def check_assignment(rule, schema, node, attr, expr, params=None):
    """ the assigned expression must have the kind and dimension of the target attribute """
    target = schema.find_attribute(node.cls, attr)
    if target is None:
        raise GraphError("class '%s' has no attribute '%s'" % (node.cls, attr))
    refs = names(expr)
    if params is None and any(r.startswith('params.') for r in refs):
        return
    unknown = [r for r in refs if r not in assignment_context(rule, schema, params)]
    if unknown:
        raise GraphError("assignment %s.%s references unknown %s" % (node.pid, attr, ', '.join(sorted(unknown))))
    kind = infer(expr, assignment_context(rule, schema, params), schema)
    wanted = target.dimension if target.kind == 'number' else target.kind
    if kind != wanted:
        raise DimensionError("assignment %s.%s has %s, expected %s" % (node.pid, attr, kind, wanted), to_text(expr))


# ~~~~~ matching ~~~~~

def pattern_graph(rule):
    pattern = nx.MultiDiGraph()
    for node in rule.lhs_nodes:
        pattern.add_node(node.pid, cls=node.cls)
    for src, assoc, dst in rule.lhs_edges:
        pattern.add_edge(src, dst, key=assoc)
    return pattern


def _node_lookup(graph, nid):
    attrs = graph.attrs(nid)
    return attrs.get


def _where_holds(rule, graph, mapping):
    for node in rule.lhs_nodes:
        if node.where is None:
            continue
        value = evaluate(node.where, _node_lookup(graph, mapping[node.pid]))
        if value is not True:
            return False
    return True


def find_matches(rule, graph):
    """
    all injective, type-conforming morphisms of the lhs into the graph that carry every lhs
    edge and satisfy the where-predicates, in canonical order

    :return: list of Match
    """
    if not rule.lhs_nodes:
        return [Match()]

    schema = graph.schema
    matcher = iso.MultiDiGraphMatcher(
        graph.graph, pattern_graph(rule),
        node_match=lambda host, pat: schema.is_subtype(host['cls'], pat['cls']),
        edge_match=lambda host, pat: set(pat).issubset(host),
    )
    matches = []
    for mapping in matcher.subgraph_monomorphisms_iter():
        binding = {pid: nid for nid, pid in mapping.items()}
        try:
            if _where_holds(rule, graph, binding):
                matches.append(Match.from_mapping(binding))
        except EvaluationError as err:
            logger.debug("rule %s: predicate not evaluable on %s: %s", rule.name, binding, err)
    matches.sort(key=Match.key)
    return matches


def is_valid_match(rule, match, graph):
    """ whether a (possibly stale) match still embeds the lhs into the current graph """
    binding = match.as_dict()
    if sorted(binding) != sorted(rule.lhs_pids) or len(set(binding.values())) != len(binding):
        return False
    for node in rule.lhs_nodes:
        nid = binding[node.pid]
        if nid not in graph or not graph.schema.is_subtype(graph.node_class(nid), node.cls):
            return False
    for src, assoc, dst in rule.lhs_edges:
        if not graph.graph.has_edge(binding[src], binding[dst], key=assoc):
            return False
    try:
        return _where_holds(rule, graph, binding)
    except EvaluationError:
        return False


# ~~~~~ application ~~~~~

def apply_rule(rule, match, graph, params=None):
    """
    rewrite the matched occurrence of the lhs into the rhs

    :param params: dict name -> (value, Dimension), visible to assignments as params.name
    :return: Delta
    """
    if not is_valid_match(rule, match, graph):
        raise StaleMatchError("rule '%s': match %s is stale" % (rule.name, match.as_dict()))
    binding = match.as_dict()
    params = params or {}

    def lookup(name):
        head, _, attr = name.partition('.')
        if head == 'params':
            if attr not in params:
                raise EvaluationError("unknown parameter '%s'" % attr)
            return params[attr][0]
        if head not in binding:
            raise EvaluationError("'%s' does not name a matched node" % name)
        return graph.get(binding[head], attr)

    # evaluate every assignment against the pre-application state
    assigned = {}
    for node in rule.rhs_nodes:
        values = {}
        for attr, expr in node.assign.items():
            check_assignment(rule, graph.schema, node, attr, expr, params)
            value = evaluate(expr, lookup)
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                value = (value, graph.schema.find_attribute(node.cls, attr).dimension)
            values[attr] = value
        assigned[node.pid] = values

    snapshot = graph.copy()
    try:
        delta = _rewrite(rule, binding, assigned, graph)
    except Exception:
        graph.restore(snapshot)
        raise
    logger.debug("applied %s at %s: %s", rule.name, binding, delta.as_dict())
    return delta


def _rewrite(rule, binding, assigned, graph):
    delta = Delta()

    for pid in rule.deleted:
        delta.deleted_edges += graph.remove_node(binding[pid])
        delta.deleted_nodes.append(binding[pid])

    kept = set(rule.rhs_edges)
    for src, assoc, dst in rule.lhs_edges:
        if src in rule.preserved and dst in rule.preserved and (src, assoc, dst) not in kept:
            edge = Edge(binding[src], assoc, binding[dst])
            if graph.has_edge(edge):
                graph.disconnect(edge)
                delta.deleted_edges.append(edge)

    nodes = dict((pid, binding[pid]) for pid in rule.preserved)
    for node in rule.rhs_nodes:
        if node.pid in nodes:
            for attr, value in sorted(assigned[node.pid].items()):
                graph.set_attr(nodes[node.pid], attr, value)
                delta.updated.append((nodes[node.pid], attr))
        else:
            nodes[node.pid] = graph.instantiate(node.cls, assigned[node.pid])
            delta.created_nodes.append(nodes[node.pid])

    for src, assoc, dst in rule.rhs_edges:
        edge = Edge(nodes[src], assoc, nodes[dst])
        if not graph.has_edge(edge):
            graph.connect(edge.source, assoc, edge.target)
            delta.created_edges.append(edge)
    delta.deleted_edges.sort()
    return delta


def run_rule(rule, graph, mode=None, params=None):
    """
    one rule call: 'first' applies the canonical first match, 'forall' applies every match
    found up front in canonical order, skipping the ones invalidated on the way

    :return: (number of matches found, Delta)
    """
    mode = mode or rule.mode
    matches = find_matches(rule, graph)
    delta = Delta()
    if not matches:
        return 0, delta
    if mode == 'first':
        return len(matches), apply_rule(rule, matches[0], graph, params)
    for match in matches:
        if not is_valid_match(rule, match, graph):
            logger.info("rule %s: skipping match %s invalidated by an earlier application",
                        rule.name, match.as_dict())
            continue
        delta.merge(apply_rule(rule, match, graph, params))
    return len(matches), delta


__all__ = ['PatternNode', 'Rule', 'Match', 'Delta', 'load_rule', 'find_matches', 'is_valid_match',
           'apply_rule', 'run_rule', 'pattern_graph', 'MODES']
