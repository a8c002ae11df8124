""" the design graph: the central instance model of the evolving product.

Nodes are kept in a networkx MultiDiGraph keyed by NodeId (a positive integer that is never
reused); each parallel edge is keyed by its association name, so (source, assoc, target)
is unique by construction. Node data: 'cls', 'attrs' (name -> value, None for unset) and
'derived' (names of the attributes last written by the solver).
"""
import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List

import networkx as nx

from .errors import DimensionError, GraphError, ParseError, SchemaError
from .expressions import names
from .units import Dimension
from .vocabulary import check_literal, read_document

logger = logging.getLogger(__name__)

FORMATS = ('json', 'graphml', 'dot')


@dataclass(frozen=True, order=True)
class Edge:
    source: int
    assoc: str
    target: int

    def as_dict(self):
        return {'source': self.source, 'assoc': self.assoc, 'target': self.target}


@dataclass
class Node:
    id: int
    cls: str
    attrs: Dict[str, object]


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)
    unknowns: List[str] = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def as_dict(self):
        return {'violations': list(self.violations), 'unknowns': list(self.unknowns)}


def coerce_value(attribute, value, where):
    """
    check a value against an attribute definition

    :param value: literal, quantity string '0.5 [kg/s]', (number, Dimension) pair or None (unset)
    :return: the stored value
    """
    if value is None:
        return None
    if isinstance(value, tuple) and len(value) == 2 and isinstance(value[1], Dimension):
        number, dim = value
        if attribute.kind != 'number':
            raise GraphError("%s: expected a %s, got a number" % (where, attribute.kind))
        if dim != attribute.dimension:
            raise DimensionError("%s: expected %s, got %s" % (where, attribute.dimension, dim))
        stored = float(number)
    else:
        try:
            stored = check_literal(attribute.kind, attribute.dimension, value, where)
        except SchemaError as err:
            raise GraphError(str(err))
        except ParseError as err:
            raise GraphError("%s: %s" % (where, err))
    if isinstance(stored, float) and not math.isfinite(stored):
        raise GraphError("%s: %r is not a finite number" % (where, stored))
    return stored


class DesignGraph(object):

    def __init__(self, schema):
        self.schema = schema
        self.graph = nx.MultiDiGraph()
        self.next_id = 1

    # ~~~~~ nodes ~~~~~

    def instantiate(self, cls, attrs=None):
        """
        :param cls: class name
        :param attrs: dict attribute name -> value; missing attributes take class defaults
        :return: NodeId
        """
        if cls not in self.schema.classes:
            raise GraphError("unknown class '%s'" % cls)
        declared = {a.name: a for a in self.schema.all_attributes(cls)}
        attrs = dict(attrs or {})
        for name in attrs:
            if name not in declared:
                raise GraphError("class '%s' has no attribute '%s'" % (cls, name))
        values = {}
        for name, attribute in declared.items():
            if name in attrs:
                values[name] = coerce_value(attribute, attrs[name], "%s.%s" % (cls, name))
            else:
                values[name] = attribute.default

        nid = self.next_id
        self.next_id += 1
        self.graph.add_node(nid, cls=cls, attrs=values, derived=set())
        logger.debug("instantiated %s as node %d", cls, nid)
        return nid

    def remove_node(self, nid):
        """ delete a node with all incident edges; returns the deleted edges """
        self._require(nid)
        incident = sorted(set(Edge(u, k, v) for u, v, k in self.graph.in_edges(nid, keys=True))
                          | set(Edge(u, k, v) for u, v, k in self.graph.out_edges(nid, keys=True)))
        self.graph.remove_node(nid)
        return incident

    def _require(self, nid):
        if nid not in self.graph:
            raise GraphError("unknown node %s" % (nid,))
        return self.graph.nodes[nid]

    def __contains__(self, nid):
        return nid in self.graph

    def __len__(self):
        return self.graph.number_of_nodes()

    def nodes(self):
        return sorted(self.graph.nodes)

    def node(self, nid):
        data = self._require(nid)
        return Node(nid, data['cls'], dict(data['attrs']))

    def node_class(self, nid):
        return self._require(nid)['cls']

    def attrs(self, nid):
        return dict(self._require(nid)['attrs'])

    def get(self, nid, name):
        data = self._require(nid)
        if name not in data['attrs']:
            raise GraphError("node %d (%s) has no attribute '%s'" % (nid, data['cls'], name))
        return data['attrs'][name]

    def set_attr(self, nid, name, value, derived=False):
        """ write one attribute value (kind and dimension checked); returns the stored value """
        data = self._require(nid)
        attribute = self.schema.find_attribute(data['cls'], name)
        if attribute is None:
            raise GraphError("node %d (%s) has no attribute '%s'" % (nid, data['cls'], name))
        stored = coerce_value(attribute, value, "node %d %s.%s" % (nid, data['cls'], name))
        data['attrs'][name] = stored
        if derived:
            data['derived'].add(name)
        else:
            data['derived'].discard(name)
        return stored

    def is_derived(self, nid, name):
        return name in self._require(nid)['derived']

    def instances(self, cls):
        """ ids of all nodes whose class is cls or a subclass of it """
        return [nid for nid in self.nodes() if self.schema.is_subtype(self.graph.nodes[nid]['cls'], cls)]

    # ~~~~~ edges ~~~~~

    def connect(self, src, assoc, dst):
        """
        :return: Edge
        """
        source = self._require(src)
        target = self._require(dst)
        association = self.schema.find_association(source['cls'], assoc)
        if association is None:
            raise GraphError("class '%s' declares no association '%s'" % (source['cls'], assoc))
        if not self.schema.is_subtype(target['cls'], association.target):
            raise GraphError("association '%s' expects %s, node %d is a %s"
                             % (assoc, association.target, dst, target['cls']))
        if self.graph.has_edge(src, dst, key=assoc):
            raise GraphError("duplicate edge %d -%s-> %d" % (src, assoc, dst))
        self.graph.add_edge(src, dst, key=assoc)
        return Edge(src, assoc, dst)

    def disconnect(self, edge):
        if not self.has_edge(edge):
            raise GraphError("no edge %d -%s-> %d" % (edge.source, edge.assoc, edge.target))
        self.graph.remove_edge(edge.source, edge.target, key=edge.assoc)

    def has_edge(self, edge):
        return self.graph.has_edge(edge.source, edge.target, key=edge.assoc)

    def edges(self):
        return sorted(Edge(u, k, v) for u, v, k in self.graph.edges(keys=True))

    def out_edges(self, nid, assoc=None):
        return sorted(Edge(u, k, v) for u, v, k in self.graph.out_edges(nid, keys=True)
                      if assoc is None or k == assoc)

    # ~~~~~ whole-graph ~~~~~

    def copy(self):
        other = DesignGraph(self.schema)
        for nid in self.nodes():
            data = self.graph.nodes[nid]
            other.graph.add_node(nid, cls=data['cls'], attrs=dict(data['attrs']), derived=set(data['derived']))
        other.graph.add_edges_from((e.source, e.target, e.assoc) for e in self.edges())
        other.next_id = self.next_id
        return other

    def restore(self, snapshot):
        """ take over the state of a copy (used to roll back failed multi-part updates) """
        self.graph = snapshot.graph
        self.next_id = snapshot.next_id

    def to_dict(self, nodes=None):
        selected = self.nodes() if nodes is None else sorted(nodes)
        return {
            'nodes': [{'id': nid, 'class': self.graph.nodes[nid]['cls'],
                       'attrs': {k: v for k, v in sorted(self.graph.nodes[nid]['attrs'].items()) if v is not None}}
                      for nid in selected],
            'edges': [e.as_dict() for e in self.edges()] if nodes is None else [],
        }

    def export(self, format='json'):
        return export(self, format)

    def validate(self):
        return validate(self, self.schema)


def instantiate(graph, cls, attrs=None):
    return graph.instantiate(cls, attrs)


def connect(graph, src, assoc, dst):
    return graph.connect(src, assoc, dst)


def validate(graph, schema):
    """
    multiplicity violations plus unset attributes referenced by equations; attributes the solver
    can determine are listed as unknowns rather than violations

    :return: ValidationReport
    """
    from .solution_path import collect_network, plan

    report = ValidationReport()
    for nid in graph.nodes():
        cls = graph.node_class(nid)
        for association in schema.all_associations(cls):
            n = len(graph.out_edges(nid, association.name))
            if n < association.min or (association.max is not None and n > association.max):
                report.violations.append(
                    "node %d (%s): %d '%s' edge(s), expected [%d, %s]"
                    % (nid, cls, n, association.name, association.min,
                       '*' if association.max is None else association.max))

    referenced = set()
    for nid in graph.nodes():
        cls = graph.node_class(nid)
        for _, _, _, lhs, rhs in schema.all_equations(cls):
            referenced.update((nid, name) for name in names(lhs) | names(rhs))
    for edge in graph.edges():
        association = schema.find_association(graph.node_class(edge.source), edge.assoc)
        for src, dst in association.bindings:
            referenced.update([(edge.source, src), (edge.target, dst)])
    unset = sorted(key for key in referenced if graph.get(*key) is None)

    if unset:
        network = collect_network(graph, schema)
        determinable = set(plan(network, partial=True).outputs())
        for nid, name in unset:
            text = "node %d (%s): attribute '%s' is unset" % (nid, graph.node_class(nid), name)
            if (nid, name) in determinable:
                report.unknowns.append(text)
            else:
                report.violations.append(text + " and cannot be determined")
    return report


# ~~~~~ serialization ~~~~~

def _format_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return '%.17g' % value
    return str(value)


# floats travel through json.dumps as marked strings and are unquoted afterwards
_NUMBER_MARK = '\x00'
_MARKED_NUMBER = re.compile(r'"\\u0000([-+.0-9eE]+)"')


def _mark_numbers(data):
    if isinstance(data, dict):
        return {k: _mark_numbers(v) for k, v in data.items()}
    if isinstance(data, list):
        return [_mark_numbers(v) for v in data]
    if isinstance(data, float):
        text = '%.17g' % data
        return _NUMBER_MARK + (text if ('.' in text or 'e' in text) else text + '.0')
    return data


def to_json(data):
    """ indented, key-sorted JSON with every float written to 17 significant digits """
    text = json.dumps(_mark_numbers(data), indent=2, sort_keys=True)
    return _MARKED_NUMBER.sub(r'\1', text) + '\n'


def export(graph, format='json'):
    """
    deterministic serialization: nodes by id, edges by (source, assoc, target)

    :param format: 'json', 'graphml' or 'dot'
    :return: str
    """
    if format == 'json':
        return to_json(graph.to_dict())

    if format == 'graphml':
        ordered = nx.MultiDiGraph()
        for node in (graph.node(nid) for nid in graph.nodes()):
            data = {'class': node.cls}
            data.update({k: _format_value(v) for k, v in sorted(node.attrs.items()) if v is not None})
            ordered.add_node(node.id, **data)
        for edge in graph.edges():
            ordered.add_edge(edge.source, edge.target, key=edge.assoc, assoc=edge.assoc)
        return '\n'.join(nx.generate_graphml(ordered)) + '\n'

    if format == 'dot':
        lines = ['digraph design {']
        for node in (graph.node(nid) for nid in graph.nodes()):
            label = ["%d: %s" % (node.id, node.cls)]
            label += ["%s=%s" % (k, _format_value(v)) for k, v in sorted(node.attrs.items()) if v is not None]
            lines.append('  n%d [label="%s"];' % (node.id, '\\n'.join(label).replace('"', '\\"')))
        for edge in graph.edges():
            lines.append('  n%d -> n%d [label="%s"];' % (edge.source, edge.target, edge.assoc))
        lines.append('}')
        return '\n'.join(lines) + '\n'

    raise GraphError("unknown export format '%s' (expected one of %s)" % (format, ', '.join(FORMATS)))


def _entries(data, key, fields):
    entries = data.get(key, [])
    if not isinstance(entries, list):
        raise GraphError("graph document: '%s' must be a list" % key)
    for entry in entries:
        if not isinstance(entry, dict):
            raise GraphError("graph document: %s entry %r is not an object" % (key, entry))
        for name, types in fields:
            if not isinstance(entry.get(name), types) or isinstance(entry.get(name), bool):
                raise GraphError("graph document: %s entry %r has no valid '%s'" % (key, entry, name))
    return entries


def load(schema, document):
    """
    rebuild a design graph from its canonical JSON export

    :return: DesignGraph
    """
    data = read_document(document, 'graph')
    if not isinstance(data, dict):
        raise GraphError("graph document: expected an object with 'nodes' and 'edges'")
    nodes = _entries(data, 'nodes', [('id', int), ('class', str)])
    edges = _entries(data, 'edges', [('source', int), ('assoc', str), ('target', int)])

    graph = DesignGraph(schema)
    for entry in sorted(nodes, key=lambda n: n['id']):
        nid = entry['id']
        attrs = entry.get('attrs', {})
        if nid in graph.graph or nid < 1 or not isinstance(attrs, dict):
            raise GraphError("bad or duplicate node entry %r" % (entry,))
        # instantiate assigns ids monotonically; place the node under its recorded id
        graph.next_id = nid
        graph.instantiate(entry['class'], attrs)
        for name in graph.attrs(nid):
            if name not in attrs:
                graph.graph.nodes[nid]['attrs'][name] = None
    graph.next_id = max(graph.nodes(), default=0) + 1
    for entry in edges:
        graph.connect(entry['source'], entry['assoc'], entry['target'])
    return graph


__all__ = ['DesignGraph', 'Edge', 'Node', 'ValidationReport', 'instantiate', 'connect', 'validate',
           'export', 'load', 'coerce_value', 'FORMATS']
