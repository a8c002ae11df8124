""" the vocabulary of a design language: a class diagram with typed attributes, equations,
associations and single inheritance.

The vocabulary document is JSON:

    {"classes": [{"name": "SCRSystem", "parent": "ExhaustComponent",
                  "attributes": [{"name": "catalystVolume", "kind": "number",
                                  "dimension": {"L": "3"}, "default": "0.01 [m^3]"}],
                  "equations": ["catalystVolume == inFlow * residenceTime / density"],
                  "associations": [{"name": "outlet", "target": "Pipe", "min": 0, "max": "*",
                                    "bindings": [["outFlow", "inFlow"]]}]}]}
"""
import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import networkx as nx

from .dimension import dim_of, dimension_from_document
from .errors import DimensionError, ParseError, SchemaError
from .expressions import names, parse_equation, parse_quantity, to_text
from .units import DIMENSIONLESS, Dimension

logger = logging.getLogger(__name__)

KINDS = ('number', 'string', 'boolean')


@dataclass(frozen=True)
class AttributeDef:
    name: str
    kind: str
    dimension: Dimension = DIMENSIONLESS
    default: object = None


@dataclass(frozen=True)
class AssociationDef:
    name: str
    target: str
    min: int = 0
    max: Optional[int] = None  # None is unbounded
    bindings: Tuple[Tuple[str, str], ...] = ()


@dataclass
class ClassDef:
    name: str
    parent: Optional[str] = None
    attributes: List[AttributeDef] = field(default_factory=list)
    equations: List[str] = field(default_factory=list)
    associations: List[AssociationDef] = field(default_factory=list)
    parsed_equations: list = field(default_factory=list, repr=False)


class Schema(object):
    """ immutable after load_schema returns """

    def __init__(self, classes):
        self.classes = classes

    def __contains__(self, cls):
        return cls in self.classes

    def class_def(self, cls):
        try:
            return self.classes[cls]
        except KeyError:
            raise SchemaError("unknown class '%s'" % cls)

    def ancestors(self, cls):
        """ the class itself followed by its parents up to the root """
        chain = []
        current = self.class_def(cls)
        while current is not None:
            chain.append(current.name)
            current = self.classes.get(current.parent) if current.parent else None
        return chain

    def is_subtype(self, sub, sup):
        self.class_def(sup)
        return sup in self.ancestors(sub)

    def all_attributes(self, cls):
        """ inherited attributes first, in declaration order """
        attributes = []
        for name in reversed(self.ancestors(cls)):
            attributes.extend(self.classes[name].attributes)
        return attributes

    def find_attribute(self, cls, name):
        for attribute in self.all_attributes(cls):
            if attribute.name == name:
                return attribute
        return None

    def attribute_context(self, cls):
        """ dict attribute name -> Dimension (numbers) or kind string, for expression checking """
        return {a.name: (a.dimension if a.kind == 'number' else a.kind) for a in self.all_attributes(cls)}

    def all_equations(self, cls):
        """ list of (owner class, index, text, lhs, rhs), inherited equations first """
        found = []
        for name in reversed(self.ancestors(cls)):
            owner = self.classes[name]
            for index, (text, (lhs, rhs)) in enumerate(zip(owner.equations, owner.parsed_equations)):
                found.append((owner.name, index, text, lhs, rhs))
        return found

    def all_associations(self, cls):
        associations = []
        for name in reversed(self.ancestors(cls)):
            associations.extend(self.classes[name].associations)
        return associations

    def find_association(self, cls, name):
        for association in self.all_associations(cls):
            if association.name == name:
                return association
        return None


def is_subtype(schema, sub, sup):
    """
    :return: True iff sup is reachable from sub by zero or more parent links
    """
    return schema.is_subtype(sub, sup)


def read_document(document, source=None):
    """ accept JSON text, bytes or an already decoded dict """
    if isinstance(document, dict):
        return document
    if isinstance(document, bytes):
        document = document.decode('utf-8')
    try:
        return json.loads(document)
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, err.pos, source)


def check_literal(kind, dimension, value, where):
    """
    check (and normalize) a literal against an attribute kind and dimension

    :return: the value as stored in the design graph
    """
    if kind == 'number':
        if isinstance(value, str):
            number, dim = parse_quantity(value, where)
            if dim != dimension:
                raise DimensionError("expected %s, got %s" % (dimension, dim), where)
            return number
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError("%s: expected a number, got %r" % (where, value))
        return float(value)
    if kind == 'string':
        if not isinstance(value, str):
            raise SchemaError("%s: expected a string, got %r" % (where, value))
        return value
    if not isinstance(value, bool):
        raise SchemaError("%s: expected a boolean, got %r" % (where, value))
    return value


def _bound(value):
    """ an integer multiplicity bound, or None when the value is not one """
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return None
    return None


def _is_binding(pair):
    return isinstance(pair, (list, tuple)) and len(pair) == 2 and all(isinstance(p, str) for p in pair)


def _read_class(entry, problems):
    if not isinstance(entry, dict):
        problems.append("class entry %r is not an object" % (entry,))
        return None
    name = entry.get('name')
    if not isinstance(name, str) or not name:
        problems.append("class without a name: %r" % (entry,))
        return None

    attributes = []
    for a in entry.get('attributes', []):
        if not isinstance(a, dict):
            problems.append("class '%s': attribute entry %r is not an object" % (name, a))
            continue
        where = "%s.%s" % (name, a.get('name'))
        kind = a.get('kind', 'number')
        if kind not in KINDS:
            problems.append("%s: unknown kind '%s'" % (where, kind))
            continue
        try:
            dimension = dimension_from_document(a.get('dimension')) if kind == 'number' else DIMENSIONLESS
            if kind != 'number' and a.get('dimension'):
                problems.append("%s: only numbers carry a dimension" % where)
            default = a.get('default')
            if default is not None:
                default = check_literal(kind, dimension, default, where)
        except (DimensionError, ParseError, SchemaError) as err:
            problems.append("%s: %s" % (where, err))
            continue
        attributes.append(AttributeDef(a.get('name'), kind, dimension, default))

    associations = []
    for s in entry.get('associations', []):
        if not isinstance(s, dict):
            problems.append("class '%s': association entry %r is not an object" % (name, s))
            continue
        where = "%s.%s" % (name, s.get('name'))
        lower, upper = _bound(s.get('min', 0)), s.get('max', '*')
        if upper != '*':
            upper = _bound(upper)
        if lower is None or upper is None:
            problems.append("%s: multiplicity bounds must be integers (or '*' for max), got [%r, %r]"
                            % (where, s.get('min', 0), s.get('max', '*')))
            continue
        bindings = s.get('bindings', [])
        if not isinstance(bindings, list) or not all(_is_binding(pair) for pair in bindings):
            problems.append("%s: bindings must be a list of [attribute, target attribute] pairs, got %r"
                            % (where, bindings))
            continue
        associations.append(AssociationDef(
            s.get('name'), s.get('target'), lower,
            None if upper == '*' else upper,
            tuple(tuple(pair) for pair in bindings),
        ))

    return ClassDef(name, entry.get('parent'), attributes, list(entry.get('equations', [])), associations)


def load_schema(document, source='vocabulary'):
    """
    parse and validate a vocabulary document; forward references are allowed

    :param document: JSON text or decoded dict
    :param source: label used in error messages
    :return: Schema
    """
    data = read_document(document, source)
    if not isinstance(data, dict):
        raise SchemaError("%s: expected an object with a 'classes' list" % source)
    problems = []

    classes = dict()
    for entry in data.get('classes', []):
        cls = _read_class(entry, problems)
        if cls is None:
            continue
        if cls.name in classes:
            problems.append("duplicate class name '%s'" % cls.name)
            continue
        classes[cls.name] = cls

    for cls in classes.values():
        if cls.parent is not None and cls.parent not in classes:
            problems.append("class '%s': unresolved parent '%s'" % (cls.name, cls.parent))
            cls.parent = None

    inheritance = nx.DiGraph()
    inheritance.add_nodes_from(classes)
    inheritance.add_edges_from((c.name, c.parent) for c in classes.values() if c.parent)
    cycles = sorted(sorted(cycle) for cycle in nx.simple_cycles(inheritance))
    for cycle in cycles:
        problems.append("inheritance cycle: %s" % ','.join(cycle))
    if cycles:
        raise SchemaError("%s: %s" % (source, problems[0]), problems)

    schema = Schema(classes)
    for cls in classes.values():
        _check_class(schema, cls, problems)

    if problems:
        raise SchemaError("%s: %s" % (source, problems[0]), problems)
    logger.debug("loaded %d classes from %s", len(classes), source)
    return schema


def _check_class(schema, cls, problems):
    # shadowing of attributes and associations along the inheritance chain
    seen = set()
    for attribute in schema.all_attributes(cls.name):
        if attribute.name in seen:
            problems.append("class '%s': attribute '%s' shadows an inherited attribute" % (cls.name, attribute.name))
        seen.add(attribute.name)
    seen = set()
    for association in schema.all_associations(cls.name):
        if association.name in seen:
            problems.append("class '%s': association '%s' is declared twice" % (cls.name, association.name))
        seen.add(association.name)

    for association in cls.associations:
        where = "%s.%s" % (cls.name, association.name)
        if not isinstance(association.target, str) or association.target not in schema.classes:
            problems.append("%s: unresolved target '%s'" % (where, association.target))
            continue
        if association.min < 0 or (association.max is not None and association.min > association.max):
            problems.append("%s: bad multiplicity [%s, %s]" % (where, association.min, association.max or '*'))
        for src, dst in association.bindings:
            a = schema.find_attribute(cls.name, src)
            b = schema.find_attribute(association.target, dst)
            if a is None or b is None:
                problems.append("%s: binding %s=%s references an undeclared attribute" % (where, src, dst))
            elif a.kind != 'number' or b.kind != 'number':
                problems.append("%s: binding %s=%s must couple numeric attributes" % (where, src, dst))
            elif a.dimension != b.dimension:
                problems.append("%s: dimension mismatch in binding %s=%s (%s vs %s)"
                                % (where, src, dst, a.dimension, b.dimension))

    context = {a.name: a.dimension for a in schema.all_attributes(cls.name) if a.kind == 'number'}
    for index, text in enumerate(cls.equations):
        where = "%s equation %d '%s'" % (cls.name, index, text)
        try:
            lhs, rhs = parse_equation(text, where)
        except ParseError as err:
            problems.append(str(err))
            cls.parsed_equations.append((None, None))
            continue
        cls.parsed_equations.append((lhs, rhs))
        unknown = (names(lhs) | names(rhs)) - set(context)
        if unknown:
            problems.append("%s: references undeclared attribute(s) %s" % (where, ', '.join(sorted(unknown))))
            continue
        if not (names(lhs) | names(rhs)):
            problems.append("%s: references no attribute" % where)
            continue
        try:
            left = dim_of(lhs, context)
            right = dim_of(rhs, context)
        except DimensionError as err:
            problems.append("%s: %s" % (where, err))
            continue
        if left != right:
            problems.append("%s: dimension mismatch %s vs %s" % (where, left, right))
            logger.debug("rejected %s (%s == %s)", where, to_text(lhs), to_text(rhs))


__all__ = ['AttributeDef', 'AssociationDef', 'ClassDef', 'Schema', 'load_schema', 'is_subtype',
           'read_document', 'check_literal', 'KINDS']
