""" dimensional algebra: checking expressions, extracting dimensionless (Pi) groups and
ordering subsystems by their degrees of freedom.

Kinds are represented by the Dimension of a numeric expression, or by the strings
'boolean' and 'string' for the other two attribute kinds.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import pandas as pd
import sympy

from .errors import DesignError, DimensionError
from .expressions import (Bool, BinOp, Call, Compare, Logic, Name, Num, Query, Str, TRANSCENDENTAL,
                          Unary, Var, constant_fraction, to_text)
from .units import BASE_KEYS, DIMENSIONLESS, Dimension

logger = logging.getLogger(__name__)

BOOLEAN = 'boolean'
STRING = 'string'


def infer(expr, context, schema=None):
    """
    infer the kind of an expression by structural recursion

    :param expr: AST node
    :param context: dict name (or Var key) -> Dimension | 'boolean' | 'string'
    :param schema: Schema, needed to type graph queries
    :return: Dimension for numeric expressions, else 'boolean' or 'string'
    """
    if isinstance(expr, Num):
        return expr.dim
    if isinstance(expr, Str):
        return STRING
    if isinstance(expr, Bool):
        return BOOLEAN
    if isinstance(expr, (Name, Var)):
        key = expr.name if isinstance(expr, Name) else expr.key
        if key not in context:
            raise DimensionError("unknown name '%s'" % (expr.name if isinstance(expr, Name) else expr.label))
        return context[key]

    if isinstance(expr, Query):
        return _infer_query(expr, schema)

    if isinstance(expr, Unary):
        kind = infer(expr.operand, context, schema)
        if expr.op == 'not':
            _require_kind(kind, BOOLEAN, expr)
            return BOOLEAN
        _require_number(kind, expr)
        return kind

    if isinstance(expr, Logic):
        _require_kind(infer(expr.left, context, schema), BOOLEAN, expr)
        _require_kind(infer(expr.right, context, schema), BOOLEAN, expr)
        return BOOLEAN

    if isinstance(expr, Compare):
        left = infer(expr.left, context, schema)
        right = infer(expr.right, context, schema)
        if isinstance(left, Dimension) and isinstance(right, Dimension):
            if left != right:
                raise DimensionError("cannot compare %s with %s" % (left, right), to_text(expr))
        elif left != right:
            raise DimensionError("cannot compare %s with %s" % (left, right), to_text(expr))
        elif expr.op not in ('==', '!='):
            raise DimensionError("'%s' is not defined on %s values" % (expr.op, left), to_text(expr))
        return BOOLEAN

    if isinstance(expr, BinOp):
        left = infer(expr.left, context, schema)
        right = infer(expr.right, context, schema)
        _require_number(left, expr)
        _require_number(right, expr)
        if expr.op in ('+', '-'):
            if left != right:
                raise DimensionError("cannot add %s and %s" % (left, right), to_text(expr))
            return left
        if expr.op == '*':
            return left * right
        if expr.op == '/':
            return left / right
        # '^'
        if not right.dimensionless:
            raise DimensionError("exponent must be dimensionless", to_text(expr))
        power = constant_fraction(expr.right)
        if power is not None:
            return left ** power
        if not left.dimensionless:
            raise DimensionError("non-rational exponent on a dimensional base", to_text(expr))
        return DIMENSIONLESS

    if isinstance(expr, Call):
        kinds = [infer(a, context, schema) for a in expr.args]
        for kind in kinds:
            _require_number(kind, expr)
        if expr.func in TRANSCENDENTAL:
            if not kinds[0].dimensionless:
                raise DimensionError("%s() needs a dimensionless argument, got %s" % (expr.func, kinds[0]),
                                     to_text(expr))
            return DIMENSIONLESS
        if expr.func == 'sqrt':
            return kinds[0] ** Fraction(1, 2)
        if expr.func in ('min', 'max'):
            if kinds[0] != kinds[1]:
                raise DimensionError("%s() of %s and %s" % (expr.func, kinds[0], kinds[1]), to_text(expr))
        return kinds[0]

    raise DimensionError("cannot type %r" % (expr,))


def _infer_query(expr, schema):
    if schema is None:
        raise DimensionError("graph queries are only allowed in decision predicates", to_text(expr))
    if expr.cls not in schema.classes:
        raise DimensionError("unknown class '%s'" % expr.cls, to_text(expr))
    if expr.where is not None:
        _require_kind(infer(expr.where, schema.attribute_context(expr.cls), schema), BOOLEAN, expr.where)
    if expr.func == 'count':
        return DIMENSIONLESS
    if expr.func == 'exists':
        return BOOLEAN
    attribute = schema.find_attribute(expr.cls, expr.attr)
    if attribute is None:
        raise DimensionError("class '%s' has no attribute '%s'" % (expr.cls, expr.attr), to_text(expr))
    return attribute.dimension if attribute.kind == 'number' else attribute.kind


def _require_number(kind, expr):
    if not isinstance(kind, Dimension):
        raise DimensionError("expected a number, got a %s" % kind, to_text(expr))


def _require_kind(kind, wanted, expr):
    if kind != wanted:
        raise DimensionError("expected a %s, got %s" % (wanted, kind), to_text(expr))


def dim_of(expr, context, schema=None):
    """
    the Dimension of a numeric expression

    :param expr: AST node
    :param context: dict name -> Dimension (attribute dimensions)
    :return: Dimension
    """
    kind = infer(expr, context, schema)
    _require_number(kind, expr)
    return kind


# ~~~~~ Pi groups ~~~~~

@dataclass(frozen=True)
class PiGroup:
    """ a dimensionless product of powers; exponents are integers with gcd 1 and a
    positive first nonzero exponent """
    exponents: tuple  # ((name, int), ...) in input variable order

    def as_dict(self):
        return dict(self.exponents)

    def __getitem__(self, name):
        return dict(self.exponents)[name]

    def combined_dimension(self, dimensions):
        dim = DIMENSIONLESS
        for name, e in self.exponents:
            dim = dim * dimensions[name] ** e
        return dim

    def product_string(self):
        terms = []
        for name, e in self.exponents:
            if e == 1:
                terms.append(name)
            elif e != 0:
                terms.append("%s^%d" % (name, e))
        return '*'.join(terms) if terms else '1'

    def evaluate(self, values):
        value = 1.0
        for name, e in self.exponents:
            if e != 0:
                value *= float(values[name]) ** e
        return value

    def __str__(self):
        return self.product_string()


def dimension_matrix(variables):
    """ the 7 x n matrix of exact rational exponents, one column per variable """
    return sympy.Matrix(7, len(variables),
                        lambda i, j: sympy.Rational(variables[j][1].exponents[i].numerator,
                                                    variables[j][1].exponents[i].denominator))


def normalize(vector):
    """ integer exponents with gcd 1 and a positive leading exponent """
    fractions = [Fraction(int(sympy.fraction(x)[0]), int(sympy.fraction(x)[1])) for x in vector]
    scale = reduce(lambda a, b: a * b // math.gcd(a, b), [f.denominator for f in fractions], 1)
    ints = [int(f * scale) for f in fractions]
    divisor = reduce(math.gcd, [abs(i) for i in ints], 0) or 1
    ints = [i // divisor for i in ints]
    leading = next((i for i in ints if i != 0), 0)
    if leading < 0:
        ints = [-i for i in ints]
    return ints


def pi_groups(variables):
    """
    a normalized basis of the rational nullspace of the dimension matrix

    :param variables: list of (name, Dimension), at least one
    :return: list of PiGroup, n - rank of them
    """
    if not variables:
        raise DesignError("pi_groups needs at least one variable")
    names = [name for name, _ in variables]
    if len(set(names)) != len(names):
        raise DesignError("duplicate variable names in %s" % names)

    basis = dimension_matrix(variables).nullspace()
    groups = [PiGroup(tuple(zip(names, normalize(list(v))))) for v in basis]

    dims = dict(variables)
    for group in groups:
        assert group.combined_dimension(dims).dimensionless, group
    logger.debug("pi groups of %s: %s", names, [str(g) for g in groups])
    return groups


def pi_report(variables, groups=None):
    """
    the evaluation description: variable list, rank and groups

    :param variables: list of (name, Dimension)
    :param groups: precomputed pi_groups(variables), optional
    :return: dict
    """
    if groups is None:
        groups = pi_groups(variables)
    return {
        'variables': [{'name': name, 'dimension': dim.to_mapping()} for name, dim in variables],
        'rank': int(dimension_matrix(variables).rank()),
        'groups': [{'exponents': group.as_dict(), 'product': group.product_string()} for group in groups],
    }


def evaluate_groups(groups, values):
    """
    :param groups: list of PiGroup
    :param values: dict name -> float
    :return: list of float, the dimensionless figures
    """
    return [group.evaluate(values) for group in groups]


def class_variables(schema, cls):
    """ the numeric attributes of a class (inherited first) as (name, Dimension) pairs """
    return [(a.name, a.dimension) for a in schema.all_attributes(cls) if a.kind == 'number']


def pi_table(graph, schema, cls):
    """
    evaluate the Pi groups of a class for each of its instances

    :return: (report dict, pandas.DataFrame with one row per instance)
    """
    variables = class_variables(schema, cls)
    groups = pi_groups(variables)
    report = pi_report(variables, groups)
    rows = []
    for nid in graph.instances(cls):
        attrs = graph.attrs(nid)
        row = {'node': nid}
        for group in groups:
            members = [name for name, e in group.exponents if e != 0]
            if all(isinstance(attrs.get(name), (int, float)) for name in members):
                try:
                    row[group.product_string()] = group.evaluate(attrs)
                except (ZeroDivisionError, OverflowError):
                    row[group.product_string()] = float('nan')
            else:
                row[group.product_string()] = None
        rows.append(row)
    report['instances'] = rows
    return report, pd.DataFrame(rows, columns=['node'] + [g.product_string() for g in groups])


# ~~~~~ dimension-based design sequence ~~~~~

def design_sequence(subsystems):
    """
    begin with the subsystem that has fewer degrees of freedom

    :param subsystems: list of (name, free parameter count) or dict name -> count
    :return: list of names, ascending by count, ties broken by name
    """
    items = list(subsystems.items()) if isinstance(subsystems, dict) else list(subsystems)
    seen = set()
    for name, count in items:
        if name in seen:
            raise DesignError("duplicate subsystem name '%s'" % name)
        seen.add(name)
        if isinstance(count, bool) or not isinstance(count, int) or count < 0:
            raise DesignError("free parameter count of '%s' must be a non-negative integer" % name)
    return [name for name, _ in sorted(items, key=lambda nc: (nc[1], nc[0]))]


def dimension_from_document(entry):
    """ read {'M': '1', ...} (or None) from a document """
    try:
        return Dimension.from_mapping(entry)
    except (ValueError, ZeroDivisionError, TypeError) as err:
        raise DimensionError("bad dimension %r: %s" % (entry, err))


__all__ = ['infer', 'dim_of', 'PiGroup', 'pi_groups', 'pi_report', 'evaluate_groups', 'class_variables',
           'pi_table', 'design_sequence', 'dimension_from_document', 'BASE_KEYS', 'BOOLEAN', 'STRING']
