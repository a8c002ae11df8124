""" the expression language shared by class equations, rule predicates and assignments,
decision predicates and chain write-back values.

    <expr>  ::= <and> ('or' <and>)*
    <and>   ::= <not> ('and' <not>)*
    <not>   ::= 'not' <not> | <cmp>
    <cmp>   ::= <add> (('=='|'!='|'<'|'<='|'>'|'>=') <add>)?
    <add>   ::= <mul> (('+'|'-') <mul>)*
    <mul>   ::= <unary> (('*'|'/') <unary>)*
    <unary> ::= '-' <unary> | <power>
    <power> ::= <atom> ('^' <unary>)?
    <atom>  ::= <number> ['[' <unit> ']'] | <string> | true | false | <name>
              | <func> '(' <expr> (',' <expr>)* ')'
              | ('count'|'exists') '(' <class> ['where' <expr>] ')'
              | 'attr' '(' <class> ',' <name> ')'
              | '(' <expr> ')'

Names may be dotted (pid.attr, params.name). Each AST node keeps the position at which
its parse started so errors can point back into the source string.
"""
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional, Tuple

from .errors import EvaluationError, ParseError
from .units import DIMENSIONLESS, Dimension, parse_unit

FUNCTIONS = {
    'sin': (1, math.sin),
    'cos': (1, math.cos),
    'tan': (1, math.tan),
    'exp': (1, math.exp),
    'ln': (1, math.log),
    'sqrt': (1, math.sqrt),
    'abs': (1, abs),
    'min': (2, min),
    'max': (2, max),
}
TRANSCENDENTAL = {'sin', 'cos', 'tan', 'exp', 'ln'}
QUERIES = {'count', 'exists', 'attr'}
KEYWORDS = {'and', 'or', 'not', 'true', 'false', 'where'}
COMPARISONS = ('==', '!=', '<=', '>=', '<', '>')


# ~~~~~ abstract syntax tree ~~~~~

@dataclass(frozen=True)
class Num:
    value: float
    dim: Dimension
    text: str
    pos: int = 0


@dataclass(frozen=True)
class Str:
    value: str
    pos: int = 0


@dataclass(frozen=True)
class Bool:
    value: bool
    pos: int = 0


@dataclass(frozen=True)
class Name:
    name: str
    pos: int = 0


@dataclass(frozen=True)
class Var:
    """ a name bound to a solver variable key """
    key: Any
    label: str
    pos: int = 0


@dataclass(frozen=True)
class Unary:
    op: str
    operand: Any
    pos: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Any
    right: Any
    pos: int = 0


@dataclass(frozen=True)
class Compare:
    op: str
    left: Any
    right: Any
    pos: int = 0


@dataclass(frozen=True)
class Logic:
    op: str
    left: Any
    right: Any
    pos: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple[Any, ...]
    pos: int = 0


@dataclass(frozen=True)
class Query:
    func: str
    cls: str
    where: Optional[Any] = None
    attr: Optional[str] = None
    pos: int = 0


# ~~~~~ tokenizer ~~~~~

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<str>"[^"]*")
  | (?P<unit>\[[^\]]*\])
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*(?:\.[A-Za-z_][A-Za-z_0-9]*)*)
  | (?P<op>==|!=|<=|>=|[-+*/^(),<>])
""", re.VERBOSE)


class TokenStream(object):

    def __init__(self, text, source=None):
        self.text = text
        self.source = source
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise ParseError("unexpected character %r" % text[pos], pos, source)
            kind = m.lastgroup
            if kind != 'ws':
                self.tokens.append((kind, m.group(kind), pos))
            pos = m.end()
        self.tokens.append(('eof', '', len(text)))
        self.index = 0

    def next(self):
        return self.tokens[self.index]

    def advance(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def at(self, value):
        kind, text, _ = self.next()
        return text == value and kind in ('op', 'name')

    def eat(self, value):
        if not self.at(value):
            self.fail("expected '%s'" % value)
        return self.advance()

    def eat_name(self):
        kind, text, pos = self.next()
        if kind != 'name' or text in KEYWORDS:
            self.fail("expected a name")
        self.advance()
        return text

    def fail(self, message):
        kind, text, pos = self.next()
        found = "end of input" if kind == 'eof' else "'%s'" % text
        raise ParseError("%s, found %s" % (message, found), pos, self.source)


# ~~~~~ parser ~~~~~

def parse(text, source=None):
    """
    :param text: str expression source
    :param source: optional label (file, rule, class) used in error messages
    :return: AST node
    """
    if not isinstance(text, str):
        raise ParseError("expression must be a string, got %r" % (text,), None, source)
    tokens = TokenStream(text, source)
    expr = _parse_or(tokens)
    if tokens.next()[0] != 'eof':
        tokens.fail("unexpected trailing input")
    return expr


def parse_equation(text, source=None):
    """ parse 'lhs == rhs' into the pair (lhs, rhs) """
    expr = parse(text, source)
    if not (isinstance(expr, Compare) and expr.op == '=='):
        raise ParseError("an equation must have the form 'expr == expr'", 0, source)
    return expr.left, expr.right


def _parse_or(tokens):
    left = _parse_and(tokens)
    while tokens.at('or'):
        pos = tokens.advance()[2]
        left = Logic('or', left, _parse_and(tokens), pos)
    return left


def _parse_and(tokens):
    left = _parse_not(tokens)
    while tokens.at('and'):
        pos = tokens.advance()[2]
        left = Logic('and', left, _parse_not(tokens), pos)
    return left


def _parse_not(tokens):
    if tokens.at('not'):
        pos = tokens.advance()[2]
        return Unary('not', _parse_not(tokens), pos)
    return _parse_cmp(tokens)


def _parse_cmp(tokens):
    left = _parse_add(tokens)
    for op in COMPARISONS:
        if tokens.at(op):
            pos = tokens.advance()[2]
            return Compare(op, left, _parse_add(tokens), pos)
    return left


def _parse_add(tokens):
    left = _parse_mul(tokens)
    while tokens.at('+') or tokens.at('-'):
        _, op, pos = tokens.advance()
        left = BinOp(op, left, _parse_mul(tokens), pos)
    return left


def _parse_mul(tokens):
    left = _parse_unary(tokens)
    while tokens.at('*') or tokens.at('/'):
        _, op, pos = tokens.advance()
        left = BinOp(op, left, _parse_unary(tokens), pos)
    return left


def _parse_unary(tokens):
    if tokens.at('-'):
        pos = tokens.advance()[2]
        return Unary('-', _parse_unary(tokens), pos)
    if tokens.at('+'):
        tokens.advance()
        return _parse_unary(tokens)
    return _parse_power(tokens)


def _parse_power(tokens):
    base = _parse_atom(tokens)
    if tokens.at('^'):
        pos = tokens.advance()[2]
        return BinOp('^', base, _parse_unary(tokens), pos)
    return base


def _parse_atom(tokens):
    kind, text, pos = tokens.next()

    if kind == 'num':
        tokens.advance()
        dim = DIMENSIONLESS
        if tokens.next()[0] == 'unit':
            _, unit, upos = tokens.advance()
            try:
                dim = parse_unit(unit[1:-1])
            except ParseError as err:
                raise ParseError("bad unit tag %s: %s" % (unit, err), upos, tokens.source)
        return Num(float(text), dim, text, pos)

    if kind == 'str':
        tokens.advance()
        return Str(text[1:-1], pos)

    if kind == 'op' and text == '(':
        tokens.advance()
        expr = _parse_or(tokens)
        tokens.eat(')')
        return expr

    if kind == 'name':
        if text == 'true' or text == 'false':
            tokens.advance()
            return Bool(text == 'true', pos)
        if text in KEYWORDS:
            tokens.fail("unexpected keyword")
        tokens.advance()
        if not tokens.at('('):
            return Name(text, pos)
        if text in QUERIES:
            return _parse_query(tokens, text, pos)
        if text not in FUNCTIONS:
            raise ParseError("unknown function '%s'" % text, pos, tokens.source)
        tokens.eat('(')
        args = [_parse_or(tokens)]
        while tokens.at(','):
            tokens.advance()
            args.append(_parse_or(tokens))
        tokens.eat(')')
        arity = FUNCTIONS[text][0]
        if len(args) != arity:
            raise ParseError("%s() takes %d argument(s), got %d" % (text, arity, len(args)),
                             pos, tokens.source)
        return Call(text, tuple(args), pos)

    tokens.fail("expected an operand")


def _parse_query(tokens, func, pos):
    tokens.eat('(')
    cls = tokens.eat_name()
    where = None
    attr = None
    if func == 'attr':
        tokens.eat(',')
        attr = tokens.eat_name()
    elif tokens.at('where'):
        tokens.advance()
        where = _parse_or(tokens)
    tokens.eat(')')
    return Query(func, cls, where, attr, pos)


# ~~~~~ traversal helpers ~~~~~

def children(expr):
    if isinstance(expr, (Unary,)):
        return (expr.operand,)
    if isinstance(expr, (BinOp, Compare, Logic)):
        return (expr.left, expr.right)
    if isinstance(expr, Call):
        return expr.args
    return ()


def names(expr):
    """ the set of free names (Name nodes) of an expression; query sub-predicates are excluded """
    found = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Name):
            found.add(node.name)
        stack.extend(children(node))
    return found


def variables(expr):
    """ the ordered, de-duplicated keys of the Var nodes of an expression """
    found = []
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var) and node.key not in found:
            found.append(node.key)
        stack.extend(reversed(children(node)))
    return found


def count_var(expr, key):
    if isinstance(expr, Var):
        return int(expr.key == key)
    return sum(count_var(c, key) for c in children(expr))


def has_queries(expr):
    if isinstance(expr, Query):
        return True
    return any(has_queries(c) for c in children(expr))


def substitute(expr, mapping):
    """
    replace Name nodes by the AST given in mapping (names absent from mapping are kept)

    :param expr: AST node
    :param mapping: dict name -> AST node
    :return: new AST node
    """
    if isinstance(expr, Name):
        return mapping.get(expr.name, expr)
    if isinstance(expr, Unary):
        return Unary(expr.op, substitute(expr.operand, mapping), expr.pos)
    if isinstance(expr, (BinOp, Compare, Logic)):
        return type(expr)(expr.op, substitute(expr.left, mapping), substitute(expr.right, mapping), expr.pos)
    if isinstance(expr, Call):
        return Call(expr.func, tuple(substitute(a, mapping) for a in expr.args), expr.pos)
    return expr


def constant_fraction(expr):
    """ fold a dimensionless literal expression to an exact Fraction, or None if not constant """
    if isinstance(expr, Num):
        if not expr.dim.dimensionless:
            return None
        return Fraction(expr.text)
    if isinstance(expr, Unary) and expr.op == '-':
        value = constant_fraction(expr.operand)
        return None if value is None else -value
    if isinstance(expr, BinOp):
        a = constant_fraction(expr.left)
        b = constant_fraction(expr.right)
        if a is None or b is None:
            return None
        if expr.op == '+':
            return a + b
        if expr.op == '-':
            return a - b
        if expr.op == '*':
            return a * b
        if expr.op == '/':
            return a / b if b != 0 else None
        if expr.op == '^' and b.denominator == 1 and (a != 0 or b >= 0):
            return a ** int(b)
    return None


_PRECEDENCE = {'or': 1, 'and': 2, 'not': 3, 'cmp': 4, '+': 5, '-': 5, '*': 6, '/': 6, 'neg': 7, '^': 8}


def to_text(expr):
    """ unparse an AST (used for messages and error locations) """
    return _to_text(expr, 0)


def _to_text(expr, parent):
    if isinstance(expr, Num):
        if expr.dim.dimensionless:
            return expr.text
        return "%s [%s]" % (expr.text, expr.dim)
    if isinstance(expr, Str):
        return '"%s"' % expr.value
    if isinstance(expr, Bool):
        return 'true' if expr.value else 'false'
    if isinstance(expr, Name):
        return expr.name
    if isinstance(expr, Var):
        return expr.label
    if isinstance(expr, Call):
        return "%s(%s)" % (expr.func, ', '.join(_to_text(a, 0) for a in expr.args))
    if isinstance(expr, Query):
        if expr.func == 'attr':
            return "attr(%s, %s)" % (expr.cls, expr.attr)
        if expr.where is not None:
            return "%s(%s where %s)" % (expr.func, expr.cls, _to_text(expr.where, 0))
        return "%s(%s)" % (expr.func, expr.cls)
    if isinstance(expr, Unary):
        prec = _PRECEDENCE['not' if expr.op == 'not' else 'neg']
        text = ('not ' if expr.op == 'not' else '-') + _to_text(expr.operand, prec)
    else:
        key = 'cmp' if isinstance(expr, Compare) else expr.op
        prec = _PRECEDENCE[key]
        right_prec = prec if expr.op == '^' else prec + 1
        left_prec = prec + 1 if expr.op == '^' else prec
        text = "%s %s %s" % (_to_text(expr.left, left_prec), expr.op, _to_text(expr.right, right_prec))
    return "(%s)" % text if prec < parent else text


# ~~~~~ evaluation ~~~~~

def evaluate(expr, lookup, query=None):
    """
    evaluate an expression numerically

    :param expr: AST node
    :param lookup: callable(name or Var key) -> float | str | bool | None (None means unset)
    :param query: callable(Query) -> value, required when the expression contains graph queries
    :return: float | str | bool
    """
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, (Str, Bool)):
        return expr.value
    if isinstance(expr, (Name, Var)):
        key = expr.name if isinstance(expr, Name) else expr.key
        value = lookup(key)
        if value is None:
            raise EvaluationError("'%s' is unset" % (expr.name if isinstance(expr, Name) else expr.label))
        return value
    if isinstance(expr, Query):
        if query is None:
            raise EvaluationError("graph query %s is not available here" % to_text(expr))
        return query(expr)
    if isinstance(expr, Unary):
        value = evaluate(expr.operand, lookup, query)
        if expr.op == 'not':
            return not _as_bool(value, expr)
        return -_as_number(value, expr)
    if isinstance(expr, Logic):
        left = _as_bool(evaluate(expr.left, lookup, query), expr)
        if expr.op == 'and':
            return left and _as_bool(evaluate(expr.right, lookup, query), expr)
        return left or _as_bool(evaluate(expr.right, lookup, query), expr)
    if isinstance(expr, Compare):
        return _compare(expr, evaluate(expr.left, lookup, query), evaluate(expr.right, lookup, query))
    if isinstance(expr, BinOp):
        a = _as_number(evaluate(expr.left, lookup, query), expr)
        b = _as_number(evaluate(expr.right, lookup, query), expr)
        return _arithmetic(expr, a, b)
    if isinstance(expr, Call):
        args = [_as_number(evaluate(a, lookup, query), expr) for a in expr.args]
        try:
            return float(FUNCTIONS[expr.func][1](*args))
        except (ValueError, OverflowError) as err:
            raise EvaluationError("%s: %s" % (to_text(expr), err))
    raise EvaluationError("cannot evaluate %r" % (expr,))


def _arithmetic(expr, a, b):
    try:
        if expr.op == '+':
            return a + b
        if expr.op == '-':
            return a - b
        if expr.op == '*':
            return a * b
        if expr.op == '/':
            return a / b
        result = a ** b
        if isinstance(result, complex):
            raise EvaluationError("%s: complex result" % to_text(expr))
        return float(result)
    except ZeroDivisionError:
        raise EvaluationError("division by zero in %s" % to_text(expr))
    except OverflowError:
        raise EvaluationError("overflow in %s" % to_text(expr))


def _compare(expr, a, b):
    if isinstance(a, bool) or isinstance(b, bool) or isinstance(a, str) or isinstance(b, str):
        if type(a) is not type(b):
            raise EvaluationError("cannot compare %r with %r in %s" % (a, b, to_text(expr)))
        if expr.op not in ('==', '!='):
            raise EvaluationError("'%s' is not defined on %s values" % (expr.op, type(a).__name__))
    if expr.op == '==':
        return a == b
    if expr.op == '!=':
        return a != b
    if expr.op == '<':
        return a < b
    if expr.op == '<=':
        return a <= b
    if expr.op == '>':
        return a > b
    return a >= b


def _as_number(value, expr):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise EvaluationError("expected a number, got %r in %s" % (value, to_text(expr)))
    return float(value)


def _as_bool(value, expr):
    if not isinstance(value, bool):
        raise EvaluationError("expected a boolean, got %r in %s" % (value, to_text(expr)))
    return value


def parse_quantity(text, source=None):
    """
    parse a constant such as '0.5 [kg/s]' into (value, Dimension)

    :return: (float, Dimension)
    """
    expr = parse(text, source)
    if names(expr) or has_queries(expr):
        raise ParseError("'%s' is not a constant" % text, 0, source)
    from .dimension import dim_of
    return evaluate(expr, lambda key: None), dim_of(expr, {})
