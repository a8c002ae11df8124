""" dimensional signatures over the seven SI base dimensions.

Exponents are kept as Fractions: sqrt() of a length is length^(1/2), and the Pi group
nullspace is computed exactly from these vectors.

The unit tags understood by the expression language are coherent SI units (conversion
factor 1), so a tag only contributes a dimension, never a scaling.
"""
from fractions import Fraction

from .errors import ParseError

BASE_KEYS = ('M', 'L', 'T', 'I', 'Th', 'N', 'J')
BASE_NAMES = ('mass', 'length', 'time', 'current', 'temperature', 'amount', 'luminosity')
BASE_SYMBOLS = ('kg', 'm', 's', 'A', 'K', 'mol', 'cd')


class Dimension(object):
    __slots__ = ('exponents',)

    def __init__(self, exponents=None):
        if exponents is None:
            exponents = (0,) * 7
        exponents = tuple(Fraction(e) for e in exponents)
        if len(exponents) != 7:
            raise ValueError("a dimension has exactly 7 exponents, got %d" % len(exponents))
        object.__setattr__(self, 'exponents', exponents)

    def __setattr__(self, key, value):
        raise AttributeError("Dimension is immutable")

    @classmethod
    def from_mapping(cls, mapping):
        """
        :param mapping: dict {'M': '1', 'L': '-1/2', ...}, omitted keys are 0
        :return: Dimension
        """
        if mapping is None:
            return DIMENSIONLESS
        unknown = set(mapping) - set(BASE_KEYS)
        if unknown:
            raise ValueError("unknown base dimension(s): %s" % ', '.join(sorted(unknown)))
        return cls([Fraction(str(mapping.get(k, 0))) for k in BASE_KEYS])

    def to_mapping(self):
        return {k: str(e) for k, e in zip(BASE_KEYS, self.exponents) if e != 0}

    @property
    def dimensionless(self):
        return all(e == 0 for e in self.exponents)

    def __mul__(self, other):
        return Dimension([a + b for a, b in zip(self.exponents, other.exponents)])

    def __truediv__(self, other):
        return Dimension([a - b for a, b in zip(self.exponents, other.exponents)])

    def __pow__(self, power):
        power = Fraction(power)
        return Dimension([e * power for e in self.exponents])

    def __eq__(self, other):
        return isinstance(other, Dimension) and self.exponents == other.exponents

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(self.exponents)

    def __repr__(self):
        return "Dimension(%s)" % self

    def __str__(self):
        if self.dimensionless:
            return '1'
        terms = []
        for symbol, e in zip(BASE_SYMBOLS, self.exponents):
            if e == 1:
                terms.append(symbol)
            elif e != 0:
                terms.append("%s^%s" % (symbol, e if e.denominator == 1 else "(%s)" % e))
        return '*'.join(terms)


DIMENSIONLESS = Dimension()


def _base(index):
    exps = [0] * 7
    exps[index] = 1
    return Dimension(exps)


MASS, LENGTH, TIME, CURRENT, TEMPERATURE, AMOUNT, LUMINOSITY = [_base(i) for i in range(7)]

UNITS = {
    'kg': MASS,
    'm': LENGTH,
    's': TIME,
    'A': CURRENT,
    'K': TEMPERATURE,
    'mol': AMOUNT,
    'cd': LUMINOSITY,
    'N': MASS * LENGTH / TIME ** 2,
    'Pa': MASS / LENGTH / TIME ** 2,
    'J': MASS * LENGTH ** 2 / TIME ** 2,
    'W': MASS * LENGTH ** 2 / TIME ** 3,
    'Hz': DIMENSIONLESS / TIME,
}


class _UnitReader(object):
    # unit := factor (('*'|'/') factor)* ; factor := atom ('^' int)? ; atom := symbol | '1' | '(' unit ')'

    def __init__(self, text):
        self.text = text
        self.pos = 0

    def peek(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ''

    def read_unit(self):
        dim = self.read_factor()
        while self.peek() in ('*', '/', '.'):
            op = self.text[self.pos]
            self.pos += 1
            rhs = self.read_factor()
            dim = dim / rhs if op == '/' else dim * rhs
        return dim

    def read_factor(self):
        dim = self.read_atom()
        if self.peek() == '^':
            self.pos += 1
            self.peek()
            start = self.pos
            if self.pos < len(self.text) and self.text[self.pos] in '+-':
                self.pos += 1
            while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] == '/'):
                self.pos += 1
            try:
                dim = dim ** Fraction(self.text[start:self.pos])
            except (ValueError, ZeroDivisionError):
                raise ParseError("bad unit exponent '%s'" % self.text[start:self.pos], start)
        return dim

    def read_atom(self):
        c = self.peek()
        if c == '(':
            self.pos += 1
            dim = self.read_unit()
            if self.peek() != ')':
                raise ParseError("expected ')' in unit", self.pos)
            self.pos += 1
            return dim
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum()):
            self.pos += 1
        symbol = self.text[start:self.pos]
        if symbol == '1':
            return DIMENSIONLESS
        if symbol not in UNITS:
            raise ParseError("unknown unit '%s'" % symbol, start)
        return UNITS[symbol]


def parse_unit(text):
    """
    parse a unit tag such as 'kg/s' or 'm/s^2' into its Dimension

    :param text: str
    :return: Dimension
    """
    reader = _UnitReader(text)
    dim = reader.read_unit()
    if reader.peek():
        raise ParseError("trailing characters in unit '%s'" % text, reader.pos)
    return dim
