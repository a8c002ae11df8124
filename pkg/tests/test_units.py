from fractions import Fraction

import pytest

from designc.errors import ParseError
from designc.units import DIMENSIONLESS, LENGTH, MASS, TIME, Dimension, parse_unit


def test_coherent_units():
    assert parse_unit('kg/s') == MASS / TIME
    assert parse_unit('N') == MASS * LENGTH / TIME ** 2
    assert parse_unit('Pa') == parse_unit('N/m^2')
    assert parse_unit('kg/m^3') == MASS / LENGTH ** 3
    assert parse_unit('1') == DIMENSIONLESS
    assert parse_unit('m/s^2') == parse_unit('m*s^-2')


def test_unknown_unit():
    with pytest.raises(ParseError):
        parse_unit('furlong')


def test_rational_exponents():
    root = LENGTH ** Fraction(1, 2)
    assert root * root == LENGTH
    assert root.exponents[1] == Fraction(1, 2)


def test_mapping_round_trip():
    dim = Dimension.from_mapping({'M': '1', 'L': '-1/2'})
    assert dim.to_mapping() == {'M': '1', 'L': '-1/2'}
    assert Dimension.from_mapping(None) == DIMENSIONLESS
    with pytest.raises(ValueError):
        Dimension.from_mapping({'Q': '1'})


def test_string_form():
    assert str(MASS / TIME) == 'kg*s^-1'
    assert str(DIMENSIONLESS) == '1'


def test_immutable():
    with pytest.raises(AttributeError):
        LENGTH.exponents = ()
