from fractions import Fraction
from math import gcd

import numpy as np
import pytest
import sympy

from designc.dimension import design_sequence, dim_of, pi_groups, pi_report, pi_table
from designc.design_graph import DesignGraph
from designc.errors import DesignError, DimensionError
from designc.expressions import parse
from designc.units import DIMENSIONLESS, LENGTH, MASS, TIME, Dimension


def rank(columns):
    """ exact rank by fraction elimination """
    rows = [[Fraction(c[i]) for c in columns] for i in range(7)]
    r = 0
    for col in range(len(columns)):
        pivot = next((i for i in range(r, 7) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        for i in range(7):
            if i != r and rows[i][col] != 0:
                factor = rows[i][col] / rows[r][col]
                rows[i] = [a - factor * b for a, b in zip(rows[i], rows[r])]
        r += 1
    return r


def exponents(group, names):
    return [group[name] for name in names]


def test_pendulum():
    variables = [('T', TIME), ('L', LENGTH), ('g', LENGTH / TIME ** 2), ('m', MASS)]
    groups = pi_groups(variables)
    assert len(groups) == 1
    assert exponents(groups[0], 'TLgm') == [2, -1, 1, 0]
    assert str(groups[0]) == 'T^2*L^-1*g'


def test_newton():
    variables = [('F', MASS * LENGTH / TIME ** 2), ('m', MASS), ('a', LENGTH / TIME ** 2)]
    groups = pi_groups(variables)
    assert len(groups) == 1
    assert exponents(groups[0], 'Fma') == [1, -1, -1]
    np.testing.assert_allclose(groups[0].evaluate({'F': 6.0, 'm': 2.0, 'a': 3.0}), 1.0)


def test_dimensionless_variables():
    variables = [('x', DIMENSIONLESS), ('y', DIMENSIONLESS), ('z', DIMENSIONLESS)]
    groups = pi_groups(variables)
    assert [exponents(g, 'xyz') for g in groups] == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]


def test_no_group():
    assert pi_groups([('L', LENGTH), ('m', MASS)]) == []


def random_column(rng):
    """ rational exponents over mass, length and time """
    vector = [0] * 7
    for base in range(3):
        vector[base] = Fraction(int(rng.randint(-2, 3)), int(rng.choice([1, 1, 2])))
    return vector


def test_group_count_is_nullity():
    rng = np.random.RandomState(0)
    for _ in range(100):
        n = rng.randint(1, 7)
        columns = [random_column(rng) for _ in range(n)]
        variables = [('v%d' % i, Dimension(c)) for i, c in enumerate(columns)]
        groups = pi_groups(variables)
        assert len(groups) == n - rank(columns)
        dims = dict(variables)
        for group in groups:
            ints = [e for _, e in group.exponents]
            assert all(isinstance(e, int) for e in ints)
            assert next(e for e in ints if e != 0) > 0
            divisor = 0
            for e in ints:
                divisor = gcd(divisor, abs(e))
            assert divisor == 1
            assert group.combined_dimension(dims).dimensionless


def test_groups_do_not_depend_on_variable_order():
    rng = np.random.RandomState(3)
    for _ in range(50):
        n = rng.randint(2, 7)
        variables = [('v%d' % i, Dimension(random_column(rng))) for i in range(n)]
        names = [name for name, _ in variables]
        groups = pi_groups(variables)
        again = pi_groups([variables[i] for i in rng.permutation(n)])
        assert len(again) == len(groups)
        if groups:
            a = sympy.Matrix([exponents(g, names) for g in groups])
            b = sympy.Matrix([exponents(g, names) for g in again])
            assert a.col_join(b).rank() == a.rank() == len(groups)


def test_bad_variable_lists():
    with pytest.raises(DesignError):
        pi_groups([])
    with pytest.raises(DesignError):
        pi_groups([('x', LENGTH), ('x', TIME)])


def test_report():
    report = pi_report([('T', TIME), ('L', LENGTH), ('g', LENGTH / TIME ** 2)])
    assert report['rank'] == 2
    assert report['groups'] == [{'exponents': {'T': 2, 'L': -1, 'g': 1}, 'product': 'T^2*L^-1*g'}]
    assert report['variables'][2] == {'name': 'g', 'dimension': {'L': '1', 'T': '-2'}}


def test_dimension_inference():
    context = {'L': LENGTH, 'g': LENGTH / TIME ** 2, 'T': TIME}
    assert dim_of(parse('sqrt(L / g)'), context) == TIME
    assert dim_of(parse('L * 2 [1/s]'), context) == LENGTH / TIME
    with pytest.raises(DimensionError):
        dim_of(parse('L + T'), context)
    with pytest.raises(DimensionError):
        dim_of(parse('exp(L)'), context)
    with pytest.raises(DimensionError):
        dim_of(parse('L > 1'), context)


def test_pi_table(exhaust_schema):
    graph = DesignGraph(exhaust_schema)
    graph.instantiate('SCRSystem', {'inFlow': 0.1, 'residenceTime': 0.05, 'catalystVolume': 0.01,
                                    'spaceVelocity': 16.0})
    report, table = pi_table(graph, exhaust_schema, 'SCRSystem')
    assert len(report['groups']) == len(table.columns) - 1
    assert list(table['node']) == [1]
    assert report['instances'][0]['node'] == 1


def test_design_sequence():
    assert design_sequence({'A': 2, 'B': 5, 'C': 3}) == ['A', 'C', 'B']
    assert design_sequence({'X': 1, 'Y': 1}) == ['X', 'Y']
    assert design_sequence([('Y', 0), ('X', 0)]) == ['X', 'Y']
    assert design_sequence({}) == []
    with pytest.raises(DesignError):
        design_sequence([('A', 1), ('A', 2)])
    with pytest.raises(DesignError):
        design_sequence({'A': -1})
