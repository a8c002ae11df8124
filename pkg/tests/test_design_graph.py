import pytest

from designc.design_graph import DesignGraph, Edge, connect, export, instantiate, load, validate
from designc.errors import DimensionError, GraphError
from designc.units import MASS, TIME


def exhaust_graph(schema):
    graph = DesignGraph(schema)
    r = instantiate(graph, 'Requirements', {'massFlow': '0.5 [kg/s]', 'residenceTime': 0.05})
    e = instantiate(graph, 'CombustionEngine', {'massFlow': (0.5, MASS / TIME)})
    s = instantiate(graph, 'SCRSystem', {'residenceTime': 0.05})
    connect(graph, e, 'requirements', r)
    connect(graph, e, 'exhaustLine', s)
    return graph, r, e, s


def test_first_id(small_schema):
    graph = DesignGraph(small_schema)
    assert instantiate(graph, 'Part') == 1
    assert len(graph) == 1


def test_ids_never_reused(small_schema):
    graph = DesignGraph(small_schema)
    a = instantiate(graph, 'Part')
    graph.remove_node(a)
    assert instantiate(graph, 'Part') == a + 1


def test_values_and_defaults(exhaust_schema):
    graph = DesignGraph(exhaust_schema)
    s = instantiate(graph, 'SCRSystem', {'inFlow': '0.5 [kg/s]'})
    assert graph.get(s, 'inFlow') == 0.5
    assert graph.get(s, 'density') == 0.6
    assert graph.get(s, 'spaceVelocity') is None


def test_kind_and_dimension_checked(exhaust_schema):
    graph = DesignGraph(exhaust_schema)
    with pytest.raises(GraphError):
        instantiate(graph, 'SCRSystem', {'inFlow': 'fast'})
    with pytest.raises(DimensionError):
        instantiate(graph, 'SCRSystem', {'inFlow': '0.5 [m]'})
    with pytest.raises(GraphError):
        instantiate(graph, 'SCRSystem', {'colour': 'red'})
    with pytest.raises(GraphError):
        instantiate(graph, 'Turbocharger')
    assert len(graph) == 0


def test_connect(exhaust_schema):
    graph, r, e, s = exhaust_graph(exhaust_schema)
    assert graph.edges() == [Edge(e, 'exhaustLine', s), Edge(e, 'requirements', r)]
    with pytest.raises(GraphError):
        connect(graph, e, 'exhaustLine', s)
    with pytest.raises(GraphError):
        connect(graph, e, 'tailpipe', s)
    with pytest.raises(GraphError):
        connect(graph, e, 'exhaustLine', r)
    with pytest.raises(GraphError):
        connect(graph, e, 'exhaustLine', 99)


def test_subtype_instances(small_schema):
    graph = DesignGraph(small_schema)
    part = instantiate(graph, 'Part')
    pipe = instantiate(graph, 'Pipe')
    instantiate(graph, 'Box')
    assert graph.instances('Pipe') == [pipe]
    assert graph.instances('Part') == [part, pipe, 3]
    connect(graph, pipe, 'feeds', 3)


def test_empty_graph_is_valid(small_schema):
    report = validate(DesignGraph(small_schema), small_schema)
    assert report.ok and report.violations == [] and report.unknowns == []


def test_multiplicity_violation(exhaust_schema):
    graph = DesignGraph(exhaust_schema)
    instantiate(graph, 'CombustionEngine')
    report = validate(graph, exhaust_schema)
    assert len(report.violations) == 1
    assert "'requirements'" in report.violations[0]


def test_solvable_attributes_are_unknowns(exhaust_schema):
    graph, r, e, s = exhaust_graph(exhaust_schema)
    report = graph.validate()
    assert report.ok
    # inFlow comes from the binding, catalystVolume and spaceVelocity from the equations
    assert len(report.unknowns) == 3
    assert any('catalystVolume' in u for u in report.unknowns)
    assert any('inFlow' in u for u in report.unknowns)
    assert any('spaceVelocity' in u for u in report.unknowns)


def test_undeterminable_attribute_is_violation(exhaust_schema):
    graph = DesignGraph(exhaust_schema)
    instantiate(graph, 'SCRSystem', {'inFlow': 0.5})
    report = graph.validate()
    assert any("'residenceTime' is unset and cannot be determined" in v for v in report.violations)


def test_export_empty(small_schema):
    assert export(DesignGraph(small_schema), 'json') == '{\n  "edges": [],\n  "nodes": []\n}\n'


def test_export_deterministic(exhaust_schema):
    graph, _, _, _ = exhaust_graph(exhaust_schema)
    for fmt in ('json', 'graphml', 'dot'):
        assert export(graph, fmt) == export(graph, fmt)
        assert export(graph, fmt) == export(graph.copy(), fmt)


def test_dot_export(exhaust_schema):
    graph = DesignGraph(exhaust_schema)
    e = instantiate(graph, 'CombustionEngine')
    s = instantiate(graph, 'SCRSystem')
    connect(graph, e, 'exhaustLine', s)
    text = export(graph, 'dot')
    assert text.startswith('digraph design {')
    assert text.count('[label=') == 3
    assert text.count(' -> ') == 1


def test_seventeen_digits(small_schema):
    graph = DesignGraph(small_schema)
    instantiate(graph, 'Part', {'length': 0.1})
    assert 'length=0.10000000000000001' in export(graph, 'dot')
    text = export(graph, 'json')
    assert '"length": 0.10000000000000001' in text
    assert load(small_schema, text).get(1, 'length') == 0.1

    instantiate(graph, 'Part', {'length': 2})
    assert '"length": 2.0' in export(graph, 'json')


def test_unknown_format(small_schema):
    with pytest.raises(GraphError):
        export(DesignGraph(small_schema), 'xml')


def test_json_round_trip(exhaust_schema):
    graph, _, _, _ = exhaust_graph(exhaust_schema)
    graph.remove_node(1)
    text = export(graph, 'json')
    again = load(exhaust_schema, text)
    assert export(again, 'json') == text
    assert again.nodes() == [2, 3]
    assert instantiate(again, 'SCRSystem') == 4


def test_failed_connect_leaves_values(exhaust_schema):
    graph, r, e, s = exhaust_graph(exhaust_schema)
    before = export(graph, 'json')
    with pytest.raises(GraphError):
        connect(graph, s, 'exhaustLine', e)
    assert export(graph, 'json') == before


@pytest.mark.parametrize('document', [
    '[]',
    {'nodes': 'Part'},
    {'nodes': [{'class': 'Part'}]},
    {'nodes': [{'id': 1}]},
    {'nodes': [{'id': '1', 'class': 'Part'}]},
    {'nodes': [{'id': 1, 'class': 'Part', 'attrs': []}]},
    {'nodes': [{'id': 1, 'class': 'Part'}], 'edges': [{'source': 1, 'target': 1}]},
])
def test_malformed_graph_document(small_schema, document):
    with pytest.raises(GraphError):
        load(small_schema, document)


def test_non_finite_values_rejected(small_schema):
    graph = DesignGraph(small_schema)
    nid = instantiate(graph, 'Part')
    for value in (float('nan'), float('inf')):
        with pytest.raises(GraphError):
            graph.set_attr(nid, 'length', value)
    assert graph.get(nid, 'length') is None
