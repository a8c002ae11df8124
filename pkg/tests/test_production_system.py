import io
import json

import numpy as np
import pytest

from designc.bundle import execute
from designc.design_graph import DesignGraph, export
from designc.errors import EvaluationError, LoadError, StepError, ValidationFailure
from designc.production_system import (Decision, ExecutionContext, Loop, RuleCall, Solve, eval_decision,
                                       execute_activity, load_production, query, run_production)
from designc.expressions import parse
from designc.rule_engine import load_rule

ADD_PIPE = {'name': 'AddPipe', 'lhs': {'nodes': [], 'edges': []},
            'rhs': {'nodes': [{'pid': 'p', 'class': 'Pipe', 'assign': {'length': '1 [m]'}}], 'edges': []}}
ATTACH_BOX = {'name': 'AttachBox', 'mode': 'forall',
              'lhs': {'nodes': [{'pid': 'p', 'class': 'Pipe'}], 'edges': []},
              'rhs': {'nodes': [{'pid': 'p', 'class': 'Pipe'}, {'pid': 'b', 'class': 'Box'}],
                      'edges': [['p', 'feeds', 'b']]}}
DOUBLE = {'name': 'Double', 'lhs': {'nodes': [{'pid': 'p', 'class': 'Pipe'}], 'edges': []},
          'rhs': {'nodes': [{'pid': 'p', 'class': 'Pipe', 'assign': {'length': 'p.length * 2'}}], 'edges': []}}
NEVER = {'name': 'Never', 'required': True, 'lhs': {'nodes': [{'pid': 'b', 'class': 'Box'}], 'edges': []},
         'rhs': {'nodes': [], 'edges': []}}


def main(*steps, **activities):
    document = {'main': 'Main', 'activities': [{'name': 'Main', 'steps': list(steps)}]}
    document['activities'] += [{'name': name, 'steps': s} for name, s in sorted(activities.items())]
    return document


def context_for(schema, production, rules=(ADD_PIPE, ATTACH_BOX, DOUBLE, NEVER), **options):
    rules = {r.name: r for r in (load_rule(d, schema) for d in rules)}
    return ExecutionContext(schema, rules, {}, load_production(production, schema, rules, {}), **options)


def run(schema, production, **options):
    context = context_for(schema, production, **options)
    graph = DesignGraph(schema)
    trace = run_production(context.production, graph, context)
    return graph, trace


def test_empty_activity(small_schema):
    graph, trace = run(small_schema, main())
    assert len(graph) == 0
    assert len(trace) == 0
    assert trace.validation == {'violations': [], 'unknowns': []}


def test_steps_parse(small_schema):
    production = load_production(main(
        {'rule': 'AddPipe', 'mode': 'forall'}, 'solve', {'solve': {'partial': True}},
        {'decision': 'count(Pipe) > 0', 'then': [{'rule': 'Double'}]},
        {'loop': 'exists(Box)', 'body': [{'rule': 'Never', 'required': False}], 'maxIter': 3}),
        small_schema, ['AddPipe', 'Double', 'Never'], [])
    steps = production.activity('Main').steps
    assert steps[0] == RuleCall('AddPipe', 'forall', None)
    assert steps[1] == Solve(False) and steps[2] == Solve(True)
    assert isinstance(steps[3], Decision) and steps[3].then == [RuleCall('Double')] and steps[3].otherwise == []
    assert isinstance(steps[4], Loop) and steps[4].max_iter == 3


def test_load_problems(small_schema):
    document = main({'rule': 'Missing'}, {'activity': 'A'}, {'chain': 'cfd'},
                    {'decision': 'count(Pipe)'}, {'loop': 'true', 'maxIter': 0}, {'dance': 1},
                    A=[{'activity': 'B'}], B=[{'activity': 'A'}])
    with pytest.raises(LoadError) as err:
        load_production(document, small_schema, ['AddPipe'], [])
    problems = '\n'.join(err.value.problems)
    assert "unknown rule 'Missing'" in problems
    assert "unknown chain 'cfd'" in problems
    assert 'is not boolean' in problems
    assert 'maxIter must be a positive integer' in problems
    assert 'unknown step' in problems
    assert 'recursive activities A,B' in problems


def test_missing_main(small_schema):
    with pytest.raises(LoadError):
        load_production({'main': 'Start', 'activities': [{'name': 'Main', 'steps': []}]}, small_schema, [], [])


def test_queries(small_schema):
    graph = DesignGraph(small_schema)
    graph.instantiate('Pipe', {'length': 1.0})
    graph.instantiate('Pipe', {'length': 3.0})
    graph.instantiate('Box')
    assert query(parse('count(Part)'), graph) == 3.0
    assert query(parse('count(Pipe where length > 2 [m])'), graph) == 1.0
    assert query(parse('exists(Box)'), graph) is True
    assert query(parse('attr(Box, open)'), graph) is False
    assert eval_decision('count(Pipe) == 2 and not attr(Box, open)', graph) is True
    with pytest.raises(EvaluationError):
        eval_decision('attr(Pipe, length) > 1 [m]', graph)
    with pytest.raises(EvaluationError):
        eval_decision('attr(Box, length) > 1 [m]', graph)


def test_non_unique_attr_is_step_error(small_schema):
    production = main({'rule': 'AddPipe'}, {'rule': 'AddPipe'},
                      {'decision': 'attr(Pipe, length) > 1 [m]', 'then': []})
    with pytest.raises(StepError) as err:
        run(small_schema, production)
    assert 'expected a unique one' in str(err.value)
    assert err.value.step == 'Main/2'
    assert len(err.value.trace) == 2


def test_decision_and_sub_activity(small_schema):
    production = main({'activity': 'Ensure'}, {'activity': 'Ensure'},
                      Ensure=[{'decision': 'count(Pipe) == 0', 'then': [{'rule': 'AddPipe'}]}])
    graph, trace = run(small_schema, production)
    assert len(graph.instances('Pipe')) == 1
    decisions = [e for e in trace if e.kind == 'decision']
    assert [d.value for d in decisions] == [True, False]
    assert [e.path for e in trace] == ['Main/0', 'Main/0:Ensure/0', 'Main/0:Ensure/0/then/0',
                                       'Main/1', 'Main/1:Ensure/0']


def test_loop(small_schema):
    production = main({'rule': 'AddPipe'},
                      {'loop': 'attr(Pipe, length) < 5 [m]', 'body': [{'rule': 'Double'}], 'maxIter': 10})
    graph, trace = run(small_schema, production)
    assert graph.get(1, 'length') == 8.0
    assert [e.value for e in trace if e.kind == 'loop'] == [True, True, True, False]


def test_loop_bound(small_schema):
    production = main({'loop': 'count(Part) < 100', 'body': [{'rule': 'AddPipe'}], 'maxIter': 3})
    context = context_for(small_schema, production)
    graph = DesignGraph(small_schema)
    with pytest.raises(StepError) as err:
        run_production(context.production, graph, context)
    assert 'maxIter=3' in str(err.value)
    assert len(graph) == 3


def test_step_budget(small_schema):
    production = main({'loop': 'true', 'body': [{'rule': 'AddPipe'}]})
    with pytest.raises(StepError) as err:
        run(small_schema, production, max_steps=20)
    assert 'step budget of 20 exhausted' in str(err.value)


def test_required_rule(small_schema):
    with pytest.raises(StepError) as err:
        run(small_schema, main({'rule': 'Never'}))
    assert "required rule 'Never' has no match" in str(err.value)
    graph, trace = run(small_schema, main({'rule': 'Never', 'required': False}))
    assert trace.entries[0].matches == 0


def test_failing_rule_is_step_error(small_schema):
    bare_pipe = dict(ADD_PIPE, name='BarePipe', rhs={'nodes': [{'pid': 'p', 'class': 'Pipe'}], 'edges': []})
    production = main({'rule': 'BarePipe'}, {'rule': 'Double'})
    context = context_for(small_schema, production, rules=(bare_pipe, DOUBLE))
    graph = DesignGraph(small_schema)
    with pytest.raises(StepError) as err:
        run_production(context.production, graph, context)
    assert "rule 'Double'" in str(err.value) and 'unset' in str(err.value)
    assert graph.get(1, 'length') is None


def test_forall_is_deterministic(small_schema):
    production = main(*[{'rule': 'AddPipe'}] * 5 + [{'rule': 'AttachBox'}])
    exports = set()
    for _ in range(10):
        graph, trace = run(small_schema, production)
        exports.add(export(graph, 'json'))
    assert len(exports) == 1
    assert trace.entries[-1].matches == 5
    assert [(e.source, e.target) for e in graph.edges()] == [(1, 6), (2, 7), (3, 8), (4, 9), (5, 10)]


def test_trace_lines(small_schema):
    graph, trace = run(small_schema, main({'rule': 'AddPipe'}, 'solve'))
    lines = [json.loads(line) for line in trace.lines()]
    assert lines[0] == {'index': 0, 'path': 'Main/0', 'kind': 'rule', 'name': 'AddPipe', 'matches': 1,
                        'delta': {'created_nodes': [1], 'deleted_nodes': [], 'created_edges': [],
                                  'deleted_edges': [], 'updated': []}}
    assert lines[1] == {'index': 1, 'path': 'Main/1', 'kind': 'solve', 'solved': 0}
    stream = io.StringIO()
    trace.write_jsonl(stream)
    assert 'elapsed' not in stream.getvalue()
    assert list(trace.to_frame()['kind']) == ['rule', 'solve']


def test_validation_failure(exhaust_schema):
    engine = {'name': 'Engine', 'lhs': {'nodes': [], 'edges': []},
              'rhs': {'nodes': [{'pid': 'e', 'class': 'CombustionEngine'}], 'edges': []}}
    with pytest.raises(ValidationFailure) as err:
        run(exhaust_schema, main({'rule': 'Engine'}), rules=(engine,))
    assert len(err.value.report.violations) == 1
    assert len(err.value.trace) == 1


def test_exhaust_language(exhaust_bundle):
    graph, trace, context = execute(exhaust_bundle)
    assert len(graph.instances('CombustionEngine')) == 1
    (scr,) = graph.instances('SCRSystem')
    assert [e.assoc for e in graph.edges()] == ['exhaustLine', 'requirements']
    np.testing.assert_allclose(graph.get(scr, 'residenceTime'), 0.078125)
    np.testing.assert_allclose(graph.get(scr, 'catalystVolume'), 0.1 * 0.078125 / 0.6, rtol=1e-9)
    np.testing.assert_allclose(graph.get(scr, 'pressureLoss'), 768.0, rtol=1e-9)
    assert [e.value for e in trace if e.kind == 'loop'] == [True, True, False]
    assert trace.validation['violations'] == []

    # the decision guards the SCR rule, so running the activity again adds nothing
    again = execute_activity('Aftertreatment', graph, context, validate=False)
    assert [e.kind for e in again] == ['decision']
    assert again.entries[0].value is False
    assert len(graph.instances('SCRSystem')) == 1
