import json
import shutil

import numpy as np
import pandas as pd
import pytest

from designc.cli import EXIT_LOAD, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main


def read_json(path):
    with open(str(path)) as f:
        return json.load(f)


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def scr_system(graph):
    (node,) = [n for n in graph['nodes'] if n['class'] == 'SCRSystem']
    return node


def test_run_exhaust(tmp_path):
    assert main(['run', 'exhaust', '--trace', '--out', str(tmp_path / 'a')]) == EXIT_OK
    graph = read_json(tmp_path / 'a' / 'graph.json')
    classes = sorted(n['class'] for n in graph['nodes'])
    assert classes == ['CombustionEngine', 'Requirements', 'SCRSystem']
    assert [e['assoc'] for e in graph['edges']].count('exhaustLine') == 1
    np.testing.assert_allclose(scr_system(graph)['attrs']['catalystVolume'], 0.0130208333, rtol=1e-8)

    assert main(['run', 'exhaust', '--trace', '--out', str(tmp_path / 'b')]) == EXIT_OK
    for name in ('graph.json', 'trace.jsonl'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_run_outputs(tmp_path):
    out = tmp_path / 'out'
    code = main(['run', 'exhaust', '--out', str(out), '--trace', '--dump', 'dot', '--dump', 'graphml',
                 '--pi', 'SCRSystem', '--sequence'])
    assert code == EXIT_OK
    for name in ('graph.json', 'graph.dot', 'graph.graphml', 'trace.jsonl', 'solution.json', 'pi.json',
                 'sequence.json'):
        assert (out / name).exists(), name
    lines = (out / 'trace.jsonl').read_text().splitlines()
    assert json.loads(lines[0])['name'] == 'Axiom'
    assert 'SCRSystem' in read_json(out / 'pi.json')
    sequence = read_json(out / 'sequence.json')
    assert sorted(sequence['sequence']) == sorted(sequence['free_parameters'])


def test_params_override(tmp_path):
    params = write_json(tmp_path / 'params.json', {'massFlow': '0.2 [kg/s]'})
    assert main(['run', 'exhaust', '--params', params, '--out', str(tmp_path / 'out')]) == EXIT_OK
    graph = read_json(tmp_path / 'out' / 'graph.json')
    np.testing.assert_allclose(scr_system(graph)['attrs']['catalystVolume'], 0.0260416667, rtol=1e-8)


def test_override_with_wrong_dimension(tmp_path, capsys):
    params = write_json(tmp_path / 'params.json', {'massFlow': '0.2 [m]'})
    assert main(['run', 'exhaust', '--params', params, '--out', str(tmp_path / 'out')]) == EXIT_LOAD
    assert "parameter 'massFlow'" in capsys.readouterr().err


def test_dangling_rule_reference(tmp_path, exhaust_path, capsys):
    bundle = tmp_path / 'bundle'
    shutil.copytree(exhaust_path, str(bundle))
    production = read_json(bundle / 'production.json')
    production['activities'][0]['steps'][0] = {'rule': 'Missing'}
    write_json(bundle / 'production.json', production)
    assert main(['run', str(bundle), '--out', str(tmp_path / 'out')]) == EXIT_LOAD
    assert "unknown rule 'Missing'" in capsys.readouterr().err
    assert main(['validate', str(bundle)]) == EXIT_LOAD


def test_malformed_vocabulary(tmp_path, exhaust_path, capsys):
    bundle = tmp_path / 'bundle'
    shutil.copytree(exhaust_path, str(bundle))
    vocabulary = read_json(bundle / 'vocabulary.json')
    vocabulary['classes'][1]['associations'][0]['max'] = 'one'
    vocabulary['classes'][1]['associations'][1]['bindings'] = [['massFlow']]
    write_json(bundle / 'vocabulary.json', vocabulary)
    assert main(['validate', str(bundle)]) == EXIT_LOAD
    err = capsys.readouterr().err
    assert 'multiplicity bounds' in err and 'bindings must be' in err


def test_export_malformed_graph(tmp_path, capsys):
    path = write_json(tmp_path / 'graph.json', {'nodes': [{'class': 'SCRSystem'}]})
    assert main(['export', 'exhaust', path]) == EXIT_LOAD
    assert "no valid 'id'" in capsys.readouterr().err


def test_validate(capsys):
    assert main(['validate', 'exhaust']) == EXIT_OK
    assert 'exhaust: 4 classes, 3 rules, 1 chains, 2 activities ok' in capsys.readouterr().out


def test_usage_error():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as err:
        main(['run', 'exhaust', '--dump', 'pdf'])
    assert err.value.code == EXIT_USAGE


def test_solve(tmp_path, capsys):
    network = write_json(tmp_path / 'network.json', {
        'variables': [{'name': 'a', 'value': 1}, {'name': 'b', 'value': 2}, {'name': 'c'}, {'name': 'd'}],
        'equations': ['c == a + b', 'd == 2 * c']})
    assert main(['solve', network]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result['values'] == {'c': 3.0, 'd': 6.0}
    assert [c['outputs'] for c in result['plan']['components']] == [['c'], ['d']]
    assert result['residuals'] == {'eq0': 0.0, 'eq1': 0.0}


def test_solve_underdetermined(tmp_path, capsys):
    network = write_json(tmp_path / 'network.json', {
        'variables': [{'name': 'x'}, {'name': 'y'}], 'equations': ['x + y == 1']})
    assert main(['solve', network]) == EXIT_SOLVER
    assert 'underdetermined' in capsys.readouterr().err


def test_pi(tmp_path):
    variables = write_json(tmp_path / 'pendulum.json', {'variables': [
        {'name': 'T', 'dimension': {'T': '1'}}, {'name': 'L', 'dimension': {'L': '1'}},
        {'name': 'g', 'dimension': {'L': '1', 'T': '-2'}}, {'name': 'm', 'dimension': {'M': '1'}}]})
    out = tmp_path / 'pi.json'
    assert main(['pi', variables, '--out', str(out)]) == EXIT_OK
    report = read_json(out)
    assert report['rank'] == 3
    assert report['groups'] == [{'exponents': {'T': 2, 'L': -1, 'g': 1, 'm': 0}, 'product': 'T^2*L^-1*g'}]


def test_export(tmp_path):
    assert main(['run', 'exhaust', '--out', str(tmp_path / 'run')]) == EXIT_OK
    out = tmp_path / 'graph.dot'
    assert main(['export', 'exhaust', str(tmp_path / 'run' / 'graph.json'), '--format', 'dot',
                 '--out', str(out)]) == EXIT_OK
    text = out.read_text()
    assert text.count(' -> ') == 2
    assert 'SCRSystem' in text


def test_sensitivity(tmp_path):
    out = tmp_path / 'sensitivity.csv'
    assert main(['sensitivity', 'exhaust', '--output', 'SCRSystem[3].catalystVolume',
                 '--input', 'SCRSystem[3].residenceTime', '--out', str(out)]) == EXIT_OK
    table = pd.read_csv(str(out))
    assert list(table['input']) == ['SCRSystem[3].residenceTime']
    # catalystVolume is linear in residenceTime
    np.testing.assert_allclose(table['elasticity'], [1.0], rtol=1e-6)
    np.testing.assert_allclose(table['derivative'], [0.1 / 0.6], rtol=1e-6)


def test_variants_command(tmp_path):
    sets = write_json(tmp_path / 'sets.json', [{'massFlow': '0.1 [kg/s]'}, {'massFlow': '0.2 [kg/s]'}])
    out = tmp_path / 'variants'
    assert main(['variants', 'exhaust', '--sets', sets, '--out', str(out)]) == EXIT_OK
    table = pd.read_csv(str(out / 'variants.csv'))
    assert list(table['Status']) == ['ok', 'ok']
    np.testing.assert_allclose(table['SCRSystem.catalystVolume'], [0.0130208333, 0.0260416667], rtol=1e-8)
