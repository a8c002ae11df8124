""" process chains: run an external engineering application on an extract of the design graph
and feed its results back.

    {"name": "pressureLoss",
     "command": ["{python}", "{bundle}/chains/pressure_loss.py", "{input}", "{output}"],
     "extract": {"class": "SCRSystem", "attributes": ["catalystVolume", "massFlow"]},
     "input_format": "json", "output_file": "result.json",
     "mapping": [{"path": "pressureLoss", "node": {"class": "SCRSystem"}, "attribute": "pressureLoss"}],
     "timeout": 60}

Each invocation runs in a fresh temporary directory (under $DESIGNC_TMPDIR when set); input
and output files are resolved inside it. Write-back is all-or-nothing.
"""
import io
import json
import logging
import os
import re
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import pandas as pd

from .design_graph import coerce_value
from .dimension import BOOLEAN, infer
from .errors import ChainError, DesignError, DimensionError, EvaluationError, LoadError, ParseError
from .expressions import evaluate, parse
from .vocabulary import read_document

logger = logging.getLogger(__name__)

FORMATS = ('json', 'csv')
PLACEHOLDERS = ('input', 'output', 'workdir', 'python', 'bundle')
DEFAULT_TIMEOUT = 60.0
MAX_CAPTURE = 8192


@dataclass
class NodeSelector:
    cls: str
    where: Optional[object] = None


@dataclass
class OutputMapping:
    path: str
    node: NodeSelector
    attribute: str


@dataclass
class ChainSpec:
    name: str
    command: List[str]
    extract_class: str
    extract_attributes: List[str]
    extract_where: Optional[object] = None
    input_format: str = 'json'
    input_file: Optional[str] = None
    output_format: Optional[str] = None
    output_file: str = 'output.json'
    mapping: List[OutputMapping] = field(default_factory=list)
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.input_file is None:
            self.input_file = 'input.' + self.input_format
        if self.output_format is None:
            self.output_format = self.input_format


@dataclass
class ChainResult:
    name: str
    returncode: int
    values: Dict[str, object]
    written: int
    stdout: str = ''
    stderr: str = ''

    def as_dict(self):
        return {'chain': self.name, 'returncode': self.returncode, 'values': dict(self.values),
                'written': self.written}


def _bounded(text):
    if text is None:
        return ''
    if len(text) > MAX_CAPTURE:
        return '...' + text[-MAX_CAPTURE:]
    return text


def _relative_inside(path):
    """ a relative path that stays inside the working directory """
    normal = os.path.normpath(path)
    return not (os.path.isabs(normal) or normal == '..' or normal.startswith('..' + os.sep))


def _read_selector(entry, schema, where, problems):
    cls = (entry or {}).get('class')
    if cls not in schema.classes:
        problems.append("%s: unknown class '%s'" % (where, cls))
        return None
    predicate = None
    if entry.get('where') is not None:
        try:
            predicate = parse(entry['where'], where)
            if infer(predicate, schema.attribute_context(cls), schema) != BOOLEAN:
                problems.append("%s: selector predicate is not boolean" % where)
        except (ParseError, DimensionError) as err:
            problems.append("%s: %s" % (where, err))
    return NodeSelector(cls, predicate)


def load_chain(document, schema, source=None):
    """
    parse and check a process chain description

    :return: ChainSpec
    """
    data = read_document(document, source)
    name = data.get('name') or source
    where = "chain '%s'" % name
    problems = []

    command = data.get('command')
    if isinstance(command, str):
        command = command.split()
    if not command or not all(isinstance(part, str) for part in command):
        problems.append("%s: command must be a non-empty list of strings" % where)
        command = []
    for part in command:
        for placeholder in re.findall(r'\{(\w+)\}', part):
            if placeholder not in PLACEHOLDERS:
                problems.append("%s: unknown placeholder {%s}" % (where, placeholder))

    extract = data.get('extract', {})
    selector = _read_selector(extract, schema, "%s extract" % where, problems)
    attributes = list(extract.get('attributes', []))
    if selector is not None:
        for attr in attributes:
            if schema.find_attribute(selector.cls, attr) is None:
                problems.append("%s: class '%s' has no attribute '%s'" % (where, selector.cls, attr))

    mapping = []
    for index, entry in enumerate(data.get('mapping', [])):
        target = _read_selector(entry.get('node'), schema, "%s mapping %d" % (where, index), problems)
        if target is None:
            continue
        if schema.find_attribute(target.cls, entry.get('attribute')) is None:
            problems.append("%s: mapping %d targets undeclared attribute %s.%s"
                            % (where, index, target.cls, entry.get('attribute')))
            continue
        mapping.append(OutputMapping(str(entry.get('path', '')), target, entry['attribute']))

    spec = ChainSpec(name, command, selector.cls if selector else None, attributes,
                     selector.where if selector else None,
                     data.get('input_format', 'json'), data.get('input_file'),
                     data.get('output_format'), data.get('output_file', 'output.json'),
                     mapping, float(data.get('timeout', DEFAULT_TIMEOUT)))

    for fmt in (spec.input_format, spec.output_format):
        if fmt not in FORMATS:
            problems.append("%s: unknown format '%s'" % (where, fmt))
    for path in (spec.input_file, spec.output_file):
        if not _relative_inside(path):
            problems.append("%s: '%s' escapes the working directory" % (where, path))
    if not spec.timeout > 0:
        problems.append("%s: timeout must be positive" % where)

    if problems:
        raise LoadError(problems[0], problems)
    return spec


# ~~~~~ graph side ~~~~~

def select(selector, graph):
    """ node ids of the selector's class (subtypes included) satisfying its predicate """
    found = []
    for nid in graph.instances(selector.cls):
        if selector.where is None or evaluate(selector.where, graph.attrs(nid).get) is True:
            found.append(nid)
    return found


def extract(spec, graph):
    """ the canonical extract: {nodes: [{id, class, attrs}]} ordered by node id """
    selector = NodeSelector(spec.extract_class, spec.extract_where)
    nodes = []
    for nid in select(selector, graph):
        attrs = graph.attrs(nid)
        nodes.append({'id': nid, 'class': graph.node_class(nid),
                      'attrs': {name: attrs[name] for name in spec.extract_attributes}})
    return {'nodes': nodes}


def render_extract(spec, data):
    """ the input file contents: canonical JSON, or CSV with an id column then the attributes """
    if spec.input_format == 'json':
        return json.dumps(data, indent=2, sort_keys=True) + '\n'
    buffer = io.StringIO()
    rows = [dict([('id', n['id'])] + [(a, n['attrs'][a]) for a in spec.extract_attributes])
            for n in data['nodes']]
    pd.DataFrame(rows, columns=['id'] + spec.extract_attributes).to_csv(buffer, index=False)
    return buffer.getvalue()


def read_output(spec, path):
    """ :return: a dict for json output, a DataFrame for csv output """
    if not os.path.exists(path):
        raise ChainError("output file '%s' was not written" % os.path.basename(path), spec.name)
    try:
        if spec.output_format == 'json':
            with open(path) as f:
                return read_document(f.read(), spec.output_file)
        return pd.read_csv(path)
    except (ParseError, ValueError, pd.errors.ParserError) as err:
        raise ChainError("cannot parse %s: %s" % (spec.output_file, err), spec.name)


def lookup_path(result, path):
    """
    resolve a mapping path in a parsed result

    json: slash-separated field path, integer segments index into lists ('cases/0/dp')
    csv: 'column' (single-row results) or 'column/row'
    """
    if isinstance(result, pd.DataFrame):
        column, _, row = path.partition('/')
        if column not in result.columns:
            raise KeyError("no column '%s'" % column)
        if not row and len(result) != 1:
            raise KeyError("column '%s' has %d rows, name one as '%s/<row>'" % (column, len(result), column))
        value = result[column].iloc[int(row) if row else 0]
        return value.item() if hasattr(value, 'item') else value

    value = result
    for segment in [s for s in path.split('/') if s]:
        if isinstance(value, list):
            value = value[int(segment)]
        elif isinstance(value, dict):
            value = value[segment]
        else:
            raise KeyError(segment)
    return value


def _write_back(spec, graph, result):
    """ resolve and check every mapping first, then write them all """
    staged = []
    for mapping in spec.mapping:
        try:
            value = lookup_path(result, mapping.path)
        except (KeyError, IndexError, ValueError) as err:
            raise ChainError("result has no value at '%s': %s" % (mapping.path, err), spec.name)
        try:
            targets = select(mapping.node, graph)
        except EvaluationError as err:
            raise ChainError("mapping '%s': %s" % (mapping.path, err), spec.name)
        if len(targets) != 1:
            raise ChainError("mapping '%s': selector matches %d %s node(s), expected exactly one"
                             % (mapping.path, len(targets), mapping.node.cls), spec.name)
        nid = targets[0]
        attribute = graph.schema.find_attribute(graph.node_class(nid), mapping.attribute)
        where = "node %d %s.%s" % (nid, graph.node_class(nid), mapping.attribute)
        try:
            coerce_value(attribute, value, where)
        except DesignError as err:
            raise ChainError("write-back rejected: %s" % err, spec.name)
        staged.append((nid, mapping.attribute, value, "%s[%d].%s" % (graph.node_class(nid), nid, mapping.attribute)))

    snapshot = graph.copy()
    values = {}
    try:
        for nid, name, value, label in staged:
            values[label] = graph.set_attr(nid, name, value)
    except DesignError as err:
        graph.restore(snapshot)
        raise ChainError("write-back failed: %s" % err, spec.name)
    return values


def run_chain(spec, graph, bundle_dir=None, tmp_root=None):
    """
    export the extract, run the command in a fresh working directory and write the mapped
    results back into the graph; the graph is left untouched on any failure

    :param bundle_dir: substituted for {bundle} in the command
    :param tmp_root: parent of the working directory, defaults to $DESIGNC_TMPDIR
    :return: ChainResult
    """
    root = tmp_root or os.environ.get('DESIGNC_TMPDIR') or None
    if root is not None:
        os.makedirs(root, exist_ok=True)

    with tempfile.TemporaryDirectory(prefix='designc-%s-' % spec.name, dir=root) as workdir:
        input_path = os.path.join(workdir, spec.input_file)
        output_path = os.path.join(workdir, spec.output_file)
        for path in (input_path, output_path):
            os.makedirs(os.path.dirname(path), exist_ok=True)
        try:
            with open(input_path, 'w') as f:
                f.write(render_extract(spec, extract(spec, graph)))
        except EvaluationError as err:
            raise ChainError("cannot extract: %s" % err, spec.name)

        substitutions = {'input': input_path, 'output': output_path, 'workdir': workdir,
                         'python': sys.executable, 'bundle': os.path.abspath(bundle_dir or os.getcwd())}
        args = [re.sub(r'\{(\w+)\}', lambda m: substitutions[m.group(1)], part) for part in spec.command]
        logger.debug("chain %s: %s (cwd %s)", spec.name, ' '.join(args), workdir)

        try:
            completed = subprocess.run(args, cwd=workdir, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                                       universal_newlines=True, timeout=spec.timeout)
        except FileNotFoundError:
            raise ChainError("command not found: %s" % args[0], spec.name)
        except PermissionError:
            raise ChainError("command is not executable: %s" % args[0], spec.name)
        except subprocess.TimeoutExpired as err:
            raise ChainError("timed out after %g s" % spec.timeout, spec.name,
                             stderr=_bounded(err.stderr if isinstance(err.stderr, str) else None))

        stdout, stderr = _bounded(completed.stdout), _bounded(completed.stderr)
        if completed.returncode != 0:
            raise ChainError("exited with status %d" % completed.returncode, spec.name,
                             completed.returncode, stderr)

        written = _write_back(spec, graph, read_output(spec, output_path))

    logger.info("chain %s wrote %d value(s)", spec.name, len(written))
    return ChainResult(spec.name, completed.returncode, written, len(written), stdout, stderr)


__all__ = ['ChainSpec', 'ChainResult', 'NodeSelector', 'OutputMapping', 'load_chain', 'run_chain', 'extract',
           'render_extract', 'select', 'lookup_path', 'FORMATS', 'PLACEHOLDERS']
