import argparse
import json
import logging
import os
import sys

from .bundle import bundled_language, execute, load_bundle
from .design_graph import FORMATS, export, load
from .dimension import design_sequence, dimension_from_document, pi_report, pi_table
from .errors import DesignError, LoadError, ParseError, SolverError, ValidationFailure
from .solution_path import (SolverOptions, collect_network, degrees_of_freedom, network_from_document, plan,
                            residuals, sensitivity_table, solve)
from .vocabulary import read_document

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_LOAD = 3
EXIT_STEP = 4
EXIT_VALIDATION = 5
EXIT_SOLVER = 6

DESCRIPTION = """\
Execute graph-based design languages.

exit status: 0 success, 2 usage error, 3 load error, 4 step error (rule, chain,
loop bound, step budget), 5 final validation failure, 6 solver failure
"""


def exit_code(err):
    if isinstance(err, ValidationFailure):
        return EXIT_VALIDATION
    if isinstance(err, SolverError):
        return EXIT_SOLVER
    if isinstance(err, (LoadError, ParseError)):
        return EXIT_LOAD
    return EXIT_STEP


def resolve_bundle(name):
    """ a bundle directory, or the name of a language shipped with designc """
    if not os.path.isdir(name) and os.path.isdir(bundled_language(name)):
        return bundled_language(name)
    return name


def _read(path):
    with open(path) as f:
        return f.read()


def _write(path, text):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        f.write(text)


def _dumps(data):
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


def _emit(text, path=None):
    if path:
        _write(path, text)
    else:
        sys.stdout.write(text)


# ~~~~~ subcommands ~~~~~

def cmd_run(args):
    bundle = load_bundle(resolve_bundle(args.bundle), args.params)
    out = args.out
    os.makedirs(out, exist_ok=True)
    try:
        graph, trace, context = execute(bundle, max_steps=args.max_steps)
    except DesignError as err:
        trace = getattr(err, 'trace', None)
        if args.trace and trace is not None:
            _write(os.path.join(out, 'trace.jsonl'), ''.join(line + '\n' for line in trace.lines()))
        if isinstance(err, ValidationFailure):
            _write(os.path.join(out, 'graph.json'), export(err.graph, 'json'))
            _write(os.path.join(out, 'validation.json'), _dumps(err.report.as_dict()))
        raise

    _write(os.path.join(out, 'graph.json'), export(graph, 'json'))
    for fmt in args.dump or []:
        _write(os.path.join(out, 'graph.%s' % fmt), export(graph, fmt))
    if args.trace:
        _write(os.path.join(out, 'trace.jsonl'), ''.join(line + '\n' for line in trace.lines()))
    if context.last_solution is not None:
        _write(os.path.join(out, 'solution.json'), _dumps(context.last_solution.as_dict()))

    if args.pi:
        reports = {}
        for cls in args.pi:
            if cls not in bundle.schema.classes:
                raise LoadError("--pi: unknown class '%s'" % cls)
            reports[cls] = pi_table(graph, bundle.schema, cls)[0]
        _write(os.path.join(out, 'pi.json'), _dumps(reports))

    if args.sequence:
        counts = degrees_of_freedom(collect_network(graph, bundle.schema))
        _write(os.path.join(out, 'sequence.json'),
               _dumps({'free_parameters': counts, 'sequence': design_sequence(counts)}))

    logger.info("%s: %d step(s), %d node(s), outputs in %s", bundle.name, len(trace), len(graph), out)
    return EXIT_OK


def cmd_validate(args):
    bundle = load_bundle(resolve_bundle(args.bundle), args.params)
    sys.stdout.write("%s: %d classes, %d rules, %d chains, %d activities ok\n"
                     % (bundle.name, len(bundle.schema.classes), len(bundle.rules), len(bundle.chains),
                        len(bundle.production.activities)))
    return EXIT_OK


def cmd_solve(args):
    network = network_from_document(_read(args.network), args.network)
    options = SolverOptions(tolerance=args.tolerance, max_iter=args.max_iter)
    solution_plan = plan(network)
    values = solve(solution_plan, network, options)
    _emit(_dumps({'plan': solution_plan.as_dict(network),
                  'values': {network.label(k): v for k, v in values.items()},
                  'residuals': residuals(network, values)}), args.out)
    return EXIT_OK


def cmd_pi(args):
    data = read_document(_read(args.variables), args.variables)
    entries = data.get('variables', []) if isinstance(data, dict) else data
    try:
        variables = [(entry['name'], dimension_from_document(entry.get('dimension'))) for entry in entries]
        report = pi_report(variables)
    except (KeyError, TypeError, DesignError) as err:
        raise LoadError("%s: %s" % (args.variables, err))
    _emit(_dumps(report), args.out)
    return EXIT_OK


def cmd_export(args):
    bundle = load_bundle(resolve_bundle(args.bundle))
    try:
        graph = load(bundle.schema, _read(args.graph))
    except DesignError as err:
        raise LoadError("%s: %s" % (args.graph, err))
    _emit(export(graph, args.format), args.out)
    return EXIT_OK


def cmd_sensitivity(args):
    bundle = load_bundle(resolve_bundle(args.bundle), args.params)
    graph, _, _ = execute(bundle, max_steps=args.max_steps)
    network = collect_network(graph, bundle.schema)
    table = sensitivity_table(network, args.output or None, args.input or None, progress=args.progress)
    _emit(table.to_csv(index=False), args.out)
    return EXIT_OK


def cmd_variants(args):
    from .variants import plot_variants, run_variants

    sets = read_document(_read(args.sets), args.sets)
    if not isinstance(sets, list) or not all(isinstance(s, dict) for s in sets):
        raise LoadError("%s: expected a list of parameter objects" % args.sets)
    table = run_variants(resolve_bundle(args.bundle), sets, max_steps=args.max_steps, progress=args.progress)
    os.makedirs(args.out, exist_ok=True)
    table.to_csv(os.path.join(args.out, 'variants.csv'), index=False)
    if args.plot:
        ax = plot_variants(table, args.plot[0], args.plot[1])
        ax.figure.savefig(os.path.join(args.out, 'variants.png'), bbox_inches='tight')
    return EXIT_OK


# ~~~~~ argument parsing ~~~~~

def build_parser():
    parser = argparse.ArgumentParser(prog='designc', description=DESCRIPTION,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('-v', '--verbose', action='count', default=0, help="-v info, -vv debug logging")
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    run = commands.add_parser('run', help="execute a design language")
    run.add_argument('bundle', help="bundle directory or bundled language name")
    run.add_argument('--params', help="parameter overrides (JSON name -> value)")
    run.add_argument('--out', default='out', help="output directory (default: out)")
    run.add_argument('--trace', action='store_true', help="write trace.jsonl")
    run.add_argument('--dump', action='append', choices=FORMATS, help="extra graph exports")
    run.add_argument('--max-steps', type=int, default=100000, help="global step budget")
    run.add_argument('--pi', action='append', metavar='CLASS', help="write Pi groups of a class to pi.json")
    run.add_argument('--sequence', action='store_true',
                     help="write free parameters per class and the resulting design sequence")
    run.set_defaults(func=cmd_run)

    validate = commands.add_parser('validate', help="load a bundle and run the static checks")
    validate.add_argument('bundle')
    validate.add_argument('--params')
    validate.set_defaults(func=cmd_validate)

    solve_cmd = commands.add_parser('solve', help="solve a standalone equation network")
    solve_cmd.add_argument('network', help="JSON {variables: [...], equations: [...]}")
    solve_cmd.add_argument('--tolerance', type=float, default=1e-9)
    solve_cmd.add_argument('--max-iter', type=int, default=100)
    solve_cmd.add_argument('--out')
    solve_cmd.set_defaults(func=cmd_solve)

    pi = commands.add_parser('pi', help="dimensionless groups of a variable list")
    pi.add_argument('variables', help="JSON {variables: [{name, dimension}]}")
    pi.add_argument('--out')
    pi.set_defaults(func=cmd_pi)

    export_cmd = commands.add_parser('export', help="re-serialize a saved graph.json")
    export_cmd.add_argument('bundle')
    export_cmd.add_argument('graph')
    export_cmd.add_argument('--format', choices=FORMATS, default='json')
    export_cmd.add_argument('--out')
    export_cmd.set_defaults(func=cmd_export)

    sens = commands.add_parser('sensitivity', help="partial derivatives of the solved design")
    sens.add_argument('bundle')
    sens.add_argument('--params')
    sens.add_argument('--output', action='append', metavar='LABEL')
    sens.add_argument('--input', action='append', metavar='LABEL')
    sens.add_argument('--max-steps', type=int, default=100000)
    sens.add_argument('--progress', action='store_true')
    sens.add_argument('--out')
    sens.set_defaults(func=cmd_sensitivity)

    variants = commands.add_parser('variants', help="run the language once per parameter set")
    variants.add_argument('bundle')
    variants.add_argument('--sets', required=True, help="JSON list of parameter objects")
    variants.add_argument('--out', default='variants')
    variants.add_argument('--plot', nargs=2, metavar=('X', 'Y'))
    variants.add_argument('--max-steps', type=int, default=100000)
    variants.add_argument('--progress', action='store_true')
    variants.set_defaults(func=cmd_variants)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=max(logging.WARNING - 10 * args.verbose, logging.DEBUG),
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except DesignError as err:
        sys.stderr.write("designc: %s\n" % err)
        return exit_code(err)
    except OSError as err:
        sys.stderr.write("designc: %s\n" % err)
        return EXIT_LOAD
