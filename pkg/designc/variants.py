import logging

import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns
from tqdm import tqdm

from .bundle import execute, load_bundle, read_param
from .errors import DesignError

logger = logging.getLogger(__name__)


def variant_row(graph):
    """ the final numeric attributes of one design, keyed 'Class.attr' ('Class[id].attr' when
    the class has several instances) """
    counts = {}
    for nid in graph.nodes():
        counts[graph.node_class(nid)] = counts.get(graph.node_class(nid), 0) + 1
    row = {}
    for nid in graph.nodes():
        cls = graph.node_class(nid)
        prefix = cls if counts[cls] == 1 else "%s[%d]" % (cls, nid)
        for name, value in sorted(graph.attrs(nid).items()):
            if isinstance(value, float):
                row["%s.%s" % (prefix, name)] = value
    return row


def run_one(bundle_path, variant_number, parameters, solver_options=None, max_steps=None):
    bundle = load_bundle(bundle_path, parameters)
    graph, trace, _ = execute(bundle, solver_options, max_steps)
    row = {'Variant': variant_number, 'Steps': len(trace), 'Status': 'ok'}
    row.update(variant_row(graph))
    return row


def _param_value(name, value):
    try:
        return read_param(name, value)[0]
    except DesignError:
        return value


def run_variants(bundle_path, parameter_sets, solver_options=None, max_steps=None, progress=True):
    """
    execute the language once per parameter set

    :param parameter_sets: list of dicts name -> raw parameter value ('0.5 [kg/s]', numbers...)
    :return: pandas.DataFrame, one row per variant: the parameter values (unit tags dropped), then the final
             numeric attributes; failed variants keep their row with the error in 'Status'
    """
    rows = [None] * len(parameter_sets)
    for ii in tqdm(range(len(parameter_sets)), disable=not progress):
        parameters = parameter_sets[ii]
        try:
            rows[ii] = run_one(bundle_path, ii, parameters, solver_options, max_steps)
        except DesignError as err:
            logger.warning("variant %d failed: %s", ii, err)
            rows[ii] = {'Variant': ii, 'Steps': None, 'Status': type(err).__name__}
        for name, value in sorted(parameters.items()):
            rows[ii]['params.%s' % name] = _param_value(name, value)

    results = pd.DataFrame(rows)
    leading = ['Variant', 'Status', 'Steps'] + sorted(c for c in results.columns if c.startswith('params.'))
    return results[leading + sorted(c for c in results.columns if c not in leading)]


def plot_variants(df, x, y, hue=None, figsize=(5, 3), ax=None):
    """ one point per successful variant, y against x """
    data = df[df['Status'] == 'ok']
    with sns.axes_style('ticks'):
        if ax is None:
            _, ax = plt.subplots(figsize=figsize)
        sns.scatterplot(data=data, x=x, y=y, hue=hue, ax=ax, palette='Set2' if hue else None)
        if data[x].nunique() > 1:
            sns.lineplot(data=data.sort_values(x), x=x, y=y, ax=ax, color='0.6', zorder=0)
        sns.despine(offset=5)
    return ax


__all__ = ['run_variants', 'run_one', 'variant_row', 'plot_variants']
