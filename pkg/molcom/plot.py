"""Static SVG line plots of the emitted tables, log t* axis. A convenience
view of the CSV files, which remain the results.
"""

import logging

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from molcom.harness import DeviationTable, ExperimentResult  # noqa: E402
from molcom.util import filepath  # noqa: E402

LOGGER = logging.getLogger('molcom.plot')


def _save(fig, filename):
    # type: (plt.Figure, str) -> str
    filepath.prepare_output(filename)
    fig.savefig(filename, format='svg')
    plt.close(fig)
    LOGGER.debug('Wrote %s', filename)
    return filename


def plot_result(result, filename):
    # type: (ExperimentResult, str) -> str
    """Simulated means with 3-standard-error bars and their lower bounds."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for curve in result.curves:
        series = curve.series
        line = ax.errorbar(series.t_star, series.mean_star, yerr=3 * series.std_err_star,
                           fmt='o', markersize=3, label=curve.label)
        color = line[0].get_color()
        ax.plot(series.t_star, curve.lower_bound_star, '--', color=color, linewidth=1)
        ax.plot(series.t_star, curve.no_enzyme_star, ':', color=color, linewidth=1)
    ax.set_xscale('log')
    ax.set_xlabel('t*_A')
    ax.set_ylabel('expected count N*_A,obs')
    ax.set_title('{} (dashed: lower bound, dotted: no enzymes)'.format(result.kind.value))
    ax.legend(fontsize='small')
    return _save(fig, filename)


def plot_deviation(table, filename, cube=False):
    # type: (DeviationTable, str, bool) -> str
    """One deviation curve per r*."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    values = table.cube if cube else table.sphere
    for k, r in enumerate(table.r_star):
        ax.plot(table.t_star, values[:, k], label='r* = {:g}'.format(r))
    ax.axhline(0.0, color='gray', linewidth=0.5)
    ax.set_xscale('log')
    ax.set_xlabel('t*_A')
    ax.set_ylabel('relative deviation')
    ax.set_title('uniform concentration, {} receiver'.format('cube' if cube else 'sphere'))
    ax.legend(fontsize='small', ncol=2)
    return _save(fig, filename)

