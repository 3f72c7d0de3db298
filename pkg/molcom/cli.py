"""The `molcom` command line: closed-form evaluation, the uniform-concentration
test, simulation, the accuracy experiment, homology checks and the peak of
the lower bound.

    molcom peak --config system1
    molcom homology --config-a system1 --config-b system2
    molcom uniform-test --rmax 0.5 --step 0.05 --out out/deviation.csv
    molcom accuracy --config system1 --config system2 --fast --threads 8 --out out/acc.csv
"""

import argparse
import logging
import sys
from typing import List, Optional

import numpy as np

from molcom import analytic, config, harness, physchem
from molcom.config import ConfigError, RunConfig
from molcom.harness import DataError, ExperimentKind, ExperimentSpec
from molcom.physchem import DomainError
from molcom.util import filepath
from molcom.util.log_filter import setup_console_logging

LOGGER = logging.getLogger('molcom.cli')

ERROR_EXIT_CODE = 1
KEYBOARD_INTERRUPT_EXIT_CODE = 2


def _load(args, name_or_path):
    # type: (argparse.Namespace, str) -> RunConfig
    """Load a config or preset and apply the --fast and --seed overrides."""
    run_config = config.resolve_config(name_or_path)
    if args.fast:
        run_config = config.fast_profile(run_config)
    if args.seed is not None:
        run_config = run_config.replace(seed=args.seed)
    return run_config


def _print_table(columns, table):
    print(','.join(columns))
    np.savetxt(sys.stdout, table, fmt='%.17g', delimiter=',')


def _write_svg(args, csv_filename, render):
    if args.svg:
        svg = render(filepath.suffixed(csv_filename, '', '.svg'))
        LOGGER.info('Plotted %s', svg)


def do_analytic(args):
    # type: (argparse.Namespace) -> int
    run_config = _load(args, args.config)
    table = harness.analytic_table(run_config, args.t_star)
    if args.out:
        harness.write_csv(args.out, harness.ANALYTIC_COLUMNS, table,
                          harness.metadata(run_config))
        LOGGER.info('Wrote %s', args.out)
    else:
        _print_table(harness.ANALYTIC_COLUMNS, table)
    return 0


def do_uniform_test(args):
    # type: (argparse.Namespace) -> int
    r_values = harness.r_star_values(args.rmax, args.step)
    t_star = harness.log_grid(args.tmin, args.tmax, args.points)
    table = harness.run_uniform_test(r_values, t_star)
    meta = {'receiver': 'sphere', 'distance_star': 1.0,
            'cube_sphere_supremum': table.supremum}
    LOGGER.info('Largest |cube - sphere| deviation difference: %.4g', table.supremum)

    harness.write_csv(args.out, table.columns, table.table(), meta)
    LOGGER.info('Wrote %s', args.out)
    if args.svg:
        from molcom import plot
        _write_svg(args, args.out, lambda svg: plot.plot_deviation(table, svg))

    if args.cube_out:
        harness.write_csv(args.cube_out, table.columns, table.table(cube=True),
                          dict(meta, receiver='cube'))
        LOGGER.info('Wrote %s', args.cube_out)
        if args.svg:
            from molcom import plot
            _write_svg(args, args.cube_out, lambda svg: plot.plot_deviation(table, svg, cube=True))
    return 0


def _simulated(args, spec):
    # type: (argparse.Namespace, ExperimentSpec) -> int
    result = harness.run_experiment(spec, workers=args.threads)
    if spec.out:
        for filename in harness.write_result(result, spec.out):
            LOGGER.info('Wrote %s', filename)
        if args.svg:
            from molcom import plot
            _write_svg(args, spec.out, lambda svg: plot.plot_result(result, svg))
    else:
        for curve in result.curves:
            _print_table(harness.TIME_SERIES_COLUMNS, curve.table())
    return 0


def do_simulate(args):
    # type: (argparse.Namespace) -> int
    spec = ExperimentSpec(
        ExperimentKind.ACCURACY, (_load(args, args.config),), n_trials=args.trials,
        out=args.out)
    return _simulated(args, spec)


def do_accuracy(args):
    # type: (argparse.Namespace) -> int
    configs = tuple(_load(args, name) for name in args.config)
    kind = ExperimentKind.TREND_SWEEP if args.sweep else ExperimentKind.ACCURACY
    spec = ExperimentSpec(kind, configs, n_trials=args.trials, out=args.out)
    return _simulated(args, spec)


def do_homology(args):
    # type: (argparse.Namespace) -> int
    a = _load(args, args.config_a)
    b = _load(args, args.config_b)
    report = harness.run_homology_check(a.params, b.params, args.rel_tol, a.refs, b.refs)
    print('A = {}, B = {}'.format(a.label, b.label))
    for line in report.lines():
        print(line)
    return 0 if report.homologous else ERROR_EXIT_CODE


def do_peak(args):
    # type: (argparse.Namespace) -> int
    run_config = _load(args, args.config)
    p = analytic.LowerBoundParams.from_system(run_config.params, run_config.refs)
    peak = analytic.lower_bound_peak(p, run_config.params, run_config.refs)
    print('{}: lower bound peak {:.4g} molecules at t_max = {:.4g} us'
          ' (C_Etot = {:.4g} uM)'.format(
              run_config.label, peak.count, peak.t_max * 1e6,
              physchem.molar_concentration(run_config.refs.c_etot) * 1e6))
    return 0


def build_parser():
    # type: () -> argparse.ArgumentParser
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int,
        help='Base random seed; overrides the config seed.')
    common.add_argument('--threads', type=int, default=1, metavar='N',
        help='Worker processes for the trials (default 1: run in-process).'
             ' Results do not depend on N.')
    common.add_argument('--fast', action='store_true',
        help='Scale every config down: molecule counts / {:g}, the enzyme box'
             ' shrunk to keep the enzyme concentration, {} trials.'.format(
                 1 / config.FAST_SCALE, config.FAST_TRIALS))
    common.add_argument('--svg', action='store_true',
        help='Also plot each written table to an SVG file next to it.')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true',
        help='Log debug messages.')
    verbosity.add_argument('-q', '--quiet', action='store_true',
        help='Log only warnings and errors.')

    parser = argparse.ArgumentParser(
        prog='molcom',
        description='Closed-form expectations and particle simulations of an'
                    ' enzyme-assisted diffusive molecular communication channel.'
                    ' --config takes a YAML file or a preset name ({}).'.format(
                        ', '.join(config.preset_names())))
    parser.add_argument('--presets', action='store_true',
        help='Print the directory of the preset configs, then exit.')
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')

    sub = subparsers.add_parser('analytic', parents=[common],
        help='Tabulate the closed-form counts of a system.')
    sub.add_argument('--config', required=True)
    sub.add_argument('--t-star', type=float, nargs='+', metavar='T',
        help='Dimensionless times (default: the config sample grid).')
    sub.add_argument('--out', help='CSV file (default: print).')
    sub.set_defaults(func=do_analytic)

    sub = subparsers.add_parser('uniform-test', parents=[common],
        help='Deviation of the uniform-concentration approximation vs r* and t*.')
    sub.add_argument('--rmax', type=float, default=0.5)
    sub.add_argument('--step', type=float, default=0.05)
    sub.add_argument('--tmin', type=float, default=0.01)
    sub.add_argument('--tmax', type=float, default=10.0)
    sub.add_argument('--points', type=int, default=200)
    sub.add_argument('--out', required=True, help='CSV file for the spherical receivers.')
    sub.add_argument('--cube-out', help='CSV file for the volume-matched cubes.')
    sub.set_defaults(func=do_uniform_test)

    sub = subparsers.add_parser('simulate', parents=[common],
        help='Simulate one system and pair it with its analytic curves.')
    sub.add_argument('--config', required=True)
    sub.add_argument('--trials', type=int, help='Trials (default: the config n_trials).')
    sub.add_argument('--out', help='CSV file (default: print).')
    sub.set_defaults(func=do_simulate)

    sub = subparsers.add_parser('accuracy', parents=[common],
        help='Simulated counts vs the enzyme lower bound for one or more systems.')
    sub.add_argument('--config', required=True, action='append',
        help='Repeat for several systems.')
    sub.add_argument('--sweep', action='store_true',
        help='Add the modified versions of the first system.')
    sub.add_argument('--trials', type=int, help='Trials (default: each config n_trials).')
    sub.add_argument('--out', required=True,
        help='CSV file; with several curves, one <stem>_<label>.csv each.')
    sub.set_defaults(func=do_accuracy)

    sub = subparsers.add_parser('homology', parents=[common],
        help='Compare the dimensionless constants of two systems;'
             ' exit 0 iff they are homologous.')
    sub.add_argument('--config-a', required=True)
    sub.add_argument('--config-b', required=True)
    sub.add_argument('--rel-tol', type=float, default=1e-9)
    sub.set_defaults(func=do_homology)

    sub = subparsers.add_parser('peak', parents=[common],
        help='Time and height of the lower-bound peak.')
    sub.add_argument('--config', required=True)
    sub.set_defaults(func=do_peak)

    return parser


def main(argv=None):
    # type: (Optional[List[str]]) -> int
    """Run the command line `argv` (default sys.argv[1:]); return the exit
    code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else ERROR_EXIT_CODE

    if args.presets:
        print(config.PRESET_DIR)
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    setup_console_logging(level)

    try:
        return args.func(args)
    except KeyboardInterrupt:
        LOGGER.warning('molcom %s -- KeyboardInterrupt exit', args.command)
        return KEYBOARD_INTERRUPT_EXIT_CODE
    except (ConfigError, DomainError, DataError, OSError) as e:
        LOGGER.error('molcom %s -- %s', args.command, e)
        return ERROR_EXIT_CODE
    except Exception as e:
        LOGGER.exception('molcom %s -- error exit: %s', args.command, e)
        return ERROR_EXIT_CODE


def cli():
    """Console script entry point."""
    sys.exit(main())


if __name__ == '__main__':
    cli()
