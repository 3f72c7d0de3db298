"""Experiment orchestration: trial batches and their aggregation, and the
experiments built on them (the uniform-concentration test, the accuracy of
the enzyme lower bound, dimensional homology and the parameter trend sweep).

Trials fan out to a process pool; results are always reduced in trial-index
order, so the worker count never changes an output byte.
"""

import enum
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import (
    Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple)

import numpy as np

from molcom import analytic, physchem, simulator
from molcom.config import KEYS_BY_NAME, ConfigError, RunConfig
from molcom.physchem import DomainError, ReferenceSet, SystemParams
from molcom.util import data, filepath

LOGGER = logging.getLogger('molcom.harness')

#: The t* window of the time-averaged relative gap to the lower bound.
GAP_WINDOW = (0.05, 1.0)

TIME_SERIES_COLUMNS = (
    't_star', 't_seconds', 'mean_count_star', 'std_err_star',
    'analytic_no_enzyme_star', 'analytic_lower_bound_star', 'n_trials')

ANALYTIC_COLUMNS = (
    't_star', 't_seconds', 'exact_count_star', 'uniform_count_star',
    'lower_bound_star', 'deviation')


class DataError(ValueError):
    """Empty or ragged per-trial rows."""
    pass


def aggregate(rows):
    # type: (Sequence[Sequence[float]]) -> Tuple[np.ndarray, np.ndarray]
    """Return the per-column sample mean and standard error (sample standard
    deviation / sqrt(n)) of equal-length rows. One row has a 0 standard
    error.
    """
    if not len(rows):
        raise DataError('aggregate needs at least one row')
    lengths = {len(row) for row in rows}
    if len(lengths) != 1:
        raise DataError('rows have mismatched lengths {}'.format(sorted(lengths)))

    matrix = np.asarray(rows, dtype=float)
    n = matrix.shape[0]
    mean = matrix.mean(axis=0)
    if n == 1:
        return mean, np.zeros_like(mean)
    return mean, matrix.std(axis=0, ddof=1) / math.sqrt(n)


def run_trials(config, n_trials, workers=1):
    # type: (simulator.SimConfig, int, int) -> simulator.ObservationSeries
    """Run trials 0 .. n_trials-1 of `config` on up to `workers` processes
    and aggregate them in trial order.
    """
    if n_trials < 1:
        raise DataError('n_trials must be >= 1, got {}'.format(n_trials))

    if workers <= 1:
        rows = [simulator.run_trial(config, i) for i in range(n_trials)]
    else:
        chunksize = max(1, n_trials // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(
                simulator.run_trial, itertools.repeat(config, n_trials), range(n_trials),
                chunksize=chunksize))

    if len(config.sample_times):
        mean, std_err = aggregate([row.counts for row in rows])
    else:
        mean = std_err = np.zeros(0)
    return simulator.make_series(config, rows, mean, std_err)


@dataclass(frozen=True)
class Curve:
    """One simulated curve with its paired analytic curves, all at the
    realized sample times and in dimensionless counts.
    """
    label: str
    series: simulator.ObservationSeries
    no_enzyme_star: np.ndarray
    lower_bound_star: np.ndarray

    def table(self) -> np.ndarray:
        series = self.series
        return np.column_stack([
            series.t_star,
            series.t_seconds,
            series.mean_star,
            series.std_err_star,
            self.no_enzyme_star,
            self.lower_bound_star,
            np.full(len(series.t_star), series.n_trials),
        ])


def paired_analytic(params, refs, t_star):
    # type: (SystemParams, ReferenceSet, np.ndarray) -> Tuple[np.ndarray, np.ndarray]
    """The no-enzyme and lower-bound dimensionless counts at t_star."""
    if not len(t_star):
        return np.zeros(0), np.zeros(0)
    p = analytic.LowerBoundParams.from_system(params, refs)
    return (np.asarray(analytic.no_enzyme_count(p, t_star)),
            np.asarray(analytic.enzyme_lower_bound_count(p, t_star)))


def run_curve(run_config, n_trials=None, workers=1, label=None):
    # type: (RunConfig, Optional[int], int, Optional[str]) -> Curve
    n_trials = n_trials or run_config.n_trials
    label = label or run_config.label
    LOGGER.debug('Curve %s: %s trials', label, n_trials)
    series = run_trials(run_config.sim, n_trials, workers)
    no_enzyme, lower_bound = paired_analytic(run_config.params, run_config.refs, series.t_star)
    return Curve(label, series, no_enzyme, lower_bound)


def relative_gap(curve, window=GAP_WINDOW):
    # type: (Curve, Tuple[float, float]) -> Tuple[float, float]
    """The time-averaged relative gap (simulated - lower bound) / lower bound
    over the samples with t* in `window`, and its standard error. Each trial
    is averaged over the window first; the spread across trials gives the
    standard error.
    """
    series = curve.series
    in_window = (series.t_star >= window[0]) & (series.t_star <= window[1])
    if not in_window.any():
        raise DataError('no sample times in the t* window {}'.format(window))

    bound = curve.lower_bound_star[in_window]
    counts_star = series.counts[:, in_window] / series.n_ref
    per_trial = np.mean((counts_star - bound) / bound, axis=1)
    mean, std_err = aggregate(per_trial[:, np.newaxis])
    return float(mean[0]), float(std_err[0])


def metadata(run_config):
    # type: (RunConfig) -> Dict[str, Any]
    """The provenance of a result: config hash, seed, trial count and the
    dimensionless constants.
    """
    meta = {
        'label': run_config.label,
        'config_hash': data.config_hash(run_config.values),
        'seed': run_config.seed,
        'n_trials': run_config.n_trials,
    }  # type: Dict[str, Any]
    try:
        constants = physchem.dimensionless_constants(run_config.params, run_config.refs)
        meta.update(constants.as_dict())
        meta['accuracy_loss'] = physchem.accuracy_loss(run_config.params, run_config.refs)
    except DomainError as e:
        LOGGER.warning('No dimensionless constants for %s: %s', run_config.label, e)
    return meta


class ExperimentKind(enum.Enum):
    UNIFORM_TEST = 'uniform_test'
    ACCURACY = 'accuracy'
    HOMOLOGY = 'homology'
    TREND_SWEEP = 'trend_sweep'


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run: the experiment kind, its base configs, optional sweep
    axes (config key -> values), the trial count per curve (None: each
    config's own) and the output path.
    """
    kind: ExperimentKind
    configs: Tuple[RunConfig, ...]
    sweep: Mapping[str, Sequence[Any]] = field(default_factory=dict)
    n_trials: Optional[int] = None
    out: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'configs', tuple(self.configs))
        if self.n_trials is not None and self.n_trials < 1:
            raise DataError('n_trials must be >= 1, got {}'.format(self.n_trials))
        unknown = sorted(name for name in self.sweep if name not in KEYS_BY_NAME)
        if unknown:
            raise DataError('sweep over unknown parameters: {}'.format(', '.join(unknown)))
        if self.kind is not ExperimentKind.UNIFORM_TEST and not self.configs:
            raise DataError('a {} experiment needs a config'.format(self.kind.value))


@dataclass(frozen=True)
class ExperimentResult:
    """Simulated curves (each with its analytic pair) plus, per curve
    label, the provenance metadata and the time-averaged relative gap.
    """
    kind: ExperimentKind
    curves: Tuple[Curve, ...]
    metadata: Mapping[str, Mapping[str, Any]]
    gaps: Mapping[str, Tuple[float, float]] = field(default_factory=dict)

    def curve(self, label):
        # type: (str) -> Curve
        for curve in self.curves:
            if curve.label == label:
                return curve
        raise KeyError(label)


def _run_curves(kind, labelled_configs, n_trials, workers):
    # type: (ExperimentKind, Sequence[Tuple[str, RunConfig]], Optional[int], int) -> ExperimentResult
    start = time.monotonic()
    LOGGER.info('Starting the %s experiment: %s curve(s)', kind.value, len(labelled_configs))

    curves = []
    meta = {}
    gaps = {}
    for label, run_config in labelled_configs:
        curve = run_curve(run_config, n_trials, workers, label)
        curves.append(curve)
        meta[label] = dict(metadata(run_config), n_trials=curve.series.n_trials)
        try:
            gaps[label] = relative_gap(curve)
        except DataError as e:
            LOGGER.debug('No relative gap for %s: %s', label, e)

    LOGGER.info('Finished the %s experiment in %s', kind.value,
                data.format_duration(time.monotonic() - start))
    return ExperimentResult(kind, tuple(curves), meta, gaps)


def run_accuracy(configs, n_trials=None, workers=1):
    # type: (Sequence[RunConfig], Optional[int], int) -> ExperimentResult
    """Simulate each system and pair it with its lower-bound and no-enzyme
    curves.
    """
    labels = unique_labels([c.label for c in configs])
    return _run_curves(ExperimentKind.ACCURACY, list(zip(labels, configs)), n_trials, workers)


def unique_labels(labels):
    # type: (Sequence[str]) -> List[str]
    """Suffix repeated labels with _2, _3, ... so output files don't collide."""
    seen = {}  # type: Dict[str, int]
    result = []
    for label in labels:
        seen[label] = seen.get(label, 0) + 1
        result.append(label if seen[label] == 1 else '{}_{}'.format(label, seen[label]))
    return result


# ----------------------------------------------------------------------------
# Trend sweep

Variant = Tuple[str, Callable[[Mapping[str, Any]], Dict[str, Any]]]


def _scaled(key, factor, whole=False):
    # type: (str, float, bool) -> Callable[[Mapping[str, Any]], Dict[str, Any]]
    def overrides(values):
        value = values[key] * factor
        return {key: int(round(value)) if whole else value}
    return overrides


def _distance_doubled(values):
    # type: (Mapping[str, Any]) -> Dict[str, Any]
    overrides = {name: values[name] * 2
                 for name in ('receiver_x_nm', 'receiver_y_nm', 'receiver_z_nm')}
    if 'reference_length_nm' in values:
        overrides['reference_length_nm'] = values['reference_length_nm'] * 2
    return overrides


#: Modified versions of a base system. With System 1 as the base,
#: n_E_halved is N_E = 1e5 and k2_x10 is k2 = 2e7.
DEFAULT_VARIANTS = (
    ('n_E_halved', _scaled('n_E_molecules', 0.5, whole=True)),
    ('k1_halved', _scaled('k1_m3_per_molecule_s', 0.5)),
    ('k2_x10', _scaled('k2_per_s', 10.0)),
    ('distance_doubled', _distance_doubled),
    ('n_A_halved', _scaled('n_A_molecules', 0.5, whole=True)),
    ('k1_doubled', _scaled('k1_m3_per_molecule_s', 2.0)),
    ('n_E_doubled', _scaled('n_E_molecules', 2.0, whole=True)),
)  # type: Tuple[Variant, ...]

BASELINE = 'baseline'


def sweep_configs(base, variants=DEFAULT_VARIANTS, sweep=None):
    # type: (RunConfig, Sequence[Variant], Optional[Mapping[str, Sequence[Any]]]) -> List[Tuple[str, RunConfig]]
    """The baseline followed by each variant and each `key=value` point of
    the sweep axes. Variants the base system can't hold (e.g. a receiver
    that no longer fits inside the enzyme box) are skipped with a warning.
    """
    configs = [(BASELINE, base)]

    def add(label, overrides):
        try:
            configs.append((label, base.replace(**overrides)))
        except ConfigError as e:
            LOGGER.warning('Skipping the %s variant: %s', label, e)

    for label, make_overrides in variants:
        add(label, make_overrides(base.values))
    for key, values in (sweep or {}).items():
        for value in values:
            add('{}={}'.format(key, value), {key: value})
    return configs


def run_experiment(spec, workers=1):
    # type: (ExperimentSpec, int) -> ExperimentResult
    """Run a simulated experiment: the accuracy curves of every config, and
    for a trend sweep also the modified versions of the first config.
    """
    labels = unique_labels([c.label for c in spec.configs])
    labelled = list(zip(labels, spec.configs))
    if spec.kind is ExperimentKind.TREND_SWEEP:
        variants = sweep_configs(spec.configs[0], sweep=spec.sweep)[1:]
        labelled += [('{}_{}'.format(labels[0], label), run_config)
                     for label, run_config in variants]
    elif spec.kind is not ExperimentKind.ACCURACY:
        raise DataError('{} is not a simulated experiment'.format(spec.kind.value))
    return _run_curves(spec.kind, labelled, spec.n_trials, workers)


def run_trend_sweep(base, n_trials=None, workers=1, variants=DEFAULT_VARIANTS, sweep=None):
    # type: (RunConfig, Optional[int], int, Sequence[Variant], Optional[Mapping[str, Sequence[Any]]]) -> ExperimentResult
    """Simulate the base system and its modified versions; every curve
    carries its time-averaged relative gap to the lower bound.
    """
    configs = sweep_configs(base, variants, sweep)
    result = _run_curves(ExperimentKind.TREND_SWEEP, configs, n_trials, workers)
    for label, (gap, err) in result.gaps.items():
        LOGGER.info('  %-20s relative gap %.4g +- %.2g', label, gap, err)
    return result


# ----------------------------------------------------------------------------
# Homology

@dataclass(frozen=True)
class HomologyReport:
    constants_a: physchem.DimensionlessConstants
    constants_b: physchem.DimensionlessConstants
    differences: Mapping[str, float]
    homologous: bool
    rel_tol: float
    accuracy_loss_a: float
    accuracy_loss_b: float
    c_etot_molar_a: float
    c_etot_molar_b: float

    def lines(self) -> List[str]:
        """The report as printable lines."""
        a = self.constants_a.as_dict()
        b = self.constants_b.as_dict()
        lines = ['{:<16} {:>14} {:>14} {:>10}'.format('constant', 'A', 'B', 'rel diff')]
        for name in physchem.DimensionlessConstants.NAMES:
            lines.append('{:<16} {:>14.6g} {:>14.6g} {:>10.3g}'.format(
                name, a[name], b[name], self.differences[name]))
        lines.append('{:<16} {:>14.6g} {:>14.6g}'.format(
            'accuracy_loss', self.accuracy_loss_a, self.accuracy_loss_b))
        lines.append('{:<16} {:>14.6g} {:>14.6g}'.format(
            'C_Etot (uM)', self.c_etot_molar_a * 1e6, self.c_etot_molar_b * 1e6))
        lines.append('homologous (rel_tol {:g}): {}'.format(
            self.rel_tol, 'yes' if self.homologous else 'no'))
        return lines


def run_homology_check(a, b, rel_tol=1e-9, refs_a=None, refs_b=None):
    # type: (SystemParams, SystemParams, float, Optional[ReferenceSet], Optional[ReferenceSet]) -> HomologyReport
    """Compare the dimensionless constants of two systems, each with its own
    reference set (default: reference_set()).
    """
    refs_a = refs_a or physchem.reference_set(a)
    refs_b = refs_b or physchem.reference_set(b)
    constants_a = physchem.dimensionless_constants(a, refs_a)
    constants_b = physchem.dimensionless_constants(b, refs_b)
    return HomologyReport(
        constants_a=constants_a,
        constants_b=constants_b,
        differences=physchem.relative_differences(constants_a, constants_b),
        homologous=physchem.is_homologous(constants_a, constants_b, rel_tol),
        rel_tol=rel_tol,
        accuracy_loss_a=physchem.accuracy_loss(a, refs_a),
        accuracy_loss_b=physchem.accuracy_loss(b, refs_b),
        c_etot_molar_a=physchem.molar_concentration(refs_a.c_etot),
        c_etot_molar_b=physchem.molar_concentration(refs_b.c_etot))


# ----------------------------------------------------------------------------
# Uniform-concentration test

def r_star_values(r_max=0.5, step=0.05):
    # type: (float, float) -> np.ndarray
    """step, 2 step, ... r_max."""
    if not 0 < step <= r_max < 1:
        raise DomainError('need 0 < step <= r_max < 1, got step {} and r_max {}'.format(
            step, r_max))
    count = int(math.floor(r_max / step + 1e-9))
    return np.round(step * np.arange(1, count + 1), 12)


def log_grid(t_min, t_max, points):
    # type: (float, float, int) -> np.ndarray
    if not 0 < t_min < t_max or points < 2:
        raise DomainError('need 0 < t_min < t_max and >= 2 points')
    return np.geomspace(t_min, t_max, points)


@dataclass(frozen=True)
class DeviationTable:
    """Relative deviations of the uniform approximation for spherical
    receivers (and their volume-matched cubes) at unit distance, one column
    per r*.
    """
    t_star: np.ndarray
    r_star: np.ndarray
    sphere: np.ndarray  # (len(t_star), len(r_star))
    cube: np.ndarray

    @property
    def columns(self) -> List[str]:
        return ['t_star'] + ['r_star_{:g}'.format(r) for r in self.r_star]

    def table(self, cube=False):
        # type: (bool) -> np.ndarray
        return np.column_stack([self.t_star, self.cube if cube else self.sphere])

    @property
    def supremum(self) -> float:
        """max |cube deviation - sphere deviation| over the table."""
        return float(np.max(np.abs(self.cube - self.sphere)))


def run_uniform_test(r_values, t_star):
    # type: (Sequence[float], Sequence[float]) -> DeviationTable
    """Tabulate uniform_deviation() for spherical receivers of radius r* in
    `r_values` at unit distance, and for their volume-matched cubes.
    Purely analytic.
    """
    r_values = np.asarray(r_values, dtype=float)
    t = np.asarray(t_star, dtype=float)
    if np.any(r_values <= 0) or np.any(r_values >= 1):
        raise DomainError('r* values must lie in (0, 1)')
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise DomainError('the t* grid must be positive and ascending')

    sphere_columns = []
    cube_columns = []
    for r in r_values:
        sphere = analytic.sphere_receiver(1.0, float(r))
        sphere_columns.append(analytic.uniform_deviation(sphere, t))
        cube_columns.append(analytic.uniform_deviation(analytic.volume_matched_cube(sphere), t))
    return DeviationTable(
        t, r_values, np.column_stack(sphere_columns), np.column_stack(cube_columns))


def cube_sphere_supremum(r_values, t_star):
    # type: (Sequence[float], Sequence[float]) -> float
    return run_uniform_test(r_values, t_star).supremum


# ----------------------------------------------------------------------------
# Closed-form table

def analytic_table(run_config, t_star=None):
    # type: (RunConfig, Optional[Sequence[float]]) -> np.ndarray
    """The closed-form curves of a system at t_star (default: its sample
    grid), columns ANALYTIC_COLUMNS. The deviation is NaN where the exact
    count underflows.
    """
    params, refs = run_config.params, run_config.refs
    if t_star is None:
        t = simulator.requested_t_star(run_config.sim)
    else:
        t = np.asarray(t_star, dtype=float)
    geom = analytic.receiver_geometry(params, refs)
    p = analytic.LowerBoundParams.from_system(params, refs)

    exact = np.asarray(analytic.exact_count(geom, t))
    uniform = np.asarray(analytic.uniform_count(geom, t))
    deviation = np.full_like(exact, np.nan)
    determinate = exact >= analytic.UNDERFLOW_COUNT
    deviation[determinate] = uniform[determinate] / exact[determinate] - 1
    t_seconds = np.array(simulator.sample_times_for(params, refs, t))
    return np.column_stack([
        t, t_seconds, exact, uniform,
        np.asarray(analytic.enzyme_lower_bound_count(p, t)), deviation])


# ----------------------------------------------------------------------------
# Output

def write_csv(filename, columns, table, meta=None):
    # type: (str, Sequence[str], np.ndarray, Optional[Mapping[str, Any]]) -> str
    """Write `table` as CSV with `# key: value` metadata lines, a header row
    and 17 significant digits per value. Returns the filename.
    """
    filepath.prepare_output(filename)
    with open(filename, 'w', newline='\n') as f:
        for key, value in (meta or {}).items():
            f.write('# {}: {}\n'.format(key, value))
        np.savetxt(f, np.atleast_2d(table).reshape(-1, len(columns)), fmt='%.17g',
                   delimiter=',', header=','.join(columns), comments='')
    LOGGER.debug('Wrote %s', filename)
    return filename


def write_result(result, out):
    # type: (ExperimentResult, str) -> List[str]
    """Write every curve of `result`: to `out` for a single curve, else to
    <stem>_<label>.csv per curve.
    """
    written = []
    single = len(result.curves) == 1
    for curve in result.curves:
        meta = dict(result.metadata.get(curve.label, {}))
        if curve.label in result.gaps:
            gap, err = result.gaps[curve.label]
            meta['relative_gap'] = gap
            meta['relative_gap_std_err'] = err
        filename = out if single else filepath.suffixed(out, curve.label.replace('=', '-'))
        written.append(write_csv(filename, TIME_SERIES_COLUMNS, curve.table(), meta))
    return written
