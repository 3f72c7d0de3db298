"""Statistical end-to-end checks of the simulator against the closed forms.
Each takes minutes; run them with --runslow.
"""

import math
import os

import numpy as np
import pytest

from molcom import analytic, harness, simulator
from molcom.config import fast_profile
from molcom.harness import ExperimentKind, ExperimentSpec

pytestmark = pytest.mark.slow

WORKERS = os.cpu_count() or 1
GRID = dict(sample_t_star_min=0.05, sample_t_star_max=0.6, sample_count=10)


@pytest.fixture(scope='module')
def fast1(system1):
    return fast_profile(system1).replace(**GRID)


@pytest.fixture(scope='module')
def fast2(system2):
    return fast_profile(system2).replace(**GRID)


@pytest.fixture(scope='module')
def baseline_curve(fast1):
    return harness.run_curve(fast1, workers=WORKERS)


def test_free_diffusion_matches_the_exact_count(system1):
    # Unscaled box: with no enzymes A diffuses freely either way.
    run_config = system1.replace(
        n_A_molecules=1000, n_E_molecules=0, k1_m3_per_molecule_s=0.0, n_trials=600, **GRID)
    series = harness.run_curve(run_config, workers=WORKERS).series
    exact = analytic.sphere_count(1.0, 0.15, series.t_star)

    assert np.all(series.std_err_star > 0)
    assert np.all(np.abs(series.mean_star - exact) <= 3 * series.std_err_star)


def test_simulation_lies_between_the_bounds(baseline_curve):
    series = baseline_curve.series
    exact = analytic.sphere_count(1.0, 0.15, series.t_star)
    slack = 3 * series.std_err_star

    assert np.all(series.mean_star >= baseline_curve.lower_bound_star - slack)
    assert np.all(series.mean_star <= exact + slack)


def test_homologous_systems_give_the_same_dimensionless_curve(baseline_curve, fast2):
    other = harness.run_curve(fast2, workers=WORKERS).series
    series = baseline_curve.series
    assert np.allclose(series.t_star, other.t_star, rtol=1e-12)

    tolerance = 3 * (series.std_err_star + other.std_err_star)
    assert np.all(np.abs(series.mean_star - other.mean_star) <= tolerance)


def test_parameter_trends(fast1):
    variants = [variant for variant in harness.DEFAULT_VARIANTS
                if variant[0] in ('k1_doubled', 'n_E_doubled', 'k2_x10', 'n_A_halved')]
    result = harness.run_trend_sweep(fast1, workers=WORKERS, variants=variants)
    gaps = result.gaps
    base_gap, base_err = gaps[harness.BASELINE]

    def combined(label):
        return math.hypot(gaps[label][1], base_err)

    # More enzyme activity widens the gap to the lower bound.
    for label in ('k1_doubled', 'n_E_doubled'):
        assert gaps[label][0] - base_gap > combined(label), label

    # Faster degradation of EA frees the enzymes sooner and narrows it.
    assert base_gap - gaps['k2_x10'][0] > combined('k2_x10')

    # Fewer A molecules occupy fewer enzymes: the gap doesn't widen.
    assert gaps['n_A_halved'][0] <= base_gap + 3 * combined('n_A_halved')

    # More enzyme activity also means fewer molecules at the receiver.
    base = result.curve(harness.BASELINE).series
    for label in ('k1_doubled', 'n_E_doubled'):
        series = result.curve(label).series
        slack = 3 * math.sqrt(np.sum(base.std_err_star ** 2 + series.std_err_star ** 2))
        assert np.sum(series.mean_star) < np.sum(base.mean_star) - slack, label


def test_molecules_are_conserved_over_a_million_steps(system1):
    run_config = system1.replace(
        n_A_molecules=20, n_E_molecules=400, enz_box_side_um=0.5, **GRID)
    config = run_config.sim
    state = simulator.init_sim(config, trial_index=7)
    half = config.params.enz_box_side / 2

    for _ in range(10 ** 6):
        simulator.step(state)
        assert simulator.conserved(state)
        assert np.all(np.abs(state.free_e) <= half)
        assert np.all(np.abs(state.bound) <= half)
    assert state.step_index == 10 ** 6


def test_output_does_not_depend_on_the_worker_count(fast1, tmp_path):
    spec = ExperimentSpec(ExperimentKind.ACCURACY, (fast1,), n_trials=48)
    outputs = set()
    for workers in (1, 4, 8):
        out = str(tmp_path / 'acc_{}.csv'.format(workers))
        harness.write_result(harness.run_experiment(spec, workers), out)
        with open(out, 'rb') as f:
            outputs.add(f.read())
    assert len(outputs) == 1
