import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats

from molcom import physchem, simulator
from molcom.physchem import Tag
from molcom.simulator import SimConfigError


def fresh_state(run_config, trial_index=0):
    return simulator.init_sim(run_config.sim, trial_index)


def test_sim_config_derived_values(system1):
    sim = system1.sim
    assert sim.dt == pytest.approx(0.5e-6)
    assert sim.binding_radius == pytest.approx(2.88e-9, rel=0.01)
    assert sim.rms_step(Tag.A) == pytest.approx(20.9e-9, rel=0.01)
    assert sim.binding_radius < sim.rms_step(Tag.A)

    assert len(sim.sample_steps) == 40
    assert all(b >= a for a, b in zip(sim.sample_steps, sim.sample_steps[1:]))
    assert sim.realized_times[0] == sim.sample_steps[0] * sim.dt


def test_sim_config_validation(system1):
    sim = system1.sim
    with pytest.raises(SimConfigError):
        simulator.SimConfig(sim.params, sim.refs, 0.0, sim.sample_times)
    with pytest.raises(SimConfigError):
        simulator.SimConfig(sim.params, sim.refs, sim.dt, (2e-6, 1e-6))
    with pytest.raises(SimConfigError):
        simulator.SimConfig(sim.params, sim.refs, sim.dt, (-1e-6,))
    with pytest.raises(SimConfigError):
        simulator.SimConfig(sim.params, sim.refs, sim.dt, (), release_placement='nearby')
    with pytest.raises(SimConfigError):
        simulator.SimConfig(sim.params, sim.refs, sim.dt, (), seed=-1)
    assert issubclass(SimConfigError, ValueError)


def test_sample_steps_round_to_the_nearest_step(system1, caplog):
    sim = system1.sim
    config = simulator.SimConfig(sim.params, sim.refs, 1e-6, (0.2e-6, 2.4e-6, 2.6e-6))
    assert config.sample_steps == (1, 2, 3)
    assert 'under half a step' in caplog.text
    assert config.realized_times == pytest.approx((1e-6, 2e-6, 3e-6))


def test_short_sample_time_warns_once(system1, caplog):
    sim = system1.sim
    config = simulator.SimConfig(sim.params, sim.refs, 1e-6, (0.2e-6, 2e-6))
    for _ in range(5):
        assert config.sample_steps == (1, 2)
        assert config.realized_times == pytest.approx((1e-6, 2e-6))
    warnings = [r for r in caplog.records if 'under half a step' in r.getMessage()]
    assert len(warnings) == 1


def test_init_sim(system1):
    state = fresh_state(system1)
    assert state.tallies() == simulator.Tallies(10000, 200000, 0, 0)
    assert not state.free_a.any()
    half = system1.params.enz_box_side / 2
    assert np.all(np.abs(state.free_e) <= half)
    assert state.step_index == 0
    assert simulator.conserved(state)


def test_init_sim_enzymes_are_uniform(system1):
    state = fresh_state(system1)
    octant = (state.free_e > 0).astype(int) @ np.array([1, 2, 4])
    observed = np.bincount(octant, minlength=8)
    assert stats.chisquare(observed).pvalue > 0.001


def test_init_sim_without_enzymes(small_system):
    state = fresh_state(small_system.replace(n_E_molecules=0))
    assert len(state.free_e) == 0
    assert [p.species for p in state.particles()] == [Tag.A] * 200


def test_init_sim_is_deterministic(small_system):
    one = fresh_state(small_system)
    two = fresh_state(small_system)
    other = fresh_state(small_system, trial_index=1)
    assert np.array_equal(one.free_e, two.free_e)
    assert not np.array_equal(one.free_e, other.free_e)

    simulator.step(one)
    simulator.step(two)
    assert np.array_equal(one.free_a, two.free_a)


def test_diffusion_step_law(small_system):
    state = fresh_state(small_system.replace(n_A_molecules=100000, n_E_molecules=0))
    dt = small_system.sim.dt
    simulator.diffuse(state, dt)

    displacements = state.free_a.ravel()
    n = len(displacements)
    variance = 2 * small_system.params.diffusion(Tag.A) * dt
    assert abs(displacements.mean()) < 3 * math.sqrt(variance / n)
    # The standard error of a sample variance is about variance * sqrt(2 / (n - 1)).
    assert displacements.var(ddof=1) == pytest.approx(
        variance, abs=3 * variance * math.sqrt(2 / (n - 1)))


def test_diffusion_coefficients_per_species(small_system):
    state = fresh_state(small_system)
    state.bound = np.zeros((50000, 3))
    start_e = state.free_e.copy()
    simulator.diffuse(state, small_system.sim.dt)

    dt = small_system.sim.dt
    for moved, tag in ((state.free_e - start_e, Tag.E), (state.bound, Tag.EA)):
        variance = 2 * small_system.params.diffusion(tag) * dt
        n = moved.size
        assert moved.var(ddof=1) == pytest.approx(
            variance, abs=3 * variance * math.sqrt(2 / (n - 1)))


def test_reflect_into_box():
    half = 1.0
    positions = np.array([[1.25, 0.0, -1.5], [3.5, -0.5, 0.0]])
    reflected = simulator.reflect_into_box(positions, half)
    assert reflected == pytest.approx(np.array([[0.75, 0.0, -0.5], [-0.5, -0.5, 0.0]]))


def test_apply_boundaries(small_system):
    state = fresh_state(small_system)
    half = small_system.params.enz_box_side / 2
    step = 10e-9
    state.free_e[0] = (half + step, 0.0, 0.0)
    state.free_a[0] = (half + step, 0.0, 0.0)
    state.bound = np.array([[0.0, -half - step, 0.0], [0.0, 0.0, 0.0]])
    before = state.tallies()
    state.n_a_initial += 2
    state.n_e_initial += 2

    simulator.apply_boundaries(state)

    assert state.free_e[0] == pytest.approx(np.array([half - step, 0.0, 0.0]))
    # A passes the box and stays free.
    assert state.free_a[0] == pytest.approx(np.array([half + step, 0.0, 0.0]))
    # The escaped EA became a reflected E and a free A outside.
    assert state.tallies() == simulator.Tallies(
        before.n_a_free + 1, before.n_e_free + 1, 1, 0)
    assert state.free_e[-1] == pytest.approx(np.array([0.0, -half + step, 0.0]))
    assert state.free_a[-1] == pytest.approx(np.array([0.0, -half - step, 0.0]))
    assert np.all(np.abs(state.free_e) <= half)
    assert simulator.conserved(state)


def bound_state(run_config, n_bound):
    """A state holding only EA complexes at the box center."""
    state = fresh_state(run_config.replace(n_A_molecules=1, n_E_molecules=0))
    state.free_a = np.empty((0, 3))
    state.bound = np.zeros((n_bound, 3))
    state.n_a_initial = state.n_e_initial = n_bound
    return state


def test_no_release_rates_no_reactions(small_system):
    state = bound_state(small_system.replace(k_minus1_per_s=0, k2_per_s=0), 100)
    simulator.react_unimolecular(state, small_system.sim.dt)
    assert state.tallies() == simulator.Tallies(0, 0, 100, 0)


def test_degradation_decays_exponentially(small_system):
    run_config = small_system.replace(k_minus1_per_s=0)
    state = bound_state(run_config, 10000)
    dt = run_config.sim.dt
    for _ in range(2):
        simulator.react_unimolecular(state, dt)

    survival = math.exp(-2e6 * 2 * dt)
    expected = 10000 * survival
    std = math.sqrt(10000 * survival * (1 - survival))
    n_ea = len(state.bound)
    assert abs(n_ea - expected) < 3 * std
    assert state.tallies() == simulator.Tallies(0, 10000 - n_ea, n_ea, 10000 - n_ea)
    assert simulator.conserved(state)


def test_unbinding_branch_ratio(small_system):
    run_config = small_system.replace(k_minus1_per_s=1e6, k2_per_s=3e6)
    state = bound_state(run_config, 20000)
    simulator.react_unimolecular(state, run_config.sim.dt)

    released = len(state.free_a)
    events = released + state.n_ap
    ratio = 1e6 / 4e6
    assert abs(released / events - ratio) < 3 * math.sqrt(ratio * (1 - ratio) / events)
    assert simulator.conserved(state)

    # Released A molecules sit on the binding sphere around their E.
    distances = np.linalg.norm(state.free_a, axis=1)
    assert distances == pytest.approx(run_config.sim.binding_radius, rel=1e-9)


def test_colocated_release(small_system):
    run_config = small_system.replace(k2_per_s=0, release_placement='colocated')
    state = bound_state(run_config, 1000)
    simulator.react_unimolecular(state, run_config.sim.dt)
    assert len(state.free_a) > 0
    assert not state.free_a.any()


@pytest.mark.parametrize('placement', ['sphere', 'colocated'])
def test_released_a_is_not_recaptured_in_the_same_step(small_system, placement):
    run_config = small_system.replace(
        k_minus1_per_s=1e8, k2_per_s=0, release_placement=placement)
    state = bound_state(run_config, 2000)
    dt = run_config.sim.dt

    simulator.react_unimolecular(state, dt)
    # exp(-k_-1 dt) = exp(-50): every complex unbinds.
    assert state.tallies() == simulator.Tallies(2000, 2000, 0, 0)
    assert state.n_released == 2000

    simulator.react_bimolecular(state)
    assert state.tallies() == simulator.Tallies(2000, 2000, 0, 0)

    simulator.diffuse(state, dt)
    assert state.n_released == 0


def test_released_a_does_not_shield_older_a(small_system):
    run_config = small_system.replace(k_minus1_per_s=1e8, k2_per_s=0)
    state = bound_state(run_config, 1)
    old_a = np.array([0.1, 0.0, 0.0]) * run_config.sim.binding_radius
    state.free_a = old_a[np.newaxis, :].copy()
    state.n_a_initial = 2

    simulator.react_unimolecular(state, run_config.sim.dt)
    assert state.n_released == 1
    simulator.react_bimolecular(state)

    # The A that was already free binds the freed E; the released one stays free.
    assert state.tallies() == simulator.Tallies(1, 0, 1, 0)
    assert np.linalg.norm(state.free_a[0]) == pytest.approx(
        run_config.sim.binding_radius, rel=1e-9)
    assert simulator.conserved(state)


def test_binding_nearest_a(small_system):
    state = fresh_state(small_system)
    r_b = small_system.sim.binding_radius
    e_position = np.array([1e-7, 0.0, 0.0])
    state.free_e = e_position[np.newaxis, :].copy()
    state.free_a = np.array([
        e_position + (0.6 * r_b, 0.0, 0.0),
        e_position + (0.0, 0.3 * r_b, 0.0),
        e_position + (0.0, 0.0, 2.0 * r_b),
    ])
    state.n_a_initial, state.n_e_initial = 3, 1

    simulator.react_bimolecular(state)

    assert state.tallies() == simulator.Tallies(2, 0, 1, 0)
    assert state.bound[0] == pytest.approx(e_position)
    assert state.free_a[:, 1].max() == 0.0
    assert simulator.conserved(state)


def test_binding_out_of_range(small_system):
    state = fresh_state(small_system.replace(n_E_molecules=0))
    state.free_e = np.array([[2e-7, 0.0, 0.0]])
    state.n_e_initial = 1
    simulator.react_bimolecular(state)
    assert state.tallies() == simulator.Tallies(200, 1, 0, 0)


def test_binding_pairs_are_one_to_one():
    free_a = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [5.0, 5.0, 5.0]])
    free_e = np.array([[0.05, 0.0, 0.0], [0.12, 0.0, 0.0]])
    pairs = simulator.binding_pairs(free_a, free_e, 0.2)
    assert sorted(pairs) == [(0, 0), (1, 1)]
    assert simulator.binding_pairs(free_a, free_e[:0], 0.2) == []
    assert simulator.binding_pairs(free_a, free_e, 0.0) == []


def test_well_mixed_binding_rate(system1):
    """Irreversible binding in a well-mixed box decays free A at k1 C_E."""
    run_config = system1.replace(n_A_molecules=5000, k_minus1_per_s=0, k2_per_s=0)
    state = fresh_state(run_config)
    # Start the A molecules in the middle of the box so none leaves it.
    quarter = run_config.params.enz_box_side / 4
    state.free_a = state.rng.uniform(-quarter, quarter, size=state.free_a.shape)

    n_steps = 20
    for _ in range(n_steps):
        simulator.step(state)
        assert simulator.conserved(state)

    rate = -math.log(len(state.free_a) / 5000) / (n_steps * run_config.sim.dt)
    expected = run_config.params.rates.k1 * run_config.refs.c_etot
    assert rate == pytest.approx(expected, rel=0.1)


def test_observe():
    sphere = physchem.Receiver((0.0, 0.0, 0.0), radius=1e-8)
    state = SimpleNamespace(free_a=np.empty((0, 3)))
    assert simulator.observe(state, sphere) == 0

    state.free_a = np.array([[1e-8, 0.0, 0.0], [0.0, 5e-9, 0.0], [0.0, 0.0, 1.1e-8]])
    assert simulator.observe(state, sphere) == 2

    box = physchem.Receiver((0.0, 0.0, 0.0), sides=(2e-8, 2e-8, 4e-8))
    assert simulator.observe(state, box) == 3


def test_observe_at_release(small_system):
    state = fresh_state(small_system)
    assert simulator.observe(state, small_system.params.receiver) == 0
    before = state.free_a.copy()
    simulator.observe(state, small_system.params.receiver)
    assert np.array_equal(state.free_a, before)


def test_run_trial(small_system):
    row = simulator.run_trial(small_system.sim, trial_index=2)
    again = simulator.run_trial(small_system.sim, trial_index=2)
    assert row.trial_index == 2
    assert row.counts.shape == (4,)
    assert np.array_equal(row.counts, again.counts)
    assert row.tallies == again.tallies
    assert np.all(row.counts <= 200)

    n_a, n_e, n_ea, n_ap = row.tallies
    assert n_a + n_ea + n_ap == 200
    assert n_e + n_ea == 4000


def test_run_trial_without_samples(small_system):
    row = simulator.run_trial(small_system.replace(sample_count=0).sim)
    assert row.counts.shape == (0,)


def test_containment_and_conservation_every_step(small_system):
    state = fresh_state(small_system.replace(n_A_molecules=100, n_E_molecules=20000))
    half = small_system.params.enz_box_side / 2
    for _ in range(200):
        simulator.step(state)
        assert simulator.conserved(state)
        assert np.all(np.abs(state.free_e) <= half)
        assert np.all(np.abs(state.bound) <= half)


def test_make_series(small_system):
    sim = small_system.sim
    rows = [simulator.run_trial(sim, i) for i in range(3)]
    counts = np.vstack([row.counts for row in rows])
    series = simulator.make_series(sim, rows, counts.mean(axis=0), np.zeros(4))
    assert series.n_trials == 3
    assert series.mean_star == pytest.approx(counts.mean(axis=0) / 200)
    assert series.t_star_requested == pytest.approx(np.geomspace(0.05, 0.3, 4))
    assert series.t_star == pytest.approx(series.t_star_requested, rel=0.05)
