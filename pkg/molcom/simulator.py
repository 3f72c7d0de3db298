"""Particle-based stochastic reaction-diffusion engine for one emission.

A, E and EA molecules diffuse independently with Gaussian steps of variance
2 D dt per axis. The enzyme box (a cube centered on the transmitter) reflects
E molecules, lets A molecules pass, and splits any EA that leaves it into an
E (reflected back inside) and a free A. Each step then applies the
unimolecular EA reactions and the E + A binding rule, and the passive
receiver counts free A molecules at the sample steps.

The binding rule is a per-step binding volume: with
r_B = (3 k1 dt / (4 pi))^(1/3), a free A that ends a step within r_B of a
free E binds to it, so the per-step binding probability of an A in a
well-mixed enzyme concentration C_E is C_E (4/3) pi r_B^3 = k1 C_E dt.

Positions are in meters with the transmitter at the origin. A trial owns its
SimState and random stream; nothing here is shared between trials.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from molcom import physchem
from molcom.physchem import DomainError, ReferenceSet, SystemParams, Tag

LOGGER = logging.getLogger('molcom.simulator')

#: Where an unbinding EA releases its A: on a sphere of radius r_B around the
#: E, or at the E's position.
RELEASE_SPHERE = 'sphere'
RELEASE_COLOCATED = 'colocated'
RELEASE_PLACEMENTS = (RELEASE_SPHERE, RELEASE_COLOCATED)

#: Reflection passes before giving up on a (physically absurd) giant step.
MAX_REFLECTIONS = 64


class SimConfigError(DomainError):
    """A simulation configuration that violates its invariants."""
    pass


class Particle(NamedTuple):
    species: Tag
    position: Tuple[float, float, float]


class Tallies(NamedTuple):
    n_a_free: int
    n_e_free: int
    n_ea: int
    n_ap: int


@dataclass(frozen=True)
class SimConfig:
    """One simulated system: its parameters, reference set, time step dt (s),
    receiver sample times (s), base seed and unbinding placement rule.
    """
    params: SystemParams
    refs: ReferenceSet
    dt: float
    sample_times: Tuple[float, ...]
    seed: int = 0
    release_placement: str = RELEASE_SPHERE
    #: Each sample time aligned to the nearest step boundary (at least 1).
    sample_steps: Tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'sample_times', tuple(float(t) for t in self.sample_times))
        if not self.dt > 0:
            raise SimConfigError('the time step must be > 0, got {!r}'.format(self.dt))
        times = self.sample_times
        if any(t <= 0 for t in times):
            raise SimConfigError('sample times must be > 0')
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise SimConfigError('sample times must be strictly increasing')
        if not 0 <= self.seed < 2 ** 64:
            raise SimConfigError('the seed must fit in 64 unsigned bits')
        if self.release_placement not in RELEASE_PLACEMENTS:
            raise SimConfigError('unknown release placement {!r}'.format(self.release_placement))
        if self.binding_radius >= self.rms_step(Tag.A):
            raise SimConfigError(
                'the binding radius {:.3g} m is not below the A rms step {:.3g} m;'
                ' shorten the time step'.format(self.binding_radius, self.rms_step(Tag.A)))
        object.__setattr__(self, 'sample_steps', self._align_sample_times())

    @property
    def binding_radius(self) -> float:
        """r_B = (3 k1 dt / (4 pi))^(1/3)."""
        return (3 * self.params.rates.k1 * self.dt / (4 * math.pi)) ** (1.0 / 3.0)

    def rms_step(self, tag):
        # type: (Tag) -> float
        """The per-axis root-mean-square displacement in one step."""
        return math.sqrt(2 * self.params.diffusion(tag) * self.dt)

    def _align_sample_times(self):
        # type: () -> Tuple[int, ...]
        steps = []
        for t in self.sample_times:
            step = int(round(t / self.dt))
            if step < 1:
                LOGGER.warning(
                    'Sample time %.3g s is under half a step; sampling after step 1', t)
                step = 1
            steps.append(step)
        return tuple(steps)

    @property
    def realized_times(self) -> Tuple[float, ...]:
        return tuple(step * self.dt for step in self.sample_steps)


@dataclass
class SimState:
    """The mutable state of one trial. Positions are (n, 3) arrays per
    species: free A, free E, and EA complexes; degraded A molecules are only
    counted.

    The last `n_released` rows of free_a were released by an unbinding since
    the last diffusion; they may not bind again before they have moved.
    """
    config: SimConfig
    rng: np.random.Generator
    free_a: np.ndarray
    free_e: np.ndarray
    bound: np.ndarray
    n_ap: int = 0
    step_index: int = 0
    n_released: int = 0
    n_a_initial: int = field(init=False)
    n_e_initial: int = field(init=False)

    def __post_init__(self):
        self.n_a_initial = len(self.free_a) + len(self.bound) + self.n_ap
        self.n_e_initial = len(self.free_e) + len(self.bound)

    def tallies(self) -> Tallies:
        return Tallies(len(self.free_a), len(self.free_e), len(self.bound), self.n_ap)

    def particles(self) -> Iterator[Particle]:
        for tag, positions in ((Tag.A, self.free_a), (Tag.E, self.free_e),
                               (Tag.EA, self.bound)):
            for position in positions:
                yield Particle(tag, tuple(float(x) for x in position))


def conserved(state):
    # type: (SimState) -> bool
    """True if N_A_free + N_EA + N_AP and N_E_free + N_EA are unchanged."""
    n_a, n_e, n_ea, n_ap = state.tallies()
    return (n_a + n_ea + n_ap == state.n_a_initial
            and n_e + n_ea == state.n_e_initial)


def trial_rng(seed, trial_index):
    # type: (int, int) -> np.random.Generator
    """The independent random stream of one trial, a function of
    (seed, trial_index) only.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, trial_index])))


def _empty_positions():
    # type: () -> np.ndarray
    return np.empty((0, 3))


def init_sim(config, trial_index=0):
    # type: (SimConfig, int) -> SimState
    """Start a trial: N_A free A molecules at the transmitter (the box
    center), N_E free E molecules uniform in the enzyme box, no EA.
    """
    params = config.params
    if not params.receiver.fits_inside_cube(params.enz_box_side):
        raise SimConfigError('the receiver is not strictly inside the enzyme box')

    rng = trial_rng(config.seed, trial_index)
    half = params.enz_box_side / 2
    free_e = rng.uniform(-half, half, size=(params.n_e, 3))
    return SimState(
        config=config,
        rng=rng,
        free_a=np.zeros((params.n_a, 3)),
        free_e=free_e,
        bound=_empty_positions())


def diffuse(state, dt):
    # type: (SimState, float) -> SimState
    """Add an independent N(0, 2 D dt) displacement to every coordinate of
    every molecule, species by species in the order A, E, EA. Mutates and
    returns `state`; boundary rules are applied separately.
    """
    params = state.config.params
    rng = state.rng
    for tag, name in ((Tag.A, 'free_a'), (Tag.E, 'free_e'), (Tag.EA, 'bound')):
        positions = getattr(state, name)
        if len(positions):
            sigma = math.sqrt(2 * params.diffusion(tag) * dt)
            setattr(state, name, positions + rng.normal(0.0, sigma, size=positions.shape))
    state.n_released = 0
    return state


def reflect_into_box(positions, half):
    # type: (np.ndarray, float) -> np.ndarray
    """Mirror every coordinate beyond +-half back inside, repeating for
    overshoots longer than the box.
    """
    result = positions.copy()
    for _ in range(MAX_REFLECTIONS):
        above = result > half
        below = result < -half
        if not (above.any() or below.any()):
            return result
        result = np.where(above, 2 * half - result, result)
        result = np.where(below, -2 * half - result, result)
    raise SimConfigError('a step overshot the enzyme box {} times'.format(MAX_REFLECTIONS))


def apply_boundaries(state):
    # type: (SimState) -> SimState
    """Apply the enzyme-box rules: reflect E, leave A alone, and decompose
    every EA outside the box into an E reflected back inside plus a free A
    left at the EA's outside position.
    """
    half = state.config.params.enz_box_side / 2

    if len(state.free_e):
        state.free_e = reflect_into_box(state.free_e, half)

    if len(state.bound):
        outside = np.any(np.abs(state.bound) > half, axis=1)
        if outside.any():
            escaped = state.bound[outside]
            state.bound = state.bound[~outside]
            state.free_e = np.concatenate([state.free_e, reflect_into_box(escaped, half)])
            state.free_a = np.concatenate([state.free_a, escaped])
    return state


def _random_offsets(rng, count, radius):
    # type: (np.random.Generator, int, float) -> np.ndarray
    """`count` points uniform on the sphere of `radius` about the origin."""
    directions = rng.normal(size=(count, 3))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    return radius * directions / norms


def react_unimolecular(state, dt):
    # type: (SimState, float) -> SimState
    """Each EA reacts with probability 1 - exp(-(k_-1 + k_2) dt). A reacting
    EA unbinds (E + A) with probability k_-1 / (k_-1 + k_2), else degrades its
    A (E + A_P). The E stays at the EA position in both channels. Released A
    molecules are appended to free_a and excluded from binding until the
    next diffusion.
    """
    n_bound = len(state.bound)
    rates = state.config.params.rates
    k_release = rates.k_release
    if not n_bound or k_release <= 0:
        return state

    rng = state.rng
    reacts = rng.random(n_bound) < -math.expm1(-k_release * dt)
    unbinds = rng.random(n_bound) < rates.k_minus1 / k_release
    if not reacts.any():
        return state

    released = state.bound[reacts & unbinds]
    degraded = state.bound[reacts & ~unbinds]
    state.free_e = np.concatenate([state.free_e, released, degraded])
    state.n_ap += len(degraded)

    if len(released):
        config = state.config
        if config.release_placement == RELEASE_SPHERE and config.binding_radius > 0:
            released = released + _random_offsets(rng, len(released), config.binding_radius)
        state.free_a = np.concatenate([state.free_a, released])
        state.n_released += len(released)

    state.bound = state.bound[~reacts]
    return state


def binding_pairs(free_a, free_e, radius):
    # type: (np.ndarray, np.ndarray, float) -> List[Tuple[int, int]]
    """Pair free A and free E molecules closer than `radius`, nearest pairs
    first, each molecule used at most once. Returns (A index, E index) pairs.
    """
    if not (len(free_a) and len(free_e)) or radius <= 0:
        return []

    # Only E molecules near the cloud of A molecules can bind.
    lo = free_a.min(axis=0) - radius
    hi = free_a.max(axis=0) + radius
    near = np.nonzero(np.all((free_e >= lo) & (free_e <= hi), axis=1))[0]
    if not len(near):
        return []

    tree_a = cKDTree(free_a)
    tree_e = cKDTree(free_e[near])
    candidates = tree_a.sparse_distance_matrix(tree_e, radius, output_type='ndarray')
    if not len(candidates):
        return []

    order = np.lexsort((candidates['j'], candidates['i'], candidates['v']))
    used_a = set()
    used_e = set()
    pairs = []
    for i, j in zip(candidates['i'][order], candidates['j'][order]):
        if i in used_a or j in used_e:
            continue
        used_a.add(i)
        used_e.add(j)
        pairs.append((int(i), int(near[j])))
    return pairs


def react_bimolecular(state):
    # type: (SimState) -> SimState
    """Bind every free A within r_B of a free E (nearest eligible E; one A per
    E per step); each bound pair becomes an EA at the E's position. A
    molecules released since the last diffusion don't take part.
    """
    n_eligible = len(state.free_a) - state.n_released
    pairs = binding_pairs(
        state.free_a[:n_eligible], state.free_e, state.config.binding_radius)
    if not pairs:
        return state

    a_index = np.array([a for a, _ in pairs])
    e_index = np.array([e for _, e in pairs])
    state.bound = np.concatenate([state.bound, state.free_e[e_index]])
    state.free_a = np.delete(state.free_a, a_index, axis=0)
    state.free_e = np.delete(state.free_e, e_index, axis=0)
    return state


def observe(state, receiver):
    # type: (SimState, physchem.Receiver) -> int
    """Count the free A molecules inside (or on the surface of) the receiver.
    Does not change the state.
    """
    if not len(state.free_a):
        return 0
    offsets = state.free_a - np.asarray(receiver.center)
    if receiver.is_sphere:
        inside = np.einsum('ij,ij->i', offsets, offsets) <= receiver.radius ** 2
    else:
        inside = np.all(np.abs(offsets) <= np.asarray(receiver.half_extents), axis=1)
    return int(np.count_nonzero(inside))


def step(state):
    # type: (SimState) -> SimState
    """Advance one time step: diffuse, boundaries, unimolecular reactions,
    then binding.
    """
    dt = state.config.dt
    diffuse(state, dt)
    apply_boundaries(state)
    react_unimolecular(state, dt)
    react_bimolecular(state)
    state.step_index += 1
    return state


class TrialRow(NamedTuple):
    trial_index: int
    counts: np.ndarray  # receiver counts at each sample time
    tallies: Tallies  # at the end of the trial


def run_trial(config, trial_index=0):
    # type: (SimConfig, int) -> TrialRow
    """Run one emission and return the receiver counts at every sample step.
    Deterministic for (config, trial_index).
    """
    sample_steps = config.sample_steps
    counts = np.zeros(len(sample_steps), dtype=np.int64)
    state = init_sim(config, trial_index)

    k = 0
    while k < len(sample_steps):
        if state.step_index == sample_steps[k]:
            counts[k] = observe(state, config.params.receiver)
            k += 1
        else:
            step(state)

    LOGGER.debug('Trial %s done after %s steps: %s', trial_index, state.step_index,
                 state.tallies())
    return TrialRow(trial_index, counts, state.tallies())


@dataclass(frozen=True)
class ObservationSeries:
    """The receiver counts of n_trials emissions at the sample times.

    t_star and t_seconds are the realized (step-aligned) times;
    t_star_requested holds the times asked for. `mean` and `std_err` are in
    molecules; the *_star properties divide them by N_ref.
    """
    t_star: np.ndarray
    t_seconds: np.ndarray
    t_star_requested: np.ndarray
    counts: np.ndarray  # (n_trials, n_times) integers
    mean: np.ndarray
    std_err: np.ndarray
    n_ref: float

    @property
    def n_trials(self) -> int:
        return int(self.counts.shape[0])

    @property
    def mean_star(self) -> np.ndarray:
        return self.mean / self.n_ref

    @property
    def std_err_star(self) -> np.ndarray:
        return self.std_err / self.n_ref


def sample_times_for(params, refs, t_star):
    # type: (SystemParams, ReferenceSet, Sequence[float]) -> Tuple[float, ...]
    """Dimensional sample times (s) for dimensionless A times t_star."""
    return tuple(
        physchem.redim(physchem.Quantity.TIME, Tag.A, float(t), refs, params)
        for t in t_star)


def realized_t_star(config):
    # type: (SimConfig) -> np.ndarray
    return np.array([
        physchem.nondim(physchem.Quantity.TIME, Tag.A, t, config.refs, config.params)
        for t in config.realized_times])


def requested_t_star(config):
    # type: (SimConfig) -> np.ndarray
    return np.array([
        physchem.nondim(physchem.Quantity.TIME, Tag.A, t, config.refs, config.params)
        for t in config.sample_times])


def make_series(config, rows, mean, std_err):
    # type: (SimConfig, Sequence[TrialRow], np.ndarray, np.ndarray) -> ObservationSeries
    counts = (np.vstack([row.counts for row in rows]) if rows
              else np.zeros((0, len(config.sample_times)), dtype=np.int64))
    return ObservationSeries(
        t_star=realized_t_star(config),
        t_seconds=np.array(config.realized_times),
        t_star_requested=requested_t_star(config),
        counts=counts,
        mean=np.asarray(mean, dtype=float),
        std_err=np.asarray(std_err, dtype=float),
        n_ref=config.refs.n_ref)
