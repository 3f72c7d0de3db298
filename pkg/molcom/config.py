"""Run configuration: flat YAML files of unit-suffixed keys, e.g.

    # System 1
    temperature_K: 298.0
    radius_A_nm: 0.5
    k1_m3_per_molecule_s: 2.0e-19
    ...

parse_config() validates every key eagerly and builds the SystemParams,
ReferenceSet and SimConfig a run needs. Every ConfigError names the key and,
when the value came from a file, its 1-based line.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np
import ruamel.yaml as yaml

from molcom import physchem, simulator
from molcom.physchem import DomainError, ReferenceSet, SystemParams, Tag

LOGGER = logging.getLogger('molcom.config')

PRESET_DIR = os.path.join(os.path.dirname(__file__), 'presets')
PRESET_SUFFIX = '.yaml'

#: The --fast profile divides the molecule counts by 10 (keeping C_Etot).
FAST_SCALE = 0.1
FAST_TRIALS = 600

NM = 1e-9
UM = 1e-6
US = 1e-6


class ConfigError(ValueError):
    """An unknown, missing or invalid configuration value."""

    def __init__(self, key, reason, line=None):
        # type: (Optional[str], str, Optional[int]) -> None
        self.key = key
        self.reason = reason
        self.line = line
        where = ''
        if line is not None:
            where = 'line {}: '.format(line)
        if key:
            where += '{}: '.format(key)
        super(ConfigError, self).__init__(where + reason)


class _Required(object):
    def __repr__(self):
        return '<required>'


REQUIRED = _Required()
OPTIONAL = None


class Key(NamedTuple):
    name: str
    kind: str  # 'float', 'int' or one of the choice tuples below
    default: Any
    check: str = ''  # '', 'positive' or 'nonnegative'
    choices: Tuple[str, ...] = ()


SHAPES = ('sphere', 'box')

KEYS = (
    Key('temperature_K', 'float', REQUIRED, 'positive'),
    Key('viscosity_kg_per_m_s', 'float', REQUIRED, 'positive'),
    Key('radius_A_nm', 'float', REQUIRED, 'positive'),
    Key('radius_E_nm', 'float', REQUIRED, 'positive'),
    Key('radius_EA_nm', 'float', REQUIRED, 'positive'),
    Key('diffusion_A_m2_per_s', 'float', OPTIONAL, 'positive'),
    Key('diffusion_E_m2_per_s', 'float', OPTIONAL, 'positive'),
    Key('diffusion_EA_m2_per_s', 'float', OPTIONAL, 'positive'),
    Key('k1_m3_per_molecule_s', 'float', REQUIRED, 'nonnegative'),
    Key('k_minus1_per_s', 'float', REQUIRED, 'nonnegative'),
    Key('k2_per_s', 'float', REQUIRED, 'nonnegative'),
    Key('n_A_molecules', 'int', REQUIRED, 'positive'),
    Key('n_E_molecules', 'int', REQUIRED, 'nonnegative'),
    Key('enz_box_side_um', 'float', REQUIRED, 'positive'),
    Key('receiver_x_nm', 'float', REQUIRED),
    Key('receiver_y_nm', 'float', REQUIRED),
    Key('receiver_z_nm', 'float', REQUIRED),
    Key('receiver_shape', 'choice', 'sphere', choices=SHAPES),
    Key('receiver_radius_star', 'float', OPTIONAL, 'positive'),
    Key('receiver_side_x_star', 'float', OPTIONAL, 'positive'),
    Key('receiver_side_y_star', 'float', OPTIONAL, 'positive'),
    Key('receiver_side_z_star', 'float', OPTIONAL, 'positive'),
    Key('reference_length_nm', 'float', OPTIONAL, 'positive'),
    Key('reference_conc_per_m3', 'float', OPTIONAL, 'positive'),
    Key('time_step_us', 'float', REQUIRED, 'positive'),
    Key('sample_t_star_min', 'float', 0.01, 'positive'),
    Key('sample_t_star_max', 'float', 10.0, 'positive'),
    Key('sample_count', 'int', 40, 'nonnegative'),
    Key('seed', 'int', 0, 'nonnegative'),
    Key('n_trials', 'int', 6000, 'positive'),
    Key('release_placement', 'choice', simulator.RELEASE_SPHERE,
        choices=simulator.RELEASE_PLACEMENTS),
)
KEYS_BY_NAME = {key.name: key for key in KEYS}

SPHERE_KEYS = ('receiver_radius_star',)
BOX_KEYS = ('receiver_side_x_star', 'receiver_side_y_star', 'receiver_side_z_star')


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration.

    `values` holds every key that is set, defaults included, as plain
    Python values; it is the source of the config hash.
    """
    label: str
    values: Mapping[str, Any]
    params: SystemParams
    refs: ReferenceSet
    sim: simulator.SimConfig
    n_trials: int

    @property
    def seed(self) -> int:
        return self.sim.seed

    def replace(self, **overrides):
        # type: (**Any) -> RunConfig
        """Return a re-validated copy with some keys changed; a None value
        removes an optional key.
        """
        values = dict(self.values)
        for name, value in overrides.items():
            if value is None:
                values.pop(name, None)
            else:
                values[name] = value
        return build_config(values, self.label)


def _convert(key, raw, line):
    # type: (Key, Any, Optional[int]) -> Any
    if isinstance(raw, (dict, list)):
        raise ConfigError(key.name, 'expected a single value, not a {}'.format(
            type(raw).__name__), line)
    if key.kind == 'choice':
        value = str(raw)
        if value not in key.choices:
            raise ConfigError(key.name, 'must be one of {}, got {!r}'.format(
                ', '.join(key.choices), value), line)
        return value
    if isinstance(raw, bool):
        raise ConfigError(key.name, 'expected a number, got {!r}'.format(raw), line)

    try:
        number = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(key.name, 'expected a number, got {!r}'.format(raw), line)
    if not math.isfinite(number):
        raise ConfigError(key.name, 'must be finite, got {!r}'.format(raw), line)

    if key.kind == 'int':
        if number != round(number):
            raise ConfigError(key.name, 'expected a whole number, got {!r}'.format(raw), line)
        value = int(round(number))  # type: Any
    else:
        value = number

    if key.check == 'positive' and not value > 0:
        raise ConfigError(key.name, 'must be > 0, got {!r}'.format(raw), line)
    if key.check == 'nonnegative' and not value >= 0:
        raise ConfigError(key.name, 'must be >= 0, got {!r}'.format(raw), line)
    return value


def _validated_values(raw, lines):
    # type: (Mapping[str, Any], Mapping[str, int]) -> Dict[str, Any]
    unknown = sorted(name for name in raw if name not in KEYS_BY_NAME)
    if unknown:
        raise ConfigError(unknown[0], 'unknown key (unknown: {})'.format(
            ', '.join(unknown)), lines.get(unknown[0]))

    missing = [key.name for key in KEYS if key.default is REQUIRED and key.name not in raw]
    if missing:
        raise ConfigError(missing[0], 'missing required keys: {}'.format(', '.join(missing)))

    values = {}
    for key in KEYS:
        if key.name in raw:
            values[key.name] = _convert(key, raw[key.name], lines.get(key.name))
        elif key.default is not OPTIONAL:
            values[key.name] = key.default

    shape_keys, other_keys = ((SPHERE_KEYS, BOX_KEYS) if values['receiver_shape'] == 'sphere'
                              else (BOX_KEYS, SPHERE_KEYS))
    for name in shape_keys:
        if name not in values:
            raise ConfigError(name, 'required for a {} receiver'.format(
                values['receiver_shape']))
    for name in other_keys:
        if name in values:
            raise ConfigError(name, 'not used by a {} receiver'.format(
                values['receiver_shape']), lines.get(name))

    if values['sample_t_star_max'] < values['sample_t_star_min']:
        raise ConfigError('sample_t_star_max', 'must be >= sample_t_star_min',
                          lines.get('sample_t_star_max'))
    if values['seed'] >= 2 ** 64:
        raise ConfigError('seed', 'must fit in 64 unsigned bits', lines.get('seed'))
    return values


def _system_params(values):
    # type: (Mapping[str, Any]) -> Tuple[SystemParams, ReferenceSet]
    medium = physchem.Medium(values['temperature_K'], values['viscosity_kg_per_m_s'])
    species = {
        tag: physchem.Species.in_medium(
            tag,
            values['radius_{}_nm'.format(tag.value)] * NM,
            medium,
            values.get('diffusion_{}_m2_per_s'.format(tag.value)))
        for tag in Tag}
    rates = physchem.ReactionRates(
        values['k1_m3_per_molecule_s'], values['k_minus1_per_s'], values['k2_per_s'])

    center = tuple(values['receiver_{}_nm'.format(axis)] * NM for axis in 'xyz')
    distance = math.sqrt(sum(c * c for c in center))
    length = values.get('reference_length_nm', distance / NM) * NM
    if values['receiver_shape'] == 'sphere':
        receiver = physchem.Receiver(center, radius=values['receiver_radius_star'] * length)
    else:
        receiver = physchem.Receiver(center, sides=tuple(
            values[name] * length for name in BOX_KEYS))

    params = SystemParams(
        medium=medium,
        species=species,
        rates=rates,
        n_a=values['n_A_molecules'],
        n_e=values['n_E_molecules'],
        enz_box_side=values['enz_box_side_um'] * UM,
        receiver=receiver)
    refs = physchem.reference_set(params, length=length, c0=values.get('reference_conc_per_m3'))
    return params, refs


def sample_t_star(values):
    # type: (Mapping[str, Any]) -> np.ndarray
    """The log-spaced dimensionless sample grid of a config."""
    return np.geomspace(
        values['sample_t_star_min'], values['sample_t_star_max'], values['sample_count'])


def build_config(raw, label='config', lines=None):
    # type: (Mapping[str, Any], str, Optional[Mapping[str, int]]) -> RunConfig
    """Validate a flat key/value mapping and build the RunConfig."""
    lines = lines or {}
    values = _validated_values(raw, lines)
    try:
        params, refs = _system_params(values)
        sim = simulator.SimConfig(
            params=params,
            refs=refs,
            dt=values['time_step_us'] * US,
            sample_times=simulator.sample_times_for(params, refs, sample_t_star(values)),
            seed=values['seed'],
            release_placement=values['release_placement'])
    except DomainError as e:
        raise ConfigError(None, str(e))

    return RunConfig(label, values, params, refs, sim, values['n_trials'])


def _key_lines(data):
    # type: (Any) -> Dict[str, int]
    lines = {}
    for name in data:
        try:
            lines[str(name)] = data.lc.key(name)[0] + 1
        except (AttributeError, KeyError, TypeError):
            pass
    return lines


def parse_config(text, label='config'):
    # type: (str, str) -> RunConfig
    """Parse and validate the text of a config file."""
    yml = yaml.YAML()  # round-trip mode keeps the line of every key
    try:
        data = yml.load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(None, 'malformed config: {}'.format(
            getattr(e, 'problem', None) or e), line)

    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(None, 'a config must be a flat mapping of key: value lines')
    return build_config({str(k): v for k, v in data.items()}, label, _key_lines(data))


def load_config(path):
    # type: (str) -> RunConfig
    with open(path) as f:
        text = f.read()
    label = os.path.splitext(os.path.basename(path))[0]
    LOGGER.debug('Reading config "%s"', path)
    return parse_config(text, label)


def preset_names():
    # type: () -> List[str]
    return sorted(
        os.path.splitext(name)[0] for name in os.listdir(PRESET_DIR)
        if name.endswith(PRESET_SUFFIX))


def load_preset(name):
    # type: (str) -> RunConfig
    path = os.path.join(PRESET_DIR, name + PRESET_SUFFIX)
    if not os.path.isfile(path):
        raise ConfigError(None, 'no preset named {!r} (presets: {})'.format(
            name, ', '.join(preset_names())))
    return load_config(path)


def resolve_config(name_or_path):
    # type: (str) -> RunConfig
    """Load a config file, or a shipped preset when no such file exists."""
    if os.path.isfile(name_or_path):
        return load_config(name_or_path)
    return load_preset(name_or_path)


def fast_profile(run_config, factor=FAST_SCALE, n_trials=FAST_TRIALS):
    # type: (RunConfig, float, int) -> RunConfig
    """Scale a config down for quick runs: N_A and N_E times `factor`, the
    enzyme box edge times factor^(1/3) so C_Etot is unchanged, and
    `n_trials` trials.
    """
    values = run_config.values
    fast = run_config.replace(
        n_A_molecules=max(1, int(round(values['n_A_molecules'] * factor))),
        n_E_molecules=int(round(values['n_E_molecules'] * factor)),
        enz_box_side_um=values['enz_box_side_um'] * factor ** (1.0 / 3.0),
        n_trials=n_trials)
    LOGGER.info('Fast profile for %s: N_A=%s N_E=%s box side %.4g um, %s trials',
                run_config.label, fast.params.n_a, fast.params.n_e,
                fast.values['enz_box_side_um'], fast.n_trials)
    return fast
