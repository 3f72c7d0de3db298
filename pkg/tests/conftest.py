"""Shared fixtures and the --runslow option."""

import pytest

from molcom import config


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the slow statistical simulation tests')


def pytest_collection_modifyitems(session, config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def system1():
    return config.load_preset('system1')


@pytest.fixture(scope='session')
def system2():
    return config.load_preset('system2')


@pytest.fixture(scope='session')
def small_system(system1):
    """System 1 with few molecules and a short sample window: a trial takes
    well under a second.
    """
    return system1.replace(
        n_A_molecules=200,
        n_E_molecules=4000,
        sample_t_star_min=0.05,
        sample_t_star_max=0.3,
        sample_count=4,
        n_trials=3)


def config_text(values):
    """YAML text for a flat mapping of config values."""
    return ''.join('{}: {!r}\n'.format(key, value) for key, value in values.items())


@pytest.fixture
def write_config(tmp_path):
    """Return a function that writes config values to a YAML file in
    tmp_path and returns its path.
    """
    def write(values, name='custom'):
        path = tmp_path / (name + '.yaml')
        path.write_text(config_text(values))
        return str(path)
    return write
