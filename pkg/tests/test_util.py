import logging
import os

import pytest

from molcom.util import data, filepath
from molcom.util.log_filter import LogPrefixFilter


def record(name, level):
    return logging.LogRecord(name, level, __file__, 1, 'message', (), None)


def test_log_prefix_filter():
    log_filter = LogPrefixFilter(
        {'molcom': logging.INFO, 'molcom.simulator': logging.DEBUG}, logging.WARNING)
    assert log_filter.level_for('molcom.simulator.step') == logging.DEBUG
    assert log_filter.level_for('molcom.harness') == logging.INFO
    assert log_filter.level_for('molcomx') == logging.WARNING
    assert log_filter.level_for('matplotlib.font_manager') == logging.WARNING

    assert log_filter.filter(record('molcom.simulator', logging.DEBUG))
    assert not log_filter.filter(record('molcom.cli', logging.DEBUG))
    assert not log_filter.filter(record('numpy', logging.INFO))
    assert log_filter.filter(record('numpy', logging.ERROR))


def test_config_hash():
    a = {'seed': 0, 'k2_per_s': 2e6, 'receiver_shape': 'sphere'}
    b = {'receiver_shape': 'sphere', 'k2_per_s': 2e6, 'seed': 0}
    assert data.config_hash(a) == data.config_hash(b)
    assert len(data.config_hash(a)) == 16
    assert data.config_hash(a) != data.config_hash(dict(a, seed=1))
    assert data.config_hash(a) != data.config_hash(dict(a, k2_per_s=2.0000000000000004e6))


def test_format_duration():
    assert data.format_duration(0.4) == '0:00:00'
    assert data.format_duration(3725.6) == '1:02:06'
    assert data.format_duration(90000) == '1 day, 1:00:00'


def test_suffixed():
    assert filepath.suffixed('out/acc.csv', 'system1') == 'out/acc_system1.csv'
    assert filepath.suffixed('out/acc.csv', '', '.svg') == 'out/acc.svg'
    assert filepath.suffixed('acc', 'b', '.svg') == 'acc_b.svg'


def test_makedirs(tmp_path):
    path = filepath.makedirs(str(tmp_path), 'a', 'b')
    assert os.path.isdir(path)
    assert filepath.makedirs(str(tmp_path), 'a', 'b') == path

    (tmp_path / 'file').write_text('')
    with pytest.raises(OSError):
        filepath.makedirs(str(tmp_path), 'file', 'sub')


def test_prepare_output(tmp_path):
    filename = str(tmp_path / 'x' / 'y.csv')
    assert filepath.prepare_output(filename) == filename
    assert os.path.isdir(str(tmp_path / 'x'))
    assert filepath.prepare_output('bare.csv') == 'bare.csv'
