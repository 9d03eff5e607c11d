"""
Unit tests for the config module.
"""

import os
from unittest.mock import patch

import pytest

from src.config import Config, get_config
from src.errors import ConfigError


def _without_cvmdi_vars():
    return {k: v for k, v in os.environ.items() if not k.startswith('CVMDI_')}


class TestConfig:
    """Test cases for the Config class."""

    def test_init_with_defaults(self):
        """Test Config initialization with the bundled config file."""
        config = Config()
        assert str(config.config_file).endswith(os.path.join('config', 'config.ini'))
        assert isinstance(config.config, dict)

    def test_bundled_defaults(self):
        """The shipped config.ini carries the experimental protocol defaults."""
        with patch.dict(os.environ, _without_cvmdi_vars(), clear=True):
            config = Config()
            assert config.get_float('protocol', 'phi') == 65.0
            assert config.get_float('protocol', 'xi') == 0.97
            assert config.get_int('simulate', 'n_rounds') == 1_000_000

    def test_load_from_file(self, tmpdir):
        """Test loading sections from a config file."""
        config_file = tmpdir.join('config.ini')
        config_file.write("""
[protocol]
phi = 40
loss_rate = 0.25

[simulate]
seed = 7
""")
        with patch.dict(os.environ, _without_cvmdi_vars(), clear=True):
            config = Config(config_file=config_file.strpath)

            assert config.config['protocol']['phi'] == '40'
            assert config.get_float('protocol', 'loss_rate') == 0.25
            assert config.get_int('simulate', 'seed') == 7

    def test_load_from_file_not_found(self, tmpdir):
        """A missing file only logs a warning."""
        config = Config(config_file=tmpdir.join('nonexistent.ini').strpath)
        assert isinstance(config.config, dict)

    def test_unparseable_file(self, tmpdir):
        config_file = tmpdir.join('broken.ini')
        config_file.write("phi = 40\n")
        with pytest.raises(ConfigError):
            Config(config_file=config_file.strpath)

    def test_process_env_vars(self):
        """CVMDI_* variables land in their sections, multi-word sections included."""
        with patch.dict(os.environ, {
            'CVMDI_PROTOCOL_XI': '0.9',
            'CVMDI_SIMULATE_N_ROUNDS': '5000',
            'CVMDI_ATTACK_REGION_GRID_N': '51',
            'CVMDI_CUSTOM_KEY': 'value',
            'OTHER_VAR': 'should_be_ignored'
        }):
            config = Config(config_file='/nonexistent/config.ini')

            assert config.config['protocol']['xi'] == '0.9'
            assert config.config['simulate']['n_rounds'] == '5000'
            assert config.config['attack_region']['grid_n'] == '51'
            assert config.config['custom']['key'] == 'value'
            assert 'other' not in config.config

    def test_config_precedence(self, tmpdir):
        """Environment variables override config file values."""
        config_file = tmpdir.join('config.ini')
        config_file.write("""
[protocol]
phi = 40
xi = 0.95
""")
        env = _without_cvmdi_vars()
        env['CVMDI_PROTOCOL_PHI'] = '80'
        with patch.dict(os.environ, env, clear=True):
            config = Config(config_file=config_file.strpath)

            assert config.get_float('protocol', 'phi') == 80.0
            assert config.get_float('protocol', 'xi') == 0.95

    def test_get_method(self):
        with patch.dict(os.environ, {'CVMDI_RATE_TAU_B': '0.1'}):
            config = Config(config_file='/nonexistent/config.ini')

            assert config.get('rate', 'tau_b') == '0.1'
            assert config.get('rate', 'nonexistent', 'default_value') == 'default_value'
            assert config.get('nonexistent', 'key', 'default') == 'default'

    def test_typed_getters(self):
        with patch.dict(os.environ, {'CVMDI_SIMULATE_OPTIMIZE_R': 'yes', 'CVMDI_SIMULATE_SEED': '3',
                                     'CVMDI_SIMULATE_EPSILON': ''}):
            config = Config(config_file='/nonexistent/config.ini')

            assert config.get_bool('simulate', 'optimize_r') is True
            assert config.get_int('simulate', 'seed') == 3
            assert config.get_float('simulate', 'epsilon', 0.5) == 0.5
            assert config.get_str('simulate', 'epsilon', 'none') == 'none'
            assert config.get_bool('simulate', 'missing', True) is True

    @pytest.mark.parametrize('getter,value', [
        ('get_float', 'abc'),
        ('get_int', 'ten'),
        ('get_bool', 'maybe'),
    ])
    def test_typed_getters_reject(self, getter, value):
        with patch.dict(os.environ, {'CVMDI_PROTOCOL_VALUE': value}):
            config = Config(config_file='/nonexistent/config.ini')
            with pytest.raises(ConfigError):
                getattr(config, getter)('protocol', 'value')

    def test_get_section(self):
        with patch.dict(os.environ, {'CVMDI_SCAN_TAU_A': '0.8', 'CVMDI_SCAN_TAU_B': '0.7'}):
            config = Config(config_file='/nonexistent/config.ini')

            assert config.get_section('scan')['tau_a'] == '0.8'
            assert config.get_section('nonexistent') == {}

    def test_set_and_resolved(self):
        with patch.dict(os.environ, _without_cvmdi_vars(), clear=True):
            config = Config(config_file='/nonexistent/config.ini')
            config.set('rate', 'tau_b', 0.25)
            config.set('rate', 'epsilon', 0)
            config.set('protocol', 'xi', 1.0)

            assert config.get_float('rate', 'tau_b') == 0.25
            resolved = config.resolved('rate', 'protocol')
            assert list(resolved) == ['protocol', 'rate']
            assert list(resolved['rate']) == ['epsilon', 'tau_b']
            assert config.resolved('missing') == {'missing': {}}

    def test_error_handling_in_load_config(self):
        with patch('src.config.Config._load_from_file', side_effect=Exception("File error")):
            with pytest.raises(Exception):
                Config(config_file='/some/file')


class TestGetConfig:
    """Test cases for the get_config function."""

    def test_get_config_with_defaults(self):
        assert isinstance(get_config(), Config)

    def test_get_config_with_custom_paths(self):
        with patch('src.config.Config') as mock_config:
            get_config(config_file='/custom/config.ini')
            mock_config.assert_called_once_with('/custom/config.ini')

    def test_get_config_returns_default_instance(self):
        assert get_config() is get_config()
