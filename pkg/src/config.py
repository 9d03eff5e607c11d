"""
Layered settings of the toolkit.

Settings come from an INI file (default config/config.ini) and are overridden by
environment variables of the form CVMDI_SECTION_KEY. Command-line flags override both;
that last step lives in main.py.
"""

import os
import configparser
from pathlib import Path
from typing import Dict, Any, Optional

from .errors import ConfigError
from .utils.logging_utils import get_logger

logger = get_logger('config')

ENV_PREFIX = 'CVMDI_'

# Sections the environment parser recognises; needed because section names contain underscores.
KNOWN_SECTIONS = ('general', 'logging', 'protocol', 'rate', 'threshold', 'scan', 'simulate', 'attack_region')

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


class Config:
    """
    Configuration manager.

    Values are stored as strings, exactly as read, and converted on access with the
    typed getters. Environment variables override file values.
    """

    def __init__(self, config_file: Optional[str] = None):
        """
        Args:
            config_file (str, optional): INI file; config/config.ini of the project when None
        """
        self.config: Dict[str, Dict[str, str]] = {}

        project_root = Path(__file__).parent.parent

        if config_file is None:
            config_file = project_root / 'config' / 'config.ini'

        self.config_file = config_file

        logger.debug(f"Initializing configuration from {self.config_file} and environment variables")

        self.load_config()

    def load_config(self):
        """
        Load configuration from the config file, then from environment variables.
        """
        try:
            self._load_from_file()
            self._process_env_vars()
            logger.debug("Configuration loaded successfully")
        except Exception as e:
            logger.error(f"Error loading configuration: {str(e)}")
            raise

    def _load_from_file(self):
        if not os.path.exists(self.config_file):
            logger.warning(f"Config file not found: {self.config_file}")
            return

        parser = configparser.ConfigParser()
        try:
            parser.read(self.config_file)
        except configparser.Error as e:
            logger.error(f"Cannot parse config file {self.config_file}: {e}")
            raise ConfigError(f"Cannot parse config file {self.config_file}: {e}") from e

        for section in parser.sections():
            self.config[section] = {}
            for key, value in parser[section].items():
                self.config[section][key] = value

        logger.debug(f"Loaded configuration sections: {list(self.config.keys())}")

    def _process_env_vars(self):
        """
        Apply environment variables in the format CVMDI_SECTION_KEY.

        For example, CVMDI_SIMULATE_SEED overrides config['simulate']['seed'] and
        CVMDI_ATTACK_REGION_GRID_N overrides config['attack_region']['grid_n'].
        """
        for env_var, value in os.environ.items():
            if not env_var.startswith(ENV_PREFIX):
                continue

            rest = env_var[len(ENV_PREFIX):].lower()
            section = next((s for s in sorted(KNOWN_SECTIONS, key=len, reverse=True)
                            if rest.startswith(s + '_')), None)
            if section is None:
                parts = rest.split('_', 1)
                if len(parts) != 2:
                    continue
                section, key = parts
            else:
                key = rest[len(section) + 1:]

            self.config.setdefault(section, {})[key] = value
            logger.debug(f"Setting config[{section}][{key}] from environment variable")

    def get(self, section: str, key: str, default: Any = None) -> Any:
        """Raw (string) value of section/key, or default."""
        return self.config.get(section, {}).get(key, default)

    def get_str(self, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        value = self.get(section, key)
        return default if value in (None, '') else str(value)

    def get_float(self, section: str, key: str, default: Optional[float] = None) -> Optional[float]:
        """
        Get a value converted to float.

        Raises:
            ConfigError: If the stored value is not a number
        """
        value = self.get(section, key)
        if value in (None, ''):
            return default
        try:
            return float(value)
        except (TypeError, ValueError):
            logger.error(f"config[{section}][{key}] = {value!r} is not a number")
            raise ConfigError(f"config[{section}][{key}] = {value!r} is not a number")

    def get_int(self, section: str, key: str, default: Optional[int] = None) -> Optional[int]:
        value = self.get(section, key)
        if value in (None, ''):
            return default
        try:
            return int(float(value))
        except (TypeError, ValueError):
            logger.error(f"config[{section}][{key}] = {value!r} is not an integer")
            raise ConfigError(f"config[{section}][{key}] = {value!r} is not an integer")

    def get_bool(self, section: str, key: str, default: bool = False) -> bool:
        value = self.get(section, key)
        if value in (None, ''):
            return default
        text = str(value).strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        logger.error(f"config[{section}][{key}] = {value!r} is not a boolean")
        raise ConfigError(f"config[{section}][{key}] = {value!r} is not a boolean")

    def get_section(self, section: str) -> Dict[str, Any]:
        """Section as a dict (empty when absent)."""
        return self.config.get(section, {})

    def get_all(self) -> Dict[str, Dict[str, Any]]:
        return self.config

    def set(self, section: str, key: str, value: Any):
        """Store an override (used for command-line flags)."""
        self.config.setdefault(section, {})[key] = str(value)

    def resolved(self, *sections: str) -> Dict[str, Dict[str, str]]:
        """
        Plain, sorted copy of the given sections (all when none given) for output echoes.
        """
        names = sections or tuple(self.config.keys())
        return {name: dict(sorted(self.config.get(name, {}).items())) for name in sorted(names)}


_default_config: Optional[Config] = None


def get_config(config_file: Optional[str] = None) -> Config:
    """
    Fresh Config for an explicit file; otherwise the lazily created, shared default instance.
    """
    global _default_config
    if config_file is not None:
        return Config(config_file)
    if _default_config is None:
        _default_config = Config()
    return _default_config
