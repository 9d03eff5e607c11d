"""
Logging Utilities Module

Root logging setup for the CLI and the package logger hierarchy ('src.<subpackage>.<module>').
Plain text goes to stderr or a log file; JSON records use the Powertools formatter so that
long sweeps and simulations can be ingested by log tooling.
"""

import os
import logging
from typing import Dict, Any, Optional

from aws_lambda_powertools.logging.formatter import LambdaPowertoolsFormatter

PACKAGE_LOGGER = 'src'
DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

LEVELS = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
    'CRITICAL': logging.CRITICAL,
}

_TRUTHY = ('1', 'true', 'yes')


def _convert_log_level_str_to_int(log_level_str: str) -> int:
    """Level name to logging constant; unknown names fall back to INFO."""
    return LEVELS.get(str(log_level_str).strip().upper(), logging.INFO)


def get_logging_level_from_env() -> int:
    """Level named by CVMDI_LOGGING_LEVEL (INFO when unset)."""
    return _convert_log_level_str_to_int(os.environ.get('CVMDI_LOGGING_LEVEL', 'INFO'))


def get_logging_level_from_config(config: Dict[str, Any]) -> Optional[int]:
    """
    Level from the [logging] section of a config dictionary.

    Returns:
        Optional[int]: None when the section or its 'level' key is absent
    """
    level = (config or {}).get('logging', {}).get('level')
    if level is None:
        return None
    return _convert_log_level_str_to_int(level)


def _logging_section(config: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    return (config or {}).get('logging', {})


def _json_requested(config: Optional[Dict[str, Any]]) -> bool:
    if os.environ.get('CVMDI_LOGGING_JSON', '').lower() in _TRUTHY:
        return True
    return str(_logging_section(config).get('json', 'false')).lower() in _TRUTHY


def setup_logging(log_level=None, log_file=None, log_format=None, config=None, json_logs=None):
    """
    Configure the root logger and return the package logger.

    Each setting is taken from the argument when given, then from the config dictionary's
    [logging] section, then from CVMDI_LOGGING_LEVEL / CVMDI_LOGGING_FILE / CVMDI_LOGGING_JSON.
    Existing root handlers are replaced, so calling this again (as the CLI does once the
    config file is read) takes effect.

    Args:
        log_level (int, optional): Logging constant
        log_file (str, optional): Append to this file instead of stderr
        log_format (str, optional): Format of plain text records
        config (Dict[str, Any], optional): Loaded configuration
        json_logs (bool, optional): Emit JSON records

    Returns:
        logging.Logger: The package logger
    """
    section = _logging_section(config)

    if log_level is None:
        log_level = get_logging_level_from_config(config)
    if log_level is None:
        log_level = get_logging_level_from_env()

    log_file = log_file or section.get('file') or os.environ.get('CVMDI_LOGGING_FILE')

    if json_logs is None:
        json_logs = _json_requested(config)

    kwargs = {'level': log_level, 'format': log_format or DEFAULT_FORMAT, 'force': True}
    if log_file:
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        kwargs.update(filename=log_file, filemode='a')

    logging.basicConfig(**kwargs)

    if json_logs:
        formatter = LambdaPowertoolsFormatter(json_default=str)
        for handler in logging.getLogger().handlers:
            handler.setFormatter(formatter)

    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(log_level)
    return logger


def get_logger(name=None):
    """Logger 'src.<name>', or the package logger itself when name is None."""
    return logging.getLogger(PACKAGE_LOGGER if name is None else f'{PACKAGE_LOGGER}.{name}')


def log_exception(logger, exception, message=None):
    """Log exception with its traceback, prefixed by message when given."""
    text = str(exception) if not message else f"{message}: {exception}"
    logger.exception(text)
