"""
Output Module

CSV and JSON emission shared by the command-line subcommands. Every document carries the
tool name, its version and the resolved configuration. Nothing time-dependent is written, so
identical inputs give byte-identical files.
"""

import json
import os
import sys
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from . import __version__
from .utils.logging_utils import get_logger

logger = get_logger('output')

TOOL_NAME = 'cvmdi-qkd'
FLOAT_FORMAT = '%.12g'


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


def _clean(value):
    # NaN and infinities are not valid JSON
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return 'inf' if value > 0 else '-inf'
    return value


def envelope(command: str, config: Dict[str, Any], payload: Dict[str, Any]) -> Dict[str, Any]:
    document = {'tool': TOOL_NAME, 'version': __version__, 'command': command, 'config': config}
    document.update(payload)
    return document


def to_json(document: Dict[str, Any]) -> str:
    return json.dumps(_clean(document), sort_keys=True, indent=2, default=_json_default) + '\n'


def resolve_output_path(path: Optional[str]) -> Optional[str]:
    """Relative paths land in CVMDI_OUTPUT_DIR when it is set; '-' or None means stdout."""
    if path in (None, '', '-'):
        return None
    out_dir = os.environ.get('CVMDI_OUTPUT_DIR')
    if out_dir and not os.path.isabs(path):
        path = os.path.join(out_dir, path)
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    return path


def write_json(command: str, config: Dict[str, Any], payload: Dict[str, Any], path: Optional[str] = None) -> str:
    """
    Write a JSON document to path, or to stdout when path is None.

    Returns:
        str: The serialised document
    """
    text = to_json(envelope(command, config, payload))
    target = resolve_output_path(path)
    if target is None:
        sys.stdout.write(text)
    else:
        with open(target, 'w') as f:
            f.write(text)
        logger.info(f"Wrote {command} result to {target}")
    return text


def write_frame(command: str, config: Dict[str, Any], frame: pd.DataFrame, path: Optional[str] = None,
                fmt: str = 'csv', extra: Optional[Dict[str, Any]] = None) -> str:
    """
    Write a table as CSV or as JSON records.

    A CSV file gets a .meta.json sidecar with the config echo; CSV sent to stdout has the same
    envelope written to stderr.

    Returns:
        str: The serialised table
    """
    extra = extra or {}
    if fmt == 'json':
        payload = dict(extra)
        payload['columns'] = list(frame.columns)
        payload['rows'] = frame.to_dict(orient='records')
        return write_json(command, config, payload, path)

    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT)
    meta = dict(extra)
    meta['columns'] = list(frame.columns)
    meta['rows'] = len(frame)
    meta_text = to_json(envelope(command, config, meta))

    target = resolve_output_path(path)
    if target is None:
        sys.stdout.write(text)
        sys.stderr.write(meta_text)
        return text

    with open(target, 'w', newline='') as f:
        f.write(text)
    with open(target + '.meta.json', 'w') as f:
        f.write(meta_text)
    logger.info(f"Wrote {len(frame)} rows to {target}")
    return text
