"""
Configuration loading for powerctl.

Settings live in ``config.json`` at the repository root, in PascalCase
sections. Missing files fall back to the built-in defaults below.
"""

import copy
import json
import logging
import os
import sys
from typing import Any, Dict, Optional

from powerctl.allocator import SolverOptions
from powerctl.validators import ValidationError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config.json')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')

DEFAULT_CONFIG: Dict[str, Any] = {
    'Logging': {
        'LogLevel': 'INFO',
    },
    'Solver': {
        'MuTolerance': 1e-10,
        'LambdaTolerance': 1e-9,
        'MaxIterations': 200,
        'ClosedForm': True,
    },
    'Scenario': {
        'BandwidthHz': 10e6,
        'NoiseDbm': -103.0,
        'GainDb': -100.0,
        'PMaxDbm': 46.0,
    },
    'Experiments': {
        'Workers': 1,
        'RateBps': 1e7,
        'SweepRangeDb': '0:40',
        'StepDb': 1.0,
        'Users': 10,
        'GainSpreadDb': 20.0,
        'Rates': [1e5, 5e5, 1e6, 2e6, 5e6],
        'Presets': ['macro', 'micro', 'pico', 'femto'],
        'LoadFactor': 1.0,
    },
    'Api': {
        'Host': '127.0.0.1',
        'Port': 5050,
    },
}


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load configuration merged over the defaults.

    Args:
        path: Explicit config file; the repository ``config.json`` otherwise

    Returns:
        Configuration dictionary with every default section present

    Raises:
        ValidationError: If an explicitly given file is missing or malformed
    """
    explicit = path is not None
    config_path = path if explicit else DEFAULT_CONFIG_PATH
    config = copy.deepcopy(DEFAULT_CONFIG)

    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            loaded = json.load(f)
    except FileNotFoundError:
        if explicit:
            raise ValidationError(f"Config file not found: {config_path}")
        logger.debug(f"No config file at {config_path}, using defaults")
        return config
    except json.JSONDecodeError as e:
        if explicit:
            raise ValidationError(f"Invalid JSON in config file {config_path}: {e.msg}")
        logger.warning(f"Ignoring malformed config file {config_path}: {e.msg}")
        return config

    if not isinstance(loaded, dict):
        if explicit:
            raise ValidationError(f"Config file {config_path} must contain a JSON object")
        return config
    return _merge(config, loaded)


def configure_logging(level: Optional[str] = None, config: Optional[Dict[str, Any]] = None) -> None:
    """Install a single stderr handler on the root logger."""
    if level is None:
        level = ((config or {}).get('Logging') or {}).get('LogLevel', 'INFO')
    level = str(level).upper()
    if level not in LOG_LEVELS:
        raise ValidationError(f"Invalid log level: {level}. Allowed: {', '.join(LOG_LEVELS)}")

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_powerctl', False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._powerctl = True
    root.addHandler(handler)
    root.setLevel(level)


def solver_options_from_config(config: Dict[str, Any], tolerance: Optional[float] = None,
                               max_iterations: Optional[int] = None) -> SolverOptions:
    """
    Build SolverOptions from the ``Solver`` section plus CLI overrides.

    ``tolerance`` sets lambda_tolerance and mu_tolerance = tolerance / 10.
    """
    section = config.get('Solver') or {}
    mu_tol = section.get('MuTolerance', 1e-10)
    lambda_tol = section.get('LambdaTolerance', 1e-9)
    if tolerance is not None:
        lambda_tol = tolerance
        mu_tol = tolerance / 10.0
    return SolverOptions(
        mu_tolerance=mu_tol,
        lambda_tolerance=lambda_tol,
        max_iterations=max_iterations if max_iterations is not None else section.get('MaxIterations', 200),
        closed_form=bool(section.get('ClosedForm', True)),
    )


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base
