""" This module reads the optional JSON settings document"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass, field, replace
import json
import logging

from cable_sim2real.curve_fit import DEFAULT_SAMPLE_COUNT
from cable_sim2real.errors import CableSim2RealError, ConfigurationError
from cable_sim2real.identification.estimator import IdentificationSettings
from cable_sim2real.servo import ServoGains
from cable_sim2real.simulation import DEFAULT_DT

if TYPE_CHECKING:
    from typing import Any, Dict, Optional
    from pathlib import Path

LOG: logging.Logger = logging.getLogger("cable_sim2real.settings")

ROOT_KEY: str = 'cableSim2Real'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')

# settings keys carry units where the dataclass field does not
_IDENTIFICATION_KEYS: Dict[str, str] = {
    'window': 'window', 'dt_s': 'dt', 'velocity_threshold_radps': 'velocity_threshold', 'dynamic_threshold_radps': 'dynamic_threshold',
    'tail_duration_s': 'tail_duration', 'refinement_passes': 'refinement_passes', 'association_window_s': 'association_window',
    'cutoff': 'cutoff', 'smoothing_passes': 'smoothing_passes', 'noise_floor_factor': 'noise_floor_factor',
}
_SERVO_KEYS: Dict[str, str] = {
    'kp': 'kp', 'ki': 'ki', 'kd': 'kd', 'time_constant_s': 'time_constant', 'damping_lambda': 'damping_lambda', 'pos_tol_m': 'pos_tol',
    'rot_tol_rad': 'rot_tol', 'max_iters': 'max_iters', 'dt_s': 'dt', 'integral_limit': 'integral_limit', 'position_only': 'position_only',
    'divergence_factor': 'divergence_factor',
}


@dataclass(frozen=True)
class SimulationSettings:
    """
    Attributes:
        dt (float): Integration step in seconds.
    """
    dt: float = DEFAULT_DT


@dataclass(frozen=True)
class CurveFitSettings:
    """
    Attributes:
        sample_count (int): Points of the sampled polyline.
        trim_fraction (float): Share of outliers dropped before the refit, 0 disables trimming.
    """
    sample_count: int = DEFAULT_SAMPLE_COUNT
    trim_fraction: float = 0.0


@dataclass(frozen=True)
class Settings:
    """
    All settings of a run. Command line flags take precedence.

    Attributes:
        log_level (str): Level of the root logger.
        db_url (str, optional): SQLAlchemy URL of the result store.
        simulation (SimulationSettings): Time integration.
        identification (IdentificationSettings): Identification pipeline.
        servo (ServoGains): Servo controller.
        curve_fit (CurveFitSettings): Curve fitting.
    """
    log_level: str = 'ERROR'
    db_url: Optional[str] = None
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    identification: IdentificationSettings = field(default_factory=IdentificationSettings)
    servo: ServoGains = field(default_factory=ServoGains)
    curve_fit: CurveFitSettings = field(default_factory=CurveFitSettings)


def _section(document: Any, defaults: Any, keys: Dict[str, str], path: str) -> Any:
    if not isinstance(document, dict):
        raise ConfigurationError('expected an object', path=path)
    values: Dict[str, Any] = {}
    for key, value in document.items():
        if key not in keys:
            raise ConfigurationError(f'unknown key "{key}"', path=path)
        if isinstance(value, list):
            value = tuple(value)
        values[keys[key]] = value
    try:
        return replace(defaults, **values)
    except (CableSim2RealError, TypeError, ValueError) as err:
        raise ConfigurationError(str(err), path=path) from err


def settings_from_dict(document: Dict[str, Any]) -> Settings:
    """
    Builds settings from a parsed document with the top-level key ``cableSim2Real``.

    Raises:
        ConfigurationError: naming the path of unknown keys or invalid values.
    """
    if not isinstance(document, dict) or set(document) != {ROOT_KEY}:
        raise ConfigurationError(f'settings need exactly the top-level key "{ROOT_KEY}"', path='$')
    body = document[ROOT_KEY]
    if not isinstance(body, dict):
        raise ConfigurationError('expected an object', path=ROOT_KEY)
    settings = Settings()
    for key, value in body.items():
        path = f'{ROOT_KEY}.{key}'
        if key == 'log_level':
            if value not in LOG_LEVELS:
                raise ConfigurationError(f'log level must be one of {", ".join(LOG_LEVELS)}', path=path)
            settings = replace(settings, log_level=value)
        elif key == 'db_url':
            if value is not None and not isinstance(value, str):
                raise ConfigurationError('expected a database URL', path=path)
            settings = replace(settings, db_url=value)
        elif key == 'simulation':
            settings = replace(settings, simulation=_section(value, settings.simulation, {'dt_s': 'dt'}, path))
        elif key == 'identification':
            settings = replace(settings, identification=_section(value, settings.identification, _IDENTIFICATION_KEYS, path))
        elif key == 'servo':
            settings = replace(settings, servo=_section(value, settings.servo, _SERVO_KEYS, path))
        elif key == 'curve_fit':
            settings = replace(settings, curve_fit=_section(value, settings.curve_fit,
                                                            {'sample_count': 'sample_count', 'trim_fraction': 'trim_fraction'}, path))
        else:
            raise ConfigurationError(f'unknown key "{key}"', path=ROOT_KEY)
    if not settings.simulation.dt > 0:
        raise ConfigurationError('dt must be positive', path=f'{ROOT_KEY}.simulation.dt_s')
    return settings


def load_settings_file(path: Path) -> Settings:
    """Reads a settings document from a file."""
    try:
        with open(path, 'r', encoding='utf-8') as settings_file:
            document = json.load(settings_file)
    except OSError as err:
        raise ConfigurationError(f'cannot read settings file: {err.strerror}', path=str(path)) from err
    except json.JSONDecodeError as err:
        raise ConfigurationError(f'settings file is not valid JSON: {err}', path=str(path)) from err
    settings = settings_from_dict(document)
    LOG.info('Loaded settings from %s', path)
    return settings

