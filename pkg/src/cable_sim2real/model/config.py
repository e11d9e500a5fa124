""" This module reads and writes the JSON model document"""
from __future__ import annotations
from typing import TYPE_CHECKING

import json
import logging

from cable_sim2real.errors import ConfigurationError, ModelError
from cable_sim2real.model.cable import CableModel, GRAVITY
from cable_sim2real.model.joint import JointAxis, JointSpec
from cable_sim2real.model.link import LinkSpec

if TYPE_CHECKING:
    from typing import Any, Dict, List, Set
    from pathlib import Path

LOG: logging.Logger = logging.getLogger("cable_sim2real.model.config")

ROOT_KEY: str = 'cable'
MODEL_KEYS: Set[str] = {'name', 'gravity_mps2', 'links', 'joints'}
LINK_KEYS: Set[str] = {'length_m', 'mass_kg', 'com_offset_m', 'inertia_kgm2'}
JOINT_KEYS: Set[str] = {'axes', 'stiffness_nm_per_rad', 'damping_nms_per_rad', 'limits_rad'}


def _check_keys(document: Dict[str, Any], allowed: Set[str], required: Set[str], path: str) -> None:
    if not isinstance(document, dict):
        raise ConfigurationError('expected an object', path=path)
    for key in document:
        if key not in allowed:
            raise ConfigurationError(f'unknown key "{key}"', path=path)
    for key in required:
        if key not in document:
            raise ConfigurationError(f'missing required key "{key}"', path=path)


def _float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError('expected a number', path=path)
    return float(value)


def _float_list(value: Any, path: str) -> List[float]:
    if not isinstance(value, list):
        raise ConfigurationError('expected a list of numbers', path=path)
    return [_float(item, f'{path}[{index}]') for index, item in enumerate(value)]


def _parse_link(document: Dict[str, Any], path: str) -> LinkSpec:
    _check_keys(document, LINK_KEYS, {'length_m', 'mass_kg'}, path)
    length: float = _float(document['length_m'], f'{path}.length_m')
    mass: float = _float(document['mass_kg'], f'{path}.mass_kg')
    try:
        com_offset = _float(document['com_offset_m'], f'{path}.com_offset_m') if 'com_offset_m' in document else None
        if 'inertia_kgm2' in document:
            rows = document['inertia_kgm2']
            if not isinstance(rows, list) or len(rows) != 3:
                raise ConfigurationError('expected a 3x3 matrix', path=f'{path}.inertia_kgm2')
            inertia = tuple(tuple(_float_list(row, f'{path}.inertia_kgm2[{index}]')) for index, row in enumerate(rows))
            return LinkSpec(length=length, mass=mass, com_offset=length / 2.0 if com_offset is None else com_offset,
                            inertia=inertia)  # type: ignore[arg-type]
        return LinkSpec.slender_rod(length=length, mass=mass, com_offset=com_offset)
    except ModelError as err:
        raise ModelError(err.message, path=f'{path}.{err.path}' if err.path else path) from err


def _parse_joint(document: Dict[str, Any], path: str) -> JointSpec:
    _check_keys(document, JOINT_KEYS, {'axes'}, path)
    axes_value = document['axes']
    if not isinstance(axes_value, list):
        raise ConfigurationError('expected a list of axis names', path=f'{path}.axes')
    try:
        axes = tuple(JointAxis(name) for name in axes_value)
    except ValueError as err:
        raise ConfigurationError(f'unknown axis in {axes_value}, use "pitch" or "roll"', path=f'{path}.axes') from err
    limits = ()
    if 'limits_rad' in document:
        if not isinstance(document['limits_rad'], list):
            raise ConfigurationError('expected a list of [lower, upper] pairs', path=f'{path}.limits_rad')
        pairs = []
        for index, pair in enumerate(document['limits_rad']):
            values = _float_list(pair, f'{path}.limits_rad[{index}]')
            if len(values) != 2:
                raise ConfigurationError('expected [lower, upper]', path=f'{path}.limits_rad[{index}]')
            pairs.append((values[0], values[1]))
        limits = tuple(pairs)
    try:
        return JointSpec(axes=axes,
                         stiffness=tuple(_float_list(document.get('stiffness_nm_per_rad', []), f'{path}.stiffness_nm_per_rad')),
                         damping=tuple(_float_list(document.get('damping_nms_per_rad', []), f'{path}.damping_nms_per_rad')),
                         limits=limits)
    except ModelError as err:
        raise ModelError(err.message, path=f'{path}.{err.path}' if err.path else path) from err


def model_from_dict(document: Dict[str, Any]) -> CableModel:
    """
    Builds a model from an already parsed document.

    Raises:
        ConfigurationError: for missing or unknown keys and values of wrong type, with the key path.
        ModelError: for type invariant violations, with the key path.
    """
    _check_keys(document, {ROOT_KEY}, {ROOT_KEY}, '$')
    cable = document[ROOT_KEY]
    _check_keys(cable, MODEL_KEYS, {'links', 'joints'}, ROOT_KEY)
    if not isinstance(cable['links'], list):
        raise ConfigurationError('expected a list of links', path=f'{ROOT_KEY}.links')
    if not isinstance(cable['joints'], list):
        raise ConfigurationError('expected a list of joints', path=f'{ROOT_KEY}.joints')
    links = tuple(_parse_link(link, f'{ROOT_KEY}.links[{index}]') for index, link in enumerate(cable['links']))
    joints = tuple(_parse_joint(joint, f'{ROOT_KEY}.joints[{index}]') for index, joint in enumerate(cable['joints']))
    gravity = tuple(_float_list(cable['gravity_mps2'], f'{ROOT_KEY}.gravity_mps2')) if 'gravity_mps2' in cable else GRAVITY
    name = cable.get('name', 'cable')
    if not isinstance(name, str):
        raise ConfigurationError('expected a string', path=f'{ROOT_KEY}.name')
    try:
        return CableModel(links=links, joints=joints, gravity=gravity, name=name)  # type: ignore[arg-type]
    except ModelError as err:
        raise ModelError(err.message, path=f'{ROOT_KEY}.{err.path}' if err.path else ROOT_KEY) from err


def model_to_dict(model: CableModel) -> Dict[str, Any]:
    """Inverse of :func:`model_from_dict`, every numeric field written explicitly."""
    return {ROOT_KEY: {
        'name': model.name,
        'gravity_mps2': list(model.gravity),
        'links': [{'length_m': link.length, 'mass_kg': link.mass, 'com_offset_m': link.com_offset,
                   'inertia_kgm2': [list(row) for row in link.inertia]} for link in model.links],
        'joints': [{'axes': [axis.value for axis in joint.axes], 'stiffness_nm_per_rad': list(joint.stiffness),
                    'damping_nms_per_rad': list(joint.damping), 'limits_rad': [list(limit) for limit in joint.limits]}
                   for joint in model.joints],
    }}


def load_model(config_document: str) -> CableModel:
    """
    Parses a JSON model document.

    Raises:
        ConfigurationError: if the document does not parse or violates the schema.
    """
    try:
        document = json.loads(config_document)
    except json.JSONDecodeError as err:
        raise ConfigurationError(f'model document is not valid JSON: {err}') from err
    model: CableModel = model_from_dict(document)
    LOG.info('Loaded model "%s" with %d links and %d DOF', model.name, len(model.links), model.dof)
    return model


def save_model(model: CableModel) -> str:
    """Serializes the model; ``load_model(save_model(m))`` reproduces every numeric field exactly."""
    return json.dumps(model_to_dict(model), indent=4)


def load_model_file(path: Path) -> CableModel:
    """Reads a model document from a file."""
    try:
        with open(path, 'r', encoding='utf-8') as config_file:
            return load_model(config_file.read())
    except OSError as err:
        raise ConfigurationError(f'cannot read model file: {err.strerror}', path=str(path)) from err


def save_model_file(model: CableModel, path: Path) -> None:
    """Writes a model document to a file."""
    with open(path, 'w', encoding='utf-8') as config_file:
        config_file.write(save_model(model))
        config_file.write('\n')
