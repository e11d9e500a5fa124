"""
This module implements the recursive Newton-Euler inverse dynamics of the chain and assembles the terms of the equation of motion

    M(q) q'' + C(q, q') q' + G(q) + L(q) + K q + D q' = tau

where L(q) is the joint torque caused by external loads. All functions accept a single configuration or a stack of
configurations along a leading axis.
"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass
from functools import lru_cache
import logging

import numpy as np

from cable_sim2real.errors import DimensionError
from cable_sim2real.kinematics import axis_rotation, forward_kinematics
from cable_sim2real.model.state import check_state, validate_loads

if TYPE_CHECKING:
    from typing import List, Optional, Sequence, Tuple

    from cable_sim2real.model.cable import CableModel
    from cable_sim2real.model.joint import JointAxis
    from cable_sim2real.model.state import ChainState, ExternalLoad

LOG: logging.Logger = logging.getLogger("cable_sim2real.dynamics")


@dataclass(frozen=True)
class _Body:
    """
    Elementary body of the recursion: one rotation axis or a weld.

    A joint with pitch and roll becomes a massless pitch body followed by a roll body carrying the link.
    """
    axis: Optional[JointAxis]
    dof: int
    offset: np.ndarray
    mass: float
    com: np.ndarray
    inertia: np.ndarray
    link: int


@dataclass(frozen=True, eq=False)
class DynamicsTerms:
    """
    Terms of the equation of motion at one state.

    Attributes:
        mass_matrix (np.ndarray): M, n x n.
        bias (np.ndarray): C q' + G.
        gravity_torque (np.ndarray): G.
        rne_torque (np.ndarray): M q'' + C q' + G.
        load_torque (np.ndarray): Joint torque of the external loads, zero without loads.
    """
    mass_matrix: np.ndarray
    bias: np.ndarray
    gravity_torque: np.ndarray
    rne_torque: np.ndarray
    load_torque: np.ndarray


@lru_cache(maxsize=64)
def _bodies(model: CableModel) -> Tuple[_Body, ...]:
    bodies: List[_Body] = []
    zero = np.zeros(3)
    dof: int = 0
    for joint_index, joint in enumerate(model.joints):
        parent_length: float = model.links[joint_index].length
        link = model.links[joint_index + 1]
        com = np.array([link.com_offset, 0.0, 0.0])
        if joint.is_fixed:
            bodies.append(_Body(axis=None, dof=-1, offset=np.array([parent_length, 0.0, 0.0]), mass=link.mass, com=com,
                                inertia=link.inertia_matrix, link=joint_index + 1))
            continue
        for position, axis in enumerate(joint.axes):
            last: bool = position == len(joint.axes) - 1
            bodies.append(_Body(axis=axis, dof=dof, offset=np.array([parent_length, 0.0, 0.0]) if position == 0 else zero,
                                mass=link.mass if last else 0.0, com=com if last else zero,
                                inertia=link.inertia_matrix if last else np.zeros((3, 3)), link=joint_index + 1 if last else -1))
            dof += 1
    return tuple(bodies)


def _as_batch(model: CableModel, value: Optional[Sequence[float] | np.ndarray], rows: Optional[int] = None) -> np.ndarray:
    if value is None:
        return np.zeros((rows or 1, model.dof))
    array = np.asarray(value, dtype=float)
    if array.ndim == 1:
        array = array[np.newaxis, :]
    if array.ndim != 2 or array.shape[1] != model.dof:
        raise DimensionError(f'expected vectors of dimension {model.dof}, got shape {array.shape}')
    if rows is not None and array.shape[0] != rows:
        array = np.broadcast_to(array, (rows, model.dof))
    return array


def _cross(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    return np.cross(left, right)


def _rotate_t(rotation: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """Rotation transposed times vector for stacks."""
    return np.einsum('bji,bj->bi', rotation, vector)


def _rotate(rotation: np.ndarray, vector: np.ndarray) -> np.ndarray:
    return np.einsum('bij,bj->bi', rotation, vector)


# pylint: disable-next=too-many-arguments, too-many-positional-arguments, too-many-locals
def _recursion(model: CableModel, q: np.ndarray, qd: np.ndarray, qdd: np.ndarray, gravity_scale: np.ndarray,
               loads: Sequence[ExternalLoad], load_scale: np.ndarray) -> np.ndarray:
    """
    Newton-Euler recursion for a stack of states.

    Every body frame sits at its joint with x along the link. The forward pass propagates angular velocity,
    angular acceleration and the acceleration of the frame origin, the base being accelerated by -gravity.
    The backward pass accumulates force and moment about the frame origin and projects the moment onto the axis.
    """
    rows: int = q.shape[0]
    bodies: Tuple[_Body, ...] = _bodies(model)
    omega = np.zeros((rows, 3))
    domega = np.zeros((rows, 3))
    acc = -gravity_scale[:, np.newaxis] * model.gravity_vector[np.newaxis, :]
    world = np.broadcast_to(np.eye(3), (rows, 3, 3))
    identity = world

    rotations: List[np.ndarray] = []
    states: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    worlds: List[np.ndarray] = []
    for body in bodies:
        origin_acc = acc + _cross(domega, body.offset) + _cross(omega, _cross(omega, body.offset))
        rotation = identity if body.axis is None else axis_rotation(body.axis, q[:, body.dof])
        omega_in = _rotate_t(rotation, omega)
        domega_in = _rotate_t(rotation, domega)
        acc = _rotate_t(rotation, origin_acc)
        if body.axis is None:
            omega, domega = omega_in, domega_in
        else:
            spin = qd[:, body.dof, np.newaxis] * body.axis.unit_vector
            omega = omega_in + spin
            domega = domega_in + qdd[:, body.dof, np.newaxis] * body.axis.unit_vector + _cross(omega_in, spin)
        com_acc = acc + _cross(domega, body.com) + _cross(omega, _cross(omega, body.com))
        world = world @ rotation
        rotations.append(rotation)
        states.append((omega, domega, com_acc))
        worlds.append(world)

    tau = np.zeros((rows, model.dof))
    force_next = np.zeros((rows, 3))
    moment_next = np.zeros((rows, 3))
    child: Optional[int] = None
    for index in range(len(bodies) - 1, -1, -1):
        body = bodies[index]
        omega, domega, com_acc = states[index]
        inertial_force = body.mass * com_acc
        force = inertial_force.copy()
        moment = domega @ body.inertia.T + _cross(omega, omega @ body.inertia.T) + _cross(body.com, inertial_force)
        if child is not None:
            child_force = _rotate(rotations[child], force_next)
            force += child_force
            moment += _rotate(rotations[child], moment_next) + _cross(bodies[child].offset, child_force)
        for load in loads:
            if load.link != body.link:
                continue
            local_force = _rotate_t(worlds[index], load_scale[:, np.newaxis] * load.force[np.newaxis, :])
            local_torque = _rotate_t(worlds[index], load_scale[:, np.newaxis] * load.torque[np.newaxis, :])
            force -= local_force
            moment -= _cross(np.array([load.offset, 0.0, 0.0]), local_force) + local_torque
        if body.axis is not None:
            tau[:, body.dof] = moment @ body.axis.unit_vector
        force_next, moment_next, child = force, moment, index
    return tau


# pylint: disable-next=too-many-arguments, too-many-positional-arguments
def rne_batch(model: CableModel, q: np.ndarray, qd: Optional[np.ndarray] = None, qdd: Optional[np.ndarray] = None,
              gravity_on: bool = True, loads: Optional[Sequence[ExternalLoad]] = None) -> np.ndarray:
    """
    Inverse dynamics for a stack of states (rows), missing velocities and accelerations are zero.

    Returns:
        np.ndarray: Joint torques with the shape of ``q``.
    """
    single: bool = np.asarray(q).ndim == 1
    q_batch = _as_batch(model, q)
    rows: int = q_batch.shape[0]
    checked = validate_loads(model, loads)
    tau = _recursion(model, q_batch, _as_batch(model, qd, rows), _as_batch(model, qdd, rows),
                     np.full(rows, 1.0 if gravity_on else 0.0), checked, np.ones(rows))
    return tau[0] if single else tau


def rne(model: CableModel, state: ChainState, gravity_on: bool = True, loads: Optional[Sequence[ExternalLoad]] = None) -> np.ndarray:
    """
    Recursive Newton-Euler inverse dynamics: M q'' + C q' + G (G only if ``gravity_on``), plus the load torque if loads are given.

    Raises:
        DimensionError: if the state does not match the model.
    """
    check_state(model, state, check_limits=False)
    return rne_batch(model, state.q, state.qd, state.qdd, gravity_on=gravity_on, loads=loads)


def mass_matrix(model: CableModel, q: Sequence[float] | np.ndarray) -> np.ndarray:
    """
    Joint-space inertia matrix, column j being the RNE torque for unit acceleration of DOF j at rest without gravity.
    Returns n x n for a single configuration and B x n x n for a stack.
    """
    single: bool = np.asarray(q).ndim == 1
    q_batch = _as_batch(model, q)
    dof: int = model.dof
    stacked = np.repeat(q_batch, dof, axis=0)
    accelerations = np.tile(np.eye(dof), (q_batch.shape[0], 1))
    rows: int = stacked.shape[0]
    columns = _recursion(model, stacked, np.zeros((rows, dof)), accelerations, np.zeros(rows), (), np.zeros(rows))
    matrices = np.swapaxes(columns.reshape(q_batch.shape[0], dof, dof), 1, 2)
    return matrices[0] if single else matrices


def bias_forces(model: CableModel, q: Sequence[float] | np.ndarray, qd: Sequence[float] | np.ndarray) -> np.ndarray:
    """C q' + G: inverse dynamics at zero acceleration with gravity."""
    return rne_batch(model, np.asarray(q, dtype=float), qd=np.asarray(qd, dtype=float), gravity_on=True)


def gravity_torque(model: CableModel, q: Sequence[float] | np.ndarray) -> np.ndarray:
    """
    G: inverse dynamics at rest with gravity, the torque a motor would need to hold ``q``.

    Positive pitch sags down, so gravity pulls a horizontal link towards positive q and the holding torque is negative: a link of
    mass m with its center of mass c from the joint needs -m g c cos(q). Books that measure the angle upwards print +m g c for
    the same rod; only the sign of the coordinate differs.
    """
    return rne_batch(model, np.asarray(q, dtype=float), gravity_on=True)


def load_torque(model: CableModel, q: Sequence[float] | np.ndarray, loads: Optional[Sequence[ExternalLoad]]) -> np.ndarray:
    """
    Joint torque of the external loads, the negative transposed Jacobian times each applied wrench.
    For a constant force this equals the gradient of its potential.
    """
    return rne_batch(model, np.asarray(q, dtype=float), gravity_on=False, loads=loads)


def static_torque(model: CableModel, q: Sequence[float] | np.ndarray, loads: Optional[Sequence[ExternalLoad]] = None) -> np.ndarray:
    """G(q) + L(q) + K q: the torque a passive chain has to balance at rest."""
    q_array = np.asarray(q, dtype=float)
    return rne_batch(model, q_array, gravity_on=True, loads=loads) + model.stiffness * q_array


def mass_matrix_and_bias(model: CableModel, q: np.ndarray, qd: np.ndarray,
                         loads: Optional[Sequence[ExternalLoad]] = None, gravity_on: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """
    M(q) and C q' + G + L in one batched recursion of n + 1 rows.
    """
    q_vector = np.asarray(q, dtype=float).reshape(-1)
    qd_vector = np.asarray(qd, dtype=float).reshape(-1)
    if q_vector.size != model.dof or qd_vector.size != model.dof:
        raise DimensionError(f'expected vectors of dimension {model.dof}')
    dof: int = model.dof
    checked = validate_loads(model, loads)
    positions = np.tile(q_vector, (dof + 1, 1))
    velocities = np.zeros((dof + 1, dof))
    velocities[dof] = qd_vector
    accelerations = np.zeros((dof + 1, dof))
    accelerations[:dof] = np.eye(dof)
    scale = np.zeros(dof + 1)
    scale[dof] = 1.0
    result = _recursion(model, positions, velocities, accelerations, scale * (1.0 if gravity_on else 0.0), checked, scale)
    return result[:dof].T, result[dof]


def inverse_dynamics_full(model: CableModel, state: ChainState, loads: Optional[Sequence[ExternalLoad]] = None) -> np.ndarray:
    """
    Left side of the equation of motion: RNE torque with gravity, load torque, K q and D q'. Zero for a passive cable.
    """
    check_state(model, state, check_limits=False)
    tau = rne_batch(model, state.q, state.qd, state.qdd, gravity_on=True, loads=loads)
    return tau + model.stiffness * state.q + model.damping * state.qd


def dynamics_terms(model: CableModel, state: ChainState, loads: Optional[Sequence[ExternalLoad]] = None) -> DynamicsTerms:
    """All terms of the equation of motion at ``state``."""
    check_state(model, state, check_limits=False)
    matrix, bias = mass_matrix_and_bias(model, state.q, state.qd, gravity_on=True)
    gravity = gravity_torque(model, state.q)
    loads_tau = load_torque(model, state.q, loads) if loads else np.zeros(model.dof)
    return DynamicsTerms(mass_matrix=matrix, bias=bias, gravity_torque=gravity, rne_torque=matrix @ state.qdd + bias,
                         load_torque=loads_tau)


def potential_energy(model: CableModel, q: Sequence[float], loads: Optional[Sequence[ExternalLoad]] = None) -> float:
    """
    Gravity and load potential relative to the world frame origin. Load torques are not conservative and are ignored.
    """
    frames = forward_kinematics(model, q)
    gravity = model.gravity_vector
    energy: float = -sum(link.mass * float(gravity @ frame.translation) for link, frame in zip(model.links[1:], frames.coms[1:]))
    for load in validate_loads(model, loads):
        point = frames.links[load.link].transform_point((load.offset, 0.0, 0.0))
        energy -= float(load.force @ point)
    return energy
