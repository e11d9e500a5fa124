""" This module contains the cable model: an ordered serial chain of links and joints rooted at a fixed base link"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass
import logging

import numpy as np

from cable_sim2real.errors import ModelError
from cable_sim2real.model.joint import JointAxis, JointSpec, WELD
from cable_sim2real.model.link import LinkSpec

if TYPE_CHECKING:
    from typing import List, Sequence, Tuple

LOG: logging.Logger = logging.getLogger("cable_sim2real.model.cable")

GRAVITY: Tuple[float, float, float] = (0.0, 0.0, -9.8)


@dataclass(frozen=True)
class CableModel:
    """
    Parametric model of a cable as a serial chain.

    ``links[0]`` is the base, welded to the world; joint ``j`` connects ``links[j]`` (proximal) to ``links[j + 1]`` (distal).
    The world frame sits at the distal end of the base link, the straight chain points along +x and gravity is along -z.
    The base link's inertial parameters never enter the dynamics.

    Attributes:
        links (Tuple[LinkSpec, ...]): Links ordered from base to tip.
        joints (Tuple[JointSpec, ...]): One joint per inter-link connection.
        gravity (Tuple[float, float, float]): Gravitational acceleration in m/s^2.
        name (str): Free text name used in reports and the result store.
    """
    links: Tuple[LinkSpec, ...]
    joints: Tuple[JointSpec, ...]
    gravity: Tuple[float, float, float] = GRAVITY
    name: str = 'cable'

    def __post_init__(self) -> None:
        object.__setattr__(self, 'links', tuple(self.links))
        object.__setattr__(self, 'joints', tuple(self.joints))
        object.__setattr__(self, 'gravity', tuple(float(value) for value in self.gravity))
        if not self.links:
            raise ModelError('a cable needs at least one link', path='links')
        if len(self.joints) != len(self.links) - 1:
            raise ModelError(f'expected {len(self.links) - 1} joints for {len(self.links)} links, got {len(self.joints)}', path='joints')
        if len(self.gravity) != 3 or not all(np.isfinite(self.gravity)):
            raise ModelError('gravity must be a finite 3-vector', path='gravity_mps2')

    @property
    def dof(self) -> int:
        """Total number of enabled joint axes."""
        return sum(joint.dof for joint in self.joints)

    @property
    def dof_axes(self) -> List[Tuple[int, JointAxis]]:
        """(joint index, axis) for every degree of freedom in state-vector order."""
        return [(joint_index, axis) for joint_index, joint in enumerate(self.joints) for axis in joint.axes]

    @property
    def stiffness(self) -> np.ndarray:
        """Diagonal of K in state-vector order."""
        return np.array([value for joint in self.joints for value in joint.stiffness], dtype=float)

    @property
    def damping(self) -> np.ndarray:
        """Diagonal of D in state-vector order."""
        return np.array([value for joint in self.joints for value in joint.damping], dtype=float)

    @property
    def lower_limits(self) -> np.ndarray:
        """Lower joint limits in state-vector order."""
        return np.array([limit[0] for joint in self.joints for limit in joint.limits], dtype=float)

    @property
    def upper_limits(self) -> np.ndarray:
        """Upper joint limits in state-vector order."""
        return np.array([limit[1] for joint in self.joints for limit in joint.limits], dtype=float)

    @property
    def locked(self) -> np.ndarray:
        """Mask of degrees of freedom locked by equal limits."""
        return self.lower_limits == self.upper_limits

    @property
    def gravity_vector(self) -> np.ndarray:
        """Gravity as numpy array."""
        return np.array(self.gravity, dtype=float)

    def moving_mass(self) -> float:
        """Mass of all links distal to the base."""
        return float(sum(link.mass for link in self.links[1:]))

    def list_index(self, link_id: int) -> int:
        """
        Converts a link id counted from the distal end (0 = last link) into an index of ``links``.

        Raises:
            ModelError: if the link does not exist.
        """
        index: int = len(self.links) - 1 - link_id
        if link_id < 0 or index < 0:
            raise ModelError(f'link {link_id} does not exist in a chain of {len(self.links)} links', path='links')
        return index

    def subchain(self, root_index: int) -> CableModel:
        """Returns the chain rerooted at ``links[root_index]`` with all distal links and joints preserved."""
        if not 0 <= root_index < len(self.links):
            raise ModelError(f'link index {root_index} does not exist', path='links')
        return CableModel(links=self.links[root_index:], joints=self.joints[root_index:], gravity=self.gravity, name=self.name)

    def with_joints(self, joints: Sequence[JointSpec]) -> CableModel:
        """Returns a copy with the joints replaced."""
        return CableModel(links=self.links, joints=tuple(joints), gravity=self.gravity, name=self.name)

    def with_gravity(self, gravity: Sequence[float]) -> CableModel:
        """Returns a copy with another gravity vector."""
        return CableModel(links=self.links, joints=self.joints, gravity=tuple(gravity), name=self.name)


def default_bench_model(cable_links: int = 15) -> CableModel:
    """
    The bench cable: fifteen 5 cm / 50 g links with the center of mass in the middle, a 10 cm / 100 g plug welded to the
    last one, pitch and roll joints with roll locked by its limits, stiffness and damping still to be identified.

    ``links[0]`` is the cable link farthest from the plug, which acts as base.
    """
    links: List[LinkSpec] = [LinkSpec.slender_rod(length=0.05, mass=0.05) for _ in range(cable_links)]
    links.append(LinkSpec.slender_rod(length=0.10, mass=0.10))
    joints: List[JointSpec] = [JointSpec(axes=(JointAxis.PITCH, JointAxis.ROLL)) for _ in range(cable_links - 1)]
    joints.append(WELD)
    return CableModel(links=tuple(links), joints=tuple(joints), gravity=GRAVITY, name='bench-cable')


def fix_link(model: CableModel, link_id: int) -> CableModel:
    """
    Welds link ``link_id`` (counted from the distal end, 0 = last link) horizontally to the world.

    Raises:
        ModelError: if the link does not exist or no degree of freedom remains distal to it.
    """
    root_index: int = model.list_index(link_id)
    fixed: CableModel = model.subchain(root_index)
    if fixed.dof == 0:
        raise ModelError(f'fixing link {link_id} leaves no degree of freedom', path='links')
    LOG.debug('Fixed link %d: %d links and %d DOF remain', link_id, len(fixed.links), fixed.dof)
    return fixed


def pitch_only(model: CableModel) -> CableModel:
    """Returns the model with every roll axis removed."""
    return model.with_joints([joint.only((JointAxis.PITCH,)) for joint in model.joints])


def identification_subchain(model: CableModel, dof: int = 4) -> CableModel:
    """
    Sub-model used for identification: rerooted so that exactly ``dof`` pitch joints lie distal to the base, pitch only.

    Raises:
        ModelError: if the model has fewer pitch joints.
    """
    if dof < 1:
        raise ModelError('identification needs at least one degree of freedom', path='dof')
    found: int = 0
    for joint_index in range(len(model.joints) - 1, -1, -1):
        if model.joints[joint_index].has_axis(JointAxis.PITCH):
            found += 1
            if found == dof:
                return pitch_only(model.subchain(joint_index))
    raise ModelError(f'model too short: {found} pitch joints available, {dof} required', path='joints')


def with_pitch_parameters(model: CableModel, stiffness: Sequence[float], damping: Sequence[float],
                          fill_remaining: bool = False) -> CableModel:
    """
    Writes per-joint pitch stiffness and damping into the model, matched from the distal end.

    The values are given in base-to-tip order of the ``len(stiffness)`` most distal pitch joints. With ``fill_remaining`` every
    other pitch axis receives the mean values.
    """
    if len(stiffness) != len(damping):
        raise ModelError('stiffness and damping must have the same length', path='joints')
    pitch_joints: List[int] = [index for index, joint in enumerate(model.joints) if joint.has_axis(JointAxis.PITCH)]
    if len(pitch_joints) < len(stiffness):
        raise ModelError(f'model has {len(pitch_joints)} pitch joints, {len(stiffness)} values given', path='joints')
    targets: List[int] = pitch_joints[len(pitch_joints) - len(stiffness):]
    joints: List[JointSpec] = list(model.joints)
    for joint_index, k_value, d_value in zip(targets, stiffness, damping):
        joints[joint_index] = joints[joint_index].with_axis_parameters(JointAxis.PITCH, stiffness=k_value, damping=d_value)
    if fill_remaining and len(stiffness) > 0:
        mean_k: float = float(np.mean(stiffness))
        mean_d: float = float(np.mean(damping))
        for joint_index in pitch_joints[:len(pitch_joints) - len(stiffness)]:
            joints[joint_index] = joints[joint_index].with_axis_parameters(JointAxis.PITCH, stiffness=mean_k, damping=mean_d)
    return model.with_joints(joints)
