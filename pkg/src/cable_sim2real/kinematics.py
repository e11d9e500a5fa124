""" This module contains forward kinematics, geometric Jacobians and the sagging angle of the chain"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass
import logging

import numpy as np
from scipy.spatial.transform import Rotation

from cable_sim2real.errors import DimensionError, KinematicsError
from cable_sim2real.model.joint import JointAxis

if TYPE_CHECKING:
    from typing import Dict, List, Optional, Sequence, Tuple

    from cable_sim2real.model.cable import CableModel

LOG: logging.Logger = logging.getLogger("cable_sim2real.kinematics")

ORTHONORMAL_TOLERANCE: float = 1e-9
# Largest non-pitch rotation (rad) accepted when a planar angle is extracted
PLANAR_TOLERANCE: float = 1e-9


@dataclass(frozen=True, eq=False)
class FramePose:
    """
    Rigid transform of a frame expressed in the world frame.

    Attributes:
        rotation (np.ndarray): 3x3 orthonormal matrix with determinant +1.
        translation (np.ndarray): Origin of the frame in meters.
    """
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=float)
        translation = np.array(self.translation, dtype=float).reshape(-1)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise DimensionError('a frame needs a 3x3 rotation and a 3-vector translation')
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > ORTHONORMAL_TOLERANCE \
                or abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOLERANCE:
            raise KinematicsError('rotation is not orthonormal with determinant +1')
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)

    @classmethod
    def identity(cls) -> FramePose:
        """The world frame."""
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    @classmethod
    def from_quaternion(cls, quaternion: Sequence[float], translation: Sequence[float]) -> FramePose:
        """Builds a frame from a unit quaternion in (x, y, z, w) order."""
        quat = np.asarray(quaternion, dtype=float)
        norm: float = float(np.linalg.norm(quat))
        if quat.shape != (4,) or not np.isfinite(norm) or abs(norm - 1.0) > 1e-6:
            raise KinematicsError(f'quaternion {list(quat)} is not a unit quaternion')
        return cls(rotation=Rotation.from_quat(quat / norm).as_matrix(), translation=translation)

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float], translation: Sequence[float]) -> FramePose:
        """Builds a frame from a rotation vector in rad."""
        return cls(rotation=Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix(), translation=translation)

    @property
    def quaternion(self) -> np.ndarray:
        """Rotation as unit quaternion (x, y, z, w) with non-negative w."""
        quat = Rotation.from_matrix(self.rotation).as_quat()
        return -quat if quat[3] < 0 else quat

    def compose(self, other: FramePose) -> FramePose:
        """Returns ``self * other``: ``other`` expressed relative to this frame, mapped into the world."""
        return FramePose(rotation=self.rotation @ other.rotation, translation=self.translation + self.rotation @ other.translation)

    def inverse(self) -> FramePose:
        """Inverse transform."""
        return FramePose(rotation=self.rotation.T, translation=-self.rotation.T @ self.translation)

    def transform_point(self, point: Sequence[float]) -> np.ndarray:
        """Maps a point given in this frame into the world frame."""
        return self.translation + self.rotation @ np.asarray(point, dtype=float)

    def is_close(self, other: FramePose, tolerance: float = 1e-9) -> bool:
        """Element-wise comparison of rotation and translation."""
        return bool(np.allclose(self.rotation, other.rotation, atol=tolerance, rtol=0.0)
                    and np.allclose(self.translation, other.translation, atol=tolerance, rtol=0.0))


@dataclass(frozen=True)
class ChainFrames:
    """
    Result of forward kinematics, all frames in world coordinates.

    Attributes:
        links (List[FramePose]): Frame of every link at its proximal end, x along the link.
        joints (List[FramePose]): Frame of the distal link of every joint, located at the joint.
        coms (List[FramePose]): Frame of every link at its center of mass.
        tip (FramePose): Frame at the distal end of the last link.
    """
    links: List[FramePose]
    joints: List[FramePose]
    coms: List[FramePose]
    tip: FramePose


def axis_rotation(axis: JointAxis, angle: np.ndarray) -> np.ndarray:
    """Rotation matrices about a joint axis for an array of angles, shape ``angle.shape + (3, 3)``."""
    angle = np.asarray(angle, dtype=float)
    cos, sin = np.cos(angle), np.sin(angle)
    one, zero = np.ones_like(angle), np.zeros_like(angle)
    if axis is JointAxis.PITCH:
        rows = [[cos, zero, sin], [zero, one, zero], [-sin, zero, cos]]
    else:
        rows = [[one, zero, zero], [zero, cos, -sin], [zero, sin, cos]]
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def check_joint_vector(model: CableModel, q: Sequence[float]) -> np.ndarray:
    """
    Returns ``q`` as float array.

    Raises:
        DimensionError: if its length differs from the model DOF count.
    """
    vector = np.asarray(q, dtype=float).reshape(-1)
    if vector.size != model.dof:
        raise DimensionError(f'joint vector has dimension {vector.size}, model has {model.dof} DOF')
    return vector


def _link_transforms(model: CableModel, q: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray], List[List[np.ndarray]]]:
    """Rotations and origins of all links plus the world axis of every DOF, grouped by joint."""
    rotations: List[np.ndarray] = [np.eye(3)]
    origins: List[np.ndarray] = [np.array([-model.links[0].length, 0.0, 0.0])]
    axes: List[List[np.ndarray]] = []
    index: int = 0
    for joint_index, joint in enumerate(model.joints):
        rotation = rotations[-1]
        origins.append(origins[-1] + rotation[:, 0] * model.links[joint_index].length)
        joint_axes: List[np.ndarray] = []
        for axis in joint.axes:
            joint_axes.append(rotation @ axis.unit_vector)
            rotation = rotation @ axis_rotation(axis, q[index])
            index += 1
        axes.append(joint_axes)
        rotations.append(rotation)
    return rotations, origins, axes


def forward_kinematics(model: CableModel, q: Sequence[float]) -> ChainFrames:
    """
    Computes the world frames of all joints, link centers of mass and the tip.

    Raises:
        DimensionError: if ``q`` does not match the model.
    """
    vector: np.ndarray = check_joint_vector(model, q)
    rotations, origins, _ = _link_transforms(model, vector)
    links: List[FramePose] = [FramePose(rotation=rotation, translation=origin) for rotation, origin in zip(rotations, origins)]
    coms: List[FramePose] = [FramePose(rotation=rotation, translation=origin + rotation[:, 0] * link.com_offset)
                             for rotation, origin, link in zip(rotations, origins, model.links)]
    tip = FramePose(rotation=rotations[-1], translation=origins[-1] + rotations[-1][:, 0] * model.links[-1].length)
    return ChainFrames(links=links, joints=links[1:], coms=coms, tip=tip)


def point_on_chain(model: CableModel, q: Sequence[float], link: int = -1, offset: Optional[float] = None) -> np.ndarray:
    """World position of the point ``offset`` meters along link ``link`` (default: the tip)."""
    link_index, offset_m = _resolve_point(model, link, offset)
    frames: ChainFrames = forward_kinematics(model, q)
    return frames.links[link_index].transform_point((offset_m, 0.0, 0.0))


def _resolve_point(model: CableModel, link: int, offset: Optional[float]) -> Tuple[int, float]:
    link_index: int = link + len(model.links) if link < 0 else link
    if not 0 <= link_index < len(model.links):
        raise KinematicsError(f'link {link} is not part of the chain')
    offset_m: float = model.links[link_index].length if offset is None else float(offset)
    if not 0.0 <= offset_m <= model.links[link_index].length:
        raise KinematicsError(f'offset {offset_m} m is off link {link_index} of length {model.links[link_index].length} m')
    return link_index, offset_m


def jacobian(model: CableModel, q: Sequence[float], link: int = -1, offset: Optional[float] = None) -> np.ndarray:
    """
    Geometric Jacobian of a point on the chain.

    Args:
        model (CableModel): The chain.
        q (Sequence[float]): Joint positions.
        link (int): Index into ``model.links``, negative values count from the tip.
        offset (float, optional): Distance along the link from its proximal end, defaults to the link length.

    Returns:
        np.ndarray: 6 x n matrix mapping joint velocities to (linear; angular) velocity in world coordinates.

    Raises:
        DimensionError: if ``q`` does not match the model.
        KinematicsError: if the point is not on the chain.
    """
    vector: np.ndarray = check_joint_vector(model, q)
    link_index, offset_m = _resolve_point(model, link, offset)
    rotations, origins, axes = _link_transforms(model, vector)
    point: np.ndarray = origins[link_index] + rotations[link_index][:, 0] * offset_m
    result = np.zeros((6, model.dof))
    column: int = 0
    for joint_index, joint_axes in enumerate(axes):
        for axis in joint_axes:
            # joint j only moves links j + 1 and beyond
            if joint_index + 1 <= link_index:
                result[:3, column] = np.cross(axis, point - origins[joint_index + 1])
                result[3:, column] = axis
            column += 1
    return result


def tip_sagging_angle(model: CableModel, q: Sequence[float]) -> float:
    """
    Total pitch rotation of the tip frame relative to the base frame, sagging downward is positive.

    With every roll at zero all pitch axes stay parallel, so the angle is the sum of the pitch coordinates and does not wrap at pi.

    Raises:
        KinematicsError: if roll is non-zero and the configuration is not planar.
    """
    vector: np.ndarray = check_joint_vector(model, q)
    pitch: float = 0.0
    for index, (_, axis) in enumerate(model.dof_axes):
        if axis is JointAxis.ROLL and abs(vector[index]) > PLANAR_TOLERANCE:
            raise KinematicsError(f'configuration is not planar: roll q[{index}] = {vector[index]:.6g} rad')
        if axis is JointAxis.PITCH:
            pitch += float(vector[index])
    return pitch


def tag_frames(model: CableModel, q: Sequence[float], tag_ids: Sequence[int]) -> Dict[int, FramePose]:
    """
    Frames of fiducial tags fixed at the middle of consecutive links starting at the base link, oriented like the link.
    """
    if len(tag_ids) > len(model.links):
        raise KinematicsError(f'{len(tag_ids)} tags do not fit on {len(model.links)} links')
    frames: ChainFrames = forward_kinematics(model, q)
    return {tag_id: FramePose(rotation=frames.links[index].rotation,
                              translation=frames.links[index].transform_point((model.links[index].length / 2.0, 0.0, 0.0)))
            for index, tag_id in enumerate(tag_ids)}
