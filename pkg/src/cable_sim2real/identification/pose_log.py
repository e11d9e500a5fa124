""" This module contains the pose log of fiducial tags and its conversion into joint angles"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass, field
import csv
import json
import logging

import numpy as np
from scipy.spatial.transform import Rotation

from cable_sim2real.errors import PoseLogError
from cable_sim2real.kinematics import FramePose
from cable_sim2real.model.joint import JointAxis

if TYPE_CHECKING:
    from typing import Dict, List, Mapping, Sequence, Tuple
    from pathlib import Path

    from cable_sim2real.model.cable import CableModel

LOG: logging.Logger = logging.getLogger("cable_sim2real.identification.pose_log")

POSE_LOG_HEADER: List[str] = ['t', 'tag_id', 'x', 'y', 'z', 'qx', 'qy', 'qz', 'qw']
ASSOCIATION_WINDOW: float = 0.01
# Largest rotation about the non-pitch axes between consecutive tags
NON_PITCH_LIMIT: float = 0.05


@dataclass(frozen=True)
class TagLayout:
    """
    Placement of the fiducial tags: tag ``tag_ids[i]`` sits in the middle of link ``i`` of the identification chain.

    Attributes:
        tag_ids (Tuple[int, ...]): Tag ids in chain order from the base to the tip.
        spacing (float): Distance between neighbouring tags in meters.
    """
    tag_ids: Tuple[int, ...]
    spacing: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, 'tag_ids', tuple(int(tag_id) for tag_id in self.tag_ids))
        if len(self.tag_ids) < 2:
            raise PoseLogError('a tag layout needs at least two tags')
        if len(set(self.tag_ids)) != len(self.tag_ids):
            raise PoseLogError(f'tag ids must be unique: {list(self.tag_ids)}')
        if not self.spacing > 0:
            raise PoseLogError('tag spacing must be positive')

    @classmethod
    def for_model(cls, model: CableModel, first_id: int | None = None, spacing: float = 0.05) -> TagLayout:
        """
        Layout with one tag per link up to the distal link of the last movable joint. Ids count down towards the tip and end at 1,
        the bench numbering.
        """
        movable = [index for index, joint in enumerate(model.joints) if not joint.is_fixed]
        if not movable:
            raise PoseLogError('model has no movable joint to observe')
        count: int = movable[-1] + 2
        start: int = count if first_id is None else first_id
        return cls(tag_ids=tuple(start - index for index in range(count)), spacing=spacing)


@dataclass(frozen=True, eq=False)
class PoseLog:
    """
    Timestamped tag poses in the world frame.

    Attributes:
        t (np.ndarray): Time of every entry in seconds.
        tag_id (np.ndarray): Tag of every entry.
        translation (np.ndarray): Tag position per entry, meters.
        quaternion (np.ndarray): Tag orientation per entry, unit quaternion (x, y, z, w).
        layout (TagLayout): Declared tags.
    """
    t: np.ndarray
    tag_id: np.ndarray
    translation: np.ndarray
    quaternion: np.ndarray
    layout: TagLayout = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        times = np.asarray(self.t, dtype=float).reshape(-1)
        tags = np.asarray(self.tag_id, dtype=int).reshape(-1)
        translation = np.asarray(self.translation, dtype=float).reshape(-1, 3)
        quaternion = np.asarray(self.quaternion, dtype=float).reshape(-1, 4)
        if not times.size == tags.size == translation.shape[0] == quaternion.shape[0]:
            raise PoseLogError('pose log columns differ in length')
        if self.layout is None:
            raise PoseLogError('pose log needs a tag layout')
        undeclared = set(np.unique(tags).tolist()) - set(self.layout.tag_ids)
        if undeclared:
            raise PoseLogError(f'pose log references undeclared tags {sorted(undeclared)}')
        for tag in self.layout.tag_ids:
            tag_times = times[tags == tag]
            if tag_times.size > 1 and np.any(np.diff(tag_times) <= 0):
                raise PoseLogError(f'timestamps of tag {tag} are not strictly increasing')
        norms = np.linalg.norm(quaternion, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise PoseLogError('pose log contains quaternions that are not unit length')
        object.__setattr__(self, 't', times)
        object.__setattr__(self, 'tag_id', tags)
        object.__setattr__(self, 'translation', translation)
        object.__setattr__(self, 'quaternion', quaternion / norms[:, np.newaxis] if norms.size else quaternion)

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def entries(self) -> List[Tuple[float, int, FramePose]]:
        """All entries as (t, tag id, pose)."""
        return [(float(self.t[index]), int(self.tag_id[index]), FramePose.from_quaternion(self.quaternion[index], self.translation[index]))
                for index in range(len(self))]

    def shifted(self, offset: float) -> PoseLog:
        """The same log with all timestamps shifted by ``offset`` seconds."""
        return PoseLog(t=self.t + offset, tag_id=self.tag_id, translation=self.translation, quaternion=self.quaternion, layout=self.layout)


@dataclass(frozen=True, eq=False)
class FrameSets:
    """
    Tag rotations associated per instant.

    Attributes:
        t (np.ndarray): Time of every instant (mean of the associated entries).
        rotations (np.ndarray): Array (instants, tags, 3, 3) in layout order.
        translations (np.ndarray): Array (instants, tags, 3) in layout order.
    """
    t: np.ndarray
    rotations: np.ndarray
    translations: np.ndarray

    def frames(self, index: int, layout: TagLayout) -> Dict[int, FramePose]:
        """Frames of one instant keyed by tag id."""
        return {tag: FramePose(rotation=self.rotations[index, position], translation=self.translations[index, position])
                for position, tag in enumerate(layout.tag_ids)}


def associate(log: PoseLog, window: float = ASSOCIATION_WINDOW) -> FrameSets:
    """
    Groups time-sorted entries into instants. An instant takes consecutive entries until a tag repeats or an entry lies more
    than ``window`` seconds after its first one. Instants that miss a declared tag are dropped with a warning.

    Raises:
        PoseLogError: if the log is empty or no instant is complete.
    """
    if len(log) == 0:
        raise PoseLogError('pose log is empty')
    order = np.argsort(log.t, kind='stable')
    times, tags = log.t[order], log.tag_id[order]
    rotations = Rotation.from_quat(log.quaternion[order]).as_matrix()
    translations = log.translation[order]
    position_of: Dict[int, int] = {tag: position for position, tag in enumerate(log.layout.tag_ids)}
    tag_count: int = len(log.layout.tag_ids)

    instant_times: List[float] = []
    instant_rotations: List[np.ndarray] = []
    instant_translations: List[np.ndarray] = []
    dropped: int = 0
    start: int = 0
    while start < times.size:
        # an instant ends at the first repeated tag or after the association window
        slots = np.full(tag_count, -1)
        stop: int = start
        while stop < times.size and times[stop] <= times[start] + window:
            slot = position_of[int(tags[stop])]
            if slots[slot] >= 0:
                break
            slots[slot] = stop
            stop += 1
        if np.all(slots >= 0):
            instant_times.append(float(np.mean(times[slots])))
            instant_rotations.append(rotations[slots])
            instant_translations.append(translations[slots])
        else:
            dropped += 1
        start = stop
    if dropped:
        LOG.warning('Dropped %d instants with missing tags from the pose log', dropped)
    if not instant_times:
        raise PoseLogError('no instant of the pose log contains all tags')
    return FrameSets(t=np.array(instant_times), rotations=np.array(instant_rotations), translations=np.array(instant_translations))


def _observed_joints(model: CableModel, layout: TagLayout) -> List[Tuple[int, int]]:
    """(joint index, DOF index) of every pitch DOF, checking that the layout covers it."""
    observed: List[Tuple[int, int]] = []
    for dof_index, (joint_index, axis) in enumerate(model.dof_axes):
        if axis is not JointAxis.PITCH:
            raise PoseLogError('joint angles can only be extracted for pitch-only models')
        if joint_index + 1 >= len(layout.tag_ids):
            raise PoseLogError(f'no tag on link {joint_index + 1} to observe joint {joint_index}')
        observed.append((joint_index, dof_index))
    return observed


def _split_relative(relative: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pitch and the larger of the roll and yaw components of relative rotations."""
    rotvec = Rotation.from_matrix(relative.reshape(-1, 3, 3)).as_rotvec()
    return rotvec[:, 1], np.max(np.abs(rotvec[:, [0, 2]]), axis=1)


def _pitch_from_relative(relative: np.ndarray) -> np.ndarray:
    pitch, off_axis = _split_relative(relative)
    if np.any(off_axis > NON_PITCH_LIMIT):
        raise PoseLogError(f'relative tag rotation has a non-pitch component of {float(np.max(off_axis)):.3f} rad')
    return pitch.reshape(relative.shape[:-2])


def poses_to_joint_angles(frames: Mapping[int, FramePose], model: CableModel, layout: TagLayout) -> np.ndarray:
    """
    Joint angles at one instant: the pitch of the rotation of each tag relative to the tag on the proximal link.

    Raises:
        PoseLogError: if a tag is missing or a relative rotation is dominated by roll or yaw.
    """
    missing = [tag for tag in layout.tag_ids if tag not in frames]
    if missing:
        raise PoseLogError(f'tags {missing} missing at this instant')
    q = np.zeros(model.dof)
    for joint_index, dof_index in _observed_joints(model, layout):
        proximal = frames[layout.tag_ids[joint_index]].rotation
        distal = frames[layout.tag_ids[joint_index + 1]].rotation
        q[dof_index] = float(_pitch_from_relative(proximal.T @ distal))
    return q


def joint_angles(frame_sets: FrameSets, model: CableModel, layout: TagLayout) -> np.ndarray:
    """
    Joint angles of all instants, one row per instant. Tag noise makes single instants leave the pitch plane, so a joint is only
    rejected when the median of its non-pitch component exceeds the limit; the pitch component is kept for every instant.

    Raises:
        PoseLogError: if the relative rotations of a joint are dominated by roll or yaw.
    """
    q = np.zeros((frame_sets.t.size, model.dof))
    for joint_index, dof_index in _observed_joints(model, layout):
        proximal = frame_sets.rotations[:, joint_index]
        distal = frame_sets.rotations[:, joint_index + 1]
        pitch, off_axis = _split_relative(np.swapaxes(proximal, 1, 2) @ distal)
        typical: float = float(np.median(off_axis))
        if typical > NON_PITCH_LIMIT:
            raise PoseLogError(f'joint {joint_index} rotates {typical:.3f} rad about non-pitch axes (median), limit {NON_PITCH_LIMIT} rad')
        outside: int = int(np.count_nonzero(off_axis > NON_PITCH_LIMIT))
        if outside:
            LOG.warning('Joint %d leaves the pitch plane by more than %s rad at %d of %d instants', joint_index, NON_PITCH_LIMIT,
                        outside, off_axis.size)
        q[:, dof_index] = pitch
    return q


def read_tag_layout(path: Path) -> TagLayout:
    """Reads the layout sidecar ``{"tag_ids": [...], "spacing_m": 0.05}``."""
    try:
        with open(path, 'r', encoding='utf-8') as layout_file:
            document = json.load(layout_file)
    except (OSError, json.JSONDecodeError) as err:
        raise PoseLogError(f'{path}: cannot read tag layout: {err}') from err
    if not isinstance(document, dict) or 'tag_ids' not in document:
        raise PoseLogError(f'{path}: tag layout needs "tag_ids"')
    unknown = set(document) - {'tag_ids', 'spacing_m'}
    if unknown:
        raise PoseLogError(f'{path}: unknown keys {sorted(unknown)} in tag layout')
    return TagLayout(tag_ids=tuple(document['tag_ids']), spacing=float(document.get('spacing_m', 0.05)))


def write_tag_layout(layout: TagLayout, path: Path) -> None:
    """Writes the layout sidecar."""
    with open(path, 'w', encoding='utf-8') as layout_file:
        json.dump({'tag_ids': list(layout.tag_ids), 'spacing_m': layout.spacing}, layout_file, indent=4)


def read_pose_log_csv(path: Path, layout: TagLayout) -> PoseLog:
    """
    Reads a pose log CSV with the columns ``t,tag_id,x,y,z,qx,qy,qz,qw``.

    Raises:
        PoseLogError: for a missing file, a wrong header or unparsable values.
    """
    try:
        with open(path, 'r', encoding='utf-8', newline='') as csv_file:
            rows = list(csv.reader(csv_file))
    except OSError as err:
        raise PoseLogError(f'{path}: cannot read pose log: {err.strerror}') from err
    if not rows or [column.strip() for column in rows[0]] != POSE_LOG_HEADER:
        raise PoseLogError(f'{path}: expected header {",".join(POSE_LOG_HEADER)}')
    try:
        data = np.array([[float(value) for value in row] for row in rows[1:] if row], dtype=float).reshape(-1, len(POSE_LOG_HEADER))
    except ValueError as err:
        raise PoseLogError(f'{path}: {err}') from err
    return PoseLog(t=data[:, 0], tag_id=data[:, 1].astype(int), translation=data[:, 2:5], quaternion=data[:, 5:9], layout=layout)


def write_pose_log_csv(log: PoseLog, path: Path) -> None:
    """Writes a pose log CSV."""
    with open(path, 'w', encoding='utf-8', newline='') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(POSE_LOG_HEADER)
        for index in range(len(log)):
            writer.writerow([f'{log.t[index]:.9f}', int(log.tag_id[index])]
                            + [f'{value:.12g}' for value in np.concatenate([log.translation[index], log.quaternion[index]])])


def pose_log_from_frames(times: Sequence[float], frames: Sequence[Mapping[int, FramePose]], layout: TagLayout) -> PoseLog:
    """Builds a log from per-instant frame dictionaries."""
    t: List[float] = []
    tags: List[int] = []
    translations: List[np.ndarray] = []
    quaternions: List[np.ndarray] = []
    for time, instant in zip(times, frames):
        for tag, pose in instant.items():
            t.append(float(time))
            tags.append(int(tag))
            translations.append(pose.translation)
            quaternions.append(pose.quaternion)
    return PoseLog(t=np.array(t), tag_id=np.array(tags, dtype=int), translation=np.array(translations).reshape(-1, 3),
                   quaternion=np.array(quaternions).reshape(-1, 4), layout=layout)
