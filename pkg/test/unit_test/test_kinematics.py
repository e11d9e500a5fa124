"""Tests of forward kinematics, Jacobians and frames."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from cable_sim2real.errors import DimensionError, KinematicsError
from cable_sim2real.kinematics import FramePose, forward_kinematics, jacobian, point_on_chain, tag_frames, tip_sagging_angle
from cable_sim2real.model import default_bench_model, fix_link


def test_straight_chain_points_along_x(chain):
    frames = forward_kinematics(chain, np.zeros(4))
    assert frames.tip.translation == pytest.approx([0.3, 0.0, 0.0])
    assert frames.links[1].translation == pytest.approx([0.0, 0.0, 0.0])
    assert frames.coms[1].translation == pytest.approx([0.025, 0.0, 0.0])
    assert frames.joints[0] is frames.links[1]
    assert np.allclose(frames.tip.rotation, np.eye(3))


def test_positive_pitch_sags_down(chain):
    tip = point_on_chain(chain, [0.3, 0.0, 0.0, 0.0])
    assert tip == pytest.approx([0.3 * math.cos(0.3), 0.0, -0.3 * math.sin(0.3)])


def test_point_on_chain_checks_the_offset(chain):
    assert point_on_chain(chain, np.zeros(4), link=1, offset=0.02) == pytest.approx([0.02, 0.0, 0.0])
    with pytest.raises(KinematicsError):
        point_on_chain(chain, np.zeros(4), link=1, offset=0.06)
    with pytest.raises(KinematicsError):
        point_on_chain(chain, np.zeros(4), link=6)
    with pytest.raises(DimensionError):
        point_on_chain(chain, np.zeros(3))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=-0.75, max_value=0.75), min_size=4, max_size=4))
def test_sagging_angle_is_the_pitch_sum(q):
    chain = fix_link(default_bench_model(), 5)
    full = np.zeros(chain.dof)
    full[0::2] = q
    assert tip_sagging_angle(chain, full) == pytest.approx(sum(q), abs=1e-12)


def test_sagging_angle_beyond_half_turn():
    chain = fix_link(default_bench_model(), 5)
    full = np.zeros(chain.dof)
    full[0::2] = 0.9
    assert tip_sagging_angle(chain, full) == pytest.approx(3.6, abs=1e-12)
    expected = Rotation.from_rotvec([0.0, 3.6, 0.0]).as_matrix()
    assert forward_kinematics(chain, full).tip.rotation == pytest.approx(expected, abs=1e-12)


def test_sagging_angle_rejects_roll(bench_model):
    chain = fix_link(bench_model, 5)
    q = np.zeros(chain.dof)
    q[1] = 0.1
    with pytest.raises(KinematicsError):
        tip_sagging_angle(chain, q)


def _finite_difference(model, q, h=1e-7):
    columns = []
    base = forward_kinematics(model, q).tip
    for index in range(q.size):
        moved = q.copy()
        moved[index] += h
        tip = forward_kinematics(model, moved).tip
        linear = (tip.translation - base.translation) / h
        angular = Rotation.from_matrix(tip.rotation @ base.rotation.T).as_rotvec() / h
        columns.append(np.concatenate([linear, angular]))
    return np.array(columns).T


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=8, max_size=8))
def test_jacobian_matches_finite_differences(q):
    model = fix_link(default_bench_model(), 5)
    vector = np.array(q)
    assert np.allclose(jacobian(model, vector), _finite_difference(model, vector), atol=1e-5)


def test_jacobian_ignores_distal_joints(chain):
    result = jacobian(chain, [0.2, 0.1, 0.3, 0.4], link=2, offset=0.01)
    assert np.all(result[:, 2:] == 0.0)
    assert np.any(result[:, :2] != 0.0)
    # pitch axes stay parallel to y
    assert np.allclose(result[3:, :2], [[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]])


def test_frame_pose_algebra():
    frame = FramePose.from_rotvec([0.1, -0.4, 0.3], [0.2, 0.0, -0.1])
    assert frame.compose(frame.inverse()).is_close(FramePose.identity())
    assert frame.transform_point(frame.inverse().transform_point([1.0, 2.0, 3.0])) == pytest.approx([1.0, 2.0, 3.0])
    rebuilt = FramePose.from_quaternion(frame.quaternion, frame.translation)
    assert rebuilt.is_close(frame)
    assert frame.quaternion[3] >= 0.0


def test_frame_pose_validation():
    with pytest.raises(KinematicsError):
        FramePose(rotation=np.diag([1.0, 1.0, -1.0]), translation=np.zeros(3))
    with pytest.raises(KinematicsError):
        FramePose.from_quaternion([0.0, 0.0, 0.0, 2.0], np.zeros(3))
    with pytest.raises(DimensionError):
        FramePose(rotation=np.eye(3), translation=np.zeros(2))


def test_tag_frames_sit_mid_link(chain):
    frames = tag_frames(chain, np.zeros(4), [5, 4, 3, 2, 1])
    assert list(frames) == [5, 4, 3, 2, 1]
    assert frames[5].translation == pytest.approx([-0.025, 0.0, 0.0])
    assert frames[1].translation == pytest.approx([0.175, 0.0, 0.0])
    with pytest.raises(KinematicsError):
        tag_frames(chain, np.zeros(4), list(range(7)))
