"""Tests of pose log handling, differentiation and stiffness and damping identification."""
import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from cable_sim2real.errors import DimensionError, IdentificationError, ModelError, PoseLogError
from cable_sim2real.identification import IdentificationSettings, PoseLog, StateSample, TagLayout, associate, differentiate_log, \
    identify_damping, identify_from_samples, identify_stiffness, joint_angles, jointwise_least_squares, noise_study, \
    poses_to_joint_angles, read_pose_log_csv, read_tag_layout, run_identification, split_samples, synthesize_pose_log, update_model, \
    velocity_thresholds, write_pose_log_csv, write_tag_layout
from cable_sim2real.identification.differentiation import kernel_gains, moving_average, resample
from cable_sim2real.identification.pose_log import pose_log_from_frames
from cable_sim2real.identification.synthetic import add_pose_noise
from cable_sim2real.kinematics import FramePose, tag_frames
from cable_sim2real.model import ChainState, JointAxis, default_bench_model, identification_subchain
from cable_sim2real.simulation import is_stable


@pytest.fixture
def layout(chain):
    return TagLayout.for_model(chain)


def test_layout_for_identification_chain(chain, layout):
    assert layout.tag_ids == (5, 4, 3, 2, 1)
    assert layout.spacing == 0.05
    with pytest.raises(PoseLogError):
        TagLayout(tag_ids=(1, 1))
    with pytest.raises(PoseLogError):
        TagLayout(tag_ids=(1,))


def test_layout_file(tmp_path, layout):
    path = tmp_path / 'layout.json'
    write_tag_layout(layout, path)
    assert read_tag_layout(path) == layout
    path.write_text(json.dumps({'tag_ids': [2, 1], 'color': 'red'}), encoding='utf-8')
    with pytest.raises(PoseLogError, match='unknown keys'):
        read_tag_layout(path)


def test_joint_angles_from_tag_frames(chain, layout):
    q = np.array([0.2, -0.1, 0.35, 0.05])
    frames = tag_frames(chain, q, layout.tag_ids)
    assert poses_to_joint_angles(frames, chain, layout) == pytest.approx(q, abs=1e-12)
    del frames[3]
    with pytest.raises(PoseLogError, match='missing'):
        poses_to_joint_angles(frames, chain, layout)


def test_joint_angles_reject_roll(chain, layout):
    frames = tag_frames(chain, np.zeros(4), layout.tag_ids)
    rolled = FramePose.from_quaternion([np.sin(0.1), 0.0, 0.0, np.cos(0.1)], frames[1].translation)
    frames[1] = FramePose(rotation=frames[2].rotation @ rolled.rotation, translation=frames[1].translation)
    with pytest.raises(PoseLogError, match='non-pitch'):
        poses_to_joint_angles(frames, chain, layout)


def _rolled(frames, tag, angle):
    roll = Rotation.from_rotvec([angle, 0.0, 0.0]).as_matrix()
    rolled = dict(frames)
    rolled[tag] = FramePose(rotation=frames[tag].rotation @ roll, translation=frames[tag].translation)
    return rolled


def test_joint_angles_tolerate_single_rolled_instants(chain, layout, caplog):
    level = tag_frames(chain, np.zeros(4), layout.tag_ids)
    frames = [level, level, _rolled(level, layout.tag_ids[2], 0.1), level, level]
    angles = joint_angles(associate(pose_log_from_frames(np.arange(5) * 0.01, frames, layout)), chain, layout)
    assert angles == pytest.approx(np.zeros((5, 4)), abs=1e-12)
    assert 'leaves the pitch plane' in caplog.text


def test_joint_angles_reject_rolled_joint(chain, layout):
    level = tag_frames(chain, np.zeros(4), layout.tag_ids)
    frames = [_rolled(level, layout.tag_ids[2], 0.1)] * 5
    with pytest.raises(PoseLogError, match='median'):
        joint_angles(associate(pose_log_from_frames(np.arange(5) * 0.01, frames, layout)), chain, layout)


def test_association_drops_incomplete_instants(chain, layout, caplog):
    trajectory = [np.full(4, 0.1 * index) for index in range(3)]
    frames = [tag_frames(chain, q, layout.tag_ids) for q in trajectory]
    del frames[1][2]
    log = pose_log_from_frames([0.0, 0.1, 0.2], frames, layout)
    frame_sets = associate(log)
    assert frame_sets.t == pytest.approx([0.0, 0.2])
    assert 'Dropped 1 instants' in caplog.text
    angles = joint_angles(frame_sets, chain, layout)
    assert angles[1] == pytest.approx(trajectory[2], abs=1e-12)


def test_pose_log_validation(layout):
    identity = [0.0, 0.0, 0.0, 1.0]
    with pytest.raises(PoseLogError, match='undeclared'):
        PoseLog(t=[0.0], tag_id=[9], translation=[[0.0, 0.0, 0.0]], quaternion=[identity], layout=layout)
    with pytest.raises(PoseLogError, match='unit length'):
        PoseLog(t=[0.0], tag_id=[1], translation=[[0.0, 0.0, 0.0]], quaternion=[[0.0, 0.0, 0.0, 2.0]], layout=layout)
    with pytest.raises(PoseLogError, match='strictly increasing'):
        PoseLog(t=[0.1, 0.1], tag_id=[1, 1], translation=np.zeros((2, 3)), quaternion=[identity, identity], layout=layout)
    with pytest.raises(PoseLogError, match='empty'):
        associate(PoseLog(t=[], tag_id=[], translation=np.zeros((0, 3)), quaternion=np.zeros((0, 4)), layout=layout))


def test_pose_log_csv(tmp_path, chain, layout):
    frames = [tag_frames(chain, np.full(4, 0.05 * index), layout.tag_ids) for index in range(4)]
    log = pose_log_from_frames([0.0, 0.01, 0.02, 0.03], frames, layout)
    path = tmp_path / 'poses.csv'
    write_pose_log_csv(log, path)
    assert path.read_text(encoding='utf-8').splitlines()[0] == 't,tag_id,x,y,z,qx,qy,qz,qw'
    loaded = read_pose_log_csv(path, layout)
    assert len(loaded) == 20
    assert joint_angles(associate(loaded), chain, layout)[3] == pytest.approx(np.full(4, 0.15), abs=1e-9)
    path.write_text('time,tag\n0,1\n', encoding='utf-8')
    with pytest.raises(PoseLogError, match='header'):
        read_pose_log_csv(path, layout)
    with pytest.raises(PoseLogError, match='cannot read'):
        read_pose_log_csv(tmp_path / 'missing.csv', layout)


def test_ramp_differentiation():
    times = np.arange(100) * 0.01
    positions = np.column_stack([0.3 * times, -0.2 * times + 0.1])
    samples = differentiate_log(times, positions, window=5, dt=0.01)
    assert len(samples) == 100
    reliable = [sample for sample in samples if sample.reliable]
    assert len(reliable) == 100 - 2 * 3
    for sample in reliable:
        assert sample.state.qd == pytest.approx([0.3, -0.2], abs=1e-12)
        assert sample.state.qdd == pytest.approx([0.0, 0.0], abs=1e-9)
        assert sample.quality == pytest.approx([0.0, 0.0], abs=1e-12)
    assert samples[0].velocity_noise == pytest.approx([0.0, 0.0], abs=1e-9)


def test_two_pass_differentiation():
    times = np.arange(100) * 0.01
    samples = differentiate_log(times, 0.3 * times, window=5, dt=0.01, passes=2)
    reliable = [sample for sample in samples if sample.reliable]
    assert len(reliable) == 100 - 2 * 5
    assert reliable[0].t == pytest.approx(0.05)
    for sample in reliable:
        assert sample.state.qd == pytest.approx([0.3], abs=1e-12)
    with pytest.raises(PoseLogError, match='at least one pass'):
        differentiate_log(times, times, passes=0)


def test_gaps_are_not_reliable():
    times = np.concatenate([np.arange(100) * 0.01, 1.5 + np.arange(100) * 0.01])
    samples = differentiate_log(times, 0.3 * times, window=5, dt=0.01)
    assert all(not sample.reliable for sample in samples if 0.965 < sample.t < 1.525)
    assert all(sample.reliable for sample in samples if 0.03 < sample.t < 0.95 or 1.56 < sample.t < 2.45)


def test_kernel_gains():
    assert kernel_gains(5, 1, 1.0) == pytest.approx((np.sqrt(0.8), 0.2))
    residual_gain, velocity_gain = kernel_gains(5, 1, 0.01)
    assert residual_gain == pytest.approx(np.sqrt(0.8))
    assert velocity_gain == pytest.approx(20.0)


def test_velocity_noise_estimate():
    generator = np.random.default_rng(8)
    times = np.arange(20000) * 0.01
    samples = differentiate_log(times, generator.normal(0.0, 1e-3, (20000, 1)), window=15, dt=0.01, passes=2)
    velocities = np.array([sample.state.qd[0] for sample in samples if sample.reliable])
    assert samples[0].velocity_noise[0] == pytest.approx(float(np.std(velocities)), rel=0.1)


def test_moving_average_and_resampling():
    assert moving_average(np.array([1.0, 2.0, 3.0]), 3) == pytest.approx([4.0 / 3.0, 2.0, 8.0 / 3.0])
    with pytest.raises(PoseLogError):
        moving_average(np.zeros(5), 4)
    grid, values = resample([0.0, 0.1, 0.3, 0.4, 0.6, 0.7], np.arange(6.0), dt=0.1)
    assert grid == pytest.approx(np.arange(8) * 0.1)
    assert values[2, 0] == pytest.approx(1.5)
    with pytest.raises(PoseLogError, match='at least'):
        resample([0.0, 0.1], [0.0, 1.0])
    with pytest.raises(PoseLogError, match='increase'):
        resample([0.0, 0.1, 0.1, 0.2, 0.3], np.zeros(5))


def _sample(time, velocity, reliable=True, noise=None):
    return StateSample(t=time, state=ChainState(q=[0.1], qd=[velocity], qdd=[0.0]), quality=np.zeros(1), reliable=reliable,
                       velocity_noise=None if noise is None else np.array([noise]))


def test_split_samples():
    samples = [_sample(0.01 * index, 0.1) for index in range(50)] + [_sample(0.01 * index, 0.0) for index in range(50, 150)]
    static, dynamic = split_samples(samples)
    assert len(static) == 100
    assert len(dynamic) == 50
    with pytest.raises(PoseLogError, match='stationary tail'):
        split_samples(samples[:70])


def test_split_samples_stop_at_unreliable_samples():
    samples = [_sample(0.01 * index, 0.1) for index in range(50)]
    samples += [_sample(0.01 * index, 0.0, reliable=index != 80 and index < 147) for index in range(50, 150)]
    static, dynamic = split_samples(samples)
    assert [sample.t for sample in static] == pytest.approx([0.01 * index for index in range(81, 147)])
    assert len(dynamic) == 50


def test_velocity_thresholds():
    samples = [_sample(0.0, 0.0, noise=0.01)]
    assert velocity_thresholds(samples, 1e-3) == pytest.approx([1e-3])
    assert velocity_thresholds(samples, 1e-3, noise_floor_factor=5.0) == pytest.approx([0.05])
    assert velocity_thresholds(samples, 0.2, noise_floor_factor=5.0) == pytest.approx([0.2])
    assert velocity_thresholds([_sample(0.0, 0.0)], 1e-3, noise_floor_factor=5.0) == pytest.approx([1e-3])
    with pytest.raises(PoseLogError):
        velocity_thresholds([], 1e-3)


def test_split_samples_above_the_noise_floor():
    samples = [_sample(0.01 * index, 0.5, noise=0.01) for index in range(50)]
    samples += [_sample(0.01 * index, 0.02 * (-1) ** index, noise=0.01) for index in range(50, 150)]
    with pytest.raises(PoseLogError, match='stationary tail'):
        split_samples(samples)
    static, dynamic = split_samples(samples, noise_floor_factor=5.0)
    assert len(static) == 100
    assert len(dynamic) == 50


def test_pose_noise(chain, layout):
    frames = [tag_frames(chain, np.full(4, 0.02 * index), layout.tag_ids) for index in range(40)]
    log = pose_log_from_frames(np.arange(40) * 0.01, frames, layout)
    assert add_pose_noise(log) is log
    with pytest.raises(ModelError):
        add_pose_noise(log, position_noise=-1.0)
    noisy = add_pose_noise(log, 1e-3, 0.01, seed=4)
    assert np.std(noisy.translation - log.translation) == pytest.approx(1e-3, rel=0.2)
    assert np.array_equal(add_pose_noise(log, 1e-3, 0.01, seed=4).translation, noisy.translation)
    angles = (Rotation.from_quat(noisy.quaternion) * Rotation.from_quat(log.quaternion).inv()).magnitude()
    assert 0.005 < float(np.median(angles)) < 0.03
    assert np.array_equal(noisy.t, log.t)


def test_jointwise_least_squares():
    generator = np.random.default_rng(3)
    regressor = generator.normal(size=(30, 2))
    estimate = jointwise_least_squares(regressor, regressor * [2.0, 3.0])
    assert estimate.values == pytest.approx([2.0, 3.0])
    assert estimate.residual == pytest.approx(0.0, abs=1e-12)
    assert estimate.samples == 30
    regressor[:, 1] = 0.0
    with pytest.raises(IdentificationError, match='rank-deficient'):
        jointwise_least_squares(regressor, regressor)
    with pytest.raises(DimensionError):
        jointwise_least_squares(np.zeros((3, 2)), np.zeros((3, 1)))


def test_stage_preconditions(chain):
    moving = [StateSample(t=0.0, state=ChainState(q=np.full(4, 0.1), qd=np.full(4, 0.5)), quality=np.zeros(4))]
    with pytest.raises(IdentificationError, match='move'):
        identify_stiffness(chain, moving)
    with pytest.raises(IdentificationError):
        identify_stiffness(chain, [])
    resting = [StateSample(t=0.0, state=ChainState(q=np.full(4, 0.1)), quality=np.zeros(4))]
    with pytest.raises(IdentificationError, match='static'):
        identify_damping(chain, [0.5] * 4, resting)


def test_identification_round_trip():
    model = identification_subchain(default_bench_model())
    experiment = synthesize_pose_log(model, 0.5, 0.1, tip_mass=0.1)
    params = run_identification(model, experiment.log, experiment.loads, IdentificationSettings())
    assert params.stiffness == pytest.approx(np.full(4, 0.5), rel=1e-6)
    assert params.damping == pytest.approx(np.full(4, 0.1), rel=0.05)
    assert params.static_samples > 500
    assert params.dynamic_samples > 0
    assert params.model.joints[0].stiffness == pytest.approx((params.stiffness[0],))


def test_identification_without_tail():
    model = identification_subchain(default_bench_model())
    experiment = synthesize_pose_log(model, 0.5, 0.1, tip_mass=0.1, duration=0.3, rest_duration=0.0)
    assert experiment.rest is None
    with pytest.raises(PoseLogError, match='stationary tail'):
        run_identification(model, experiment.log, experiment.loads)


def test_identification_from_samples_per_joint():
    model = identification_subchain(default_bench_model())
    experiment = synthesize_pose_log(model, [0.4, 0.5, 0.6, 0.7], 0.1, tip_mass=0.05, duration=5.0)
    trajectory = experiment.trajectory
    samples = differentiate_log(trajectory.t[::10], trajectory.q[::10])
    params = identify_from_samples(model, samples, experiment.loads)
    assert params.stiffness == pytest.approx([0.4, 0.5, 0.6, 0.7], rel=1e-4)


def test_update_model(bench_model):
    model = identification_subchain(bench_model)
    experiment = synthesize_pose_log(model, 0.5, 0.1, duration=5.0, record_every=5)
    params = run_identification(model, experiment.log, experiment.loads)
    updated = update_model(bench_model, params, fill_remaining=True)
    pitch = [joint for joint in updated.joints if joint.has_axis(JointAxis.PITCH)]
    distal = [joint.stiffness[joint.axes.index(JointAxis.PITCH)] for joint in pitch[-4:]]
    assert distal == pytest.approx(list(params.stiffness))
    proximal = pitch[0].stiffness[pitch[0].axes.index(JointAxis.PITCH)]
    assert proximal == pytest.approx(float(np.mean(params.stiffness)))


@pytest.mark.slow
def test_noise_study():
    model = identification_subchain(default_bench_model())
    result = noise_study(model, 0.5, 0.1, seeds=range(10), jobs=2)
    assert result.median_stiffness_error < 0.1
    assert result.median_damping_error < 0.25
    assert len(result.stiffness_errors) == 10


def test_weak_chain_rests_under_the_weight():
    model = identification_subchain(default_bench_model())
    experiment = synthesize_pose_log(model, 0.1, 0.1, record_every=10)
    assert is_stable(experiment.model, experiment.rest, experiment.loads)
    frame_sets = associate(experiment.log)
    assert joint_angles(frame_sets, model, TagLayout.for_model(model))[-1] == pytest.approx(experiment.rest, abs=1e-9)
    assert float(np.max(np.diff(frame_sets.t))) == pytest.approx(0.5)
    assert frame_sets.t[-1] - frame_sets.t[0] == pytest.approx(3.5)


@pytest.mark.slow
def test_identification_at_the_weak_end():
    model = identification_subchain(default_bench_model())
    experiment = synthesize_pose_log(model, 0.1, 0.05, tip_mass=0.1)
    params = run_identification(model, experiment.log, experiment.loads)
    assert params.stiffness == pytest.approx(np.full(4, 0.1), rel=1e-6)
    assert params.damping == pytest.approx(np.full(4, 0.05), rel=0.05)
