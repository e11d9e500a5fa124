""" This module reproduces the weight-drop experiment in simulation and runs noise studies on the identification pipeline"""
from __future__ import annotations
from typing import TYPE_CHECKING

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.spatial.transform import Rotation

from cable_sim2real.errors import CableSim2RealError, ModelError
from cable_sim2real.identification.differentiation import split_samples, velocity_thresholds
from cable_sim2real.identification.estimator import IdentificationSettings, identify_from_samples, identify_stiffness, log_to_samples
from cable_sim2real.identification.pose_log import PoseLog, TagLayout
from cable_sim2real.kinematics import tag_frames
from cable_sim2real.model.cable import with_pitch_parameters
from cable_sim2real.model.joint import JointAxis
from cable_sim2real.model.state import ChainState, tip_weight
from cable_sim2real.simulation import simulate, static_equilibrium

if TYPE_CHECKING:
    from typing import List, Optional, Sequence, Tuple

    from cable_sim2real.model.cable import CableModel
    from cable_sim2real.model.state import ExternalLoad
    from cable_sim2real.simulation import Trajectory

LOG: logging.Logger = logging.getLogger("cable_sim2real.identification.synthetic")

# Static torque residual in N*m of the recorded rest
REST_TOLERANCE: float = 1e-11
# Pipeline settings for pose logs at 100 Hz with bench camera noise
NOISY_SETTINGS: IdentificationSettings = IdentificationSettings(window=15, smoothing_passes=2, noise_floor_factor=5.0)


@dataclass(frozen=True, eq=False)
class SyntheticExperiment:
    """
    A simulated weight-drop experiment.

    Attributes:
        log (PoseLog): Recorded tag poses.
        loads (Tuple[ExternalLoad, ...]): Loads acting from t = 0 on.
        trajectory (Trajectory): Ground truth joint trajectory.
        model (CableModel): The chain with the true parameters.
        rest (np.ndarray, optional): Loaded equilibrium recorded after the transient, None without a rest segment.
    """
    log: PoseLog
    loads: Tuple[ExternalLoad, ...]
    trajectory: Trajectory
    model: CableModel
    rest: Optional[np.ndarray] = None


@dataclass(frozen=True)
class NoiseStudyResult:
    """
    Relative estimation errors over noisy repetitions.

    Attributes:
        median_stiffness_error (float): Median over seeds of the largest relative stiffness error of any joint.
        median_damping_error (float): Same for damping, NaN if damping failed for every seed.
        failures (int): Seeds for which any stage of the pipeline failed.
        stiffness_errors (Tuple[float, ...]): Per successful seed.
        damping_errors (Tuple[float, ...]): Per successful seed.
    """
    median_stiffness_error: float
    median_damping_error: float
    failures: int
    stiffness_errors: Tuple[float, ...] = field(default=())
    damping_errors: Tuple[float, ...] = field(default=())


def _per_joint(model: CableModel, values: float | Sequence[float], name: str) -> np.ndarray:
    pitch_count: int = sum(1 for joint in model.joints if joint.has_axis(JointAxis.PITCH))
    array = np.asarray(values, dtype=float).reshape(-1)
    if array.size == 1:
        array = np.full(pitch_count, float(array[0]))
    if array.size != pitch_count:
        raise ModelError(f'expected {pitch_count} values, got {array.size}', path=name)
    return array


def add_pose_noise(log: PoseLog, position_noise: float = 0.0, rotation_noise: float = 0.0, seed: Optional[int] = None) -> PoseLog:
    """
    Copy of ``log`` with Gaussian noise: ``position_noise`` meters on every coordinate and a rotation vector with
    ``rotation_noise`` rad per axis applied in the world frame.
    """
    if position_noise < 0 or rotation_noise < 0:
        raise ModelError('noise levels must not be negative', path='noise')
    if position_noise == 0 and rotation_noise == 0:
        return log
    generator = np.random.default_rng(seed)
    translation = log.translation + generator.normal(0.0, position_noise, log.translation.shape)
    perturbation = Rotation.from_rotvec(generator.normal(0.0, rotation_noise, (len(log), 3)))
    quaternion = (perturbation * Rotation.from_quat(log.quaternion)).as_quat()
    return PoseLog(t=log.t, tag_id=log.tag_id, translation=translation, quaternion=quaternion, layout=log.layout)


def _record(model: CableModel, layout: TagLayout, times: np.ndarray, positions: np.ndarray) -> PoseLog:
    rotations: List[np.ndarray] = []
    translations: List[np.ndarray] = []
    for q in positions:
        frames = tag_frames(model, q, layout.tag_ids)
        for tag in layout.tag_ids:
            rotations.append(frames[tag].rotation)
            translations.append(frames[tag].translation)
    return PoseLog(t=np.repeat(times, len(layout.tag_ids)), tag_id=np.tile(np.array(layout.tag_ids), times.size),
                   translation=np.array(translations), quaternion=Rotation.from_matrix(np.array(rotations)).as_quat(), layout=layout)


# pylint: disable-next=too-many-arguments, too-many-positional-arguments, too-many-locals
def synthesize_pose_log(model: CableModel, stiffness: float | Sequence[float], damping: float | Sequence[float], tip_mass: float = 0.1,
                        duration: float = 2.0, dt: float = 1e-3, record_every: int = 1, layout: Optional[TagLayout] = None,
                        position_noise: float = 0.0, rotation_noise: float = 0.0, seed: Optional[int] = None,
                        rest_duration: float = 1.0, pause: float = 0.5) -> SyntheticExperiment:
    """
    Simulates the bench experiment: the chain rests without weight, the weight is attached at t = 0 and the tag poses are recorded
    until ``duration``. Recording then pauses for ``pause`` seconds and resumes for ``rest_duration`` seconds with the chain at rest
    under the weight, on the same time grid.

    Args:
        model (CableModel): Pitch-only identification chain.
        stiffness: True stiffness, one value for all joints or one per joint.
        damping: True damping, one value for all joints or one per joint.
        tip_mass (float): Weight attached at the tip in kilograms.
        duration (float): Recorded transient in seconds.
        dt (float): Simulation step in seconds.
        record_every (int): Record every n-th simulation step.
        layout (TagLayout, optional): Tags to record, one per link by default.
        position_noise (float): Standard deviation of Gaussian position noise in meters.
        rotation_noise (float): Standard deviation of Gaussian rotation noise per axis in rad.
        seed (int, optional): Seed of the noise generator.
        rest_duration (float): Recorded rest in seconds, zero to record the transient only.
        pause (float): Unrecorded time between transient and rest in seconds, at least two recording steps.

    Raises:
        ModelError: for a wrong number of parameters or negative noise levels.
        ConvergenceError: if an equilibrium of the chain cannot be found.
    """
    truth: CableModel = with_pitch_parameters(model, _per_joint(model, stiffness, 'stiffness'), _per_joint(model, damping, 'damping'))
    layout = layout or TagLayout.for_model(truth)
    every: int = max(1, int(record_every))
    loads: Tuple[ExternalLoad, ...] = (tip_weight(truth, tip_mass),) if tip_mass > 0 else ()
    trajectory = simulate(truth, ChainState(q=static_equilibrium(truth)), loads, duration=duration, dt=dt)
    recorded = np.arange(0, len(trajectory), every)
    times = trajectory.t[recorded]
    positions = trajectory.q[recorded]
    rest: Optional[np.ndarray] = None
    if rest_duration > 0:
        rest = static_equilibrium(truth, loads, q_init=trajectory.final.q, tolerance=REST_TOLERANCE)
        period: float = every * dt
        gap_steps: int = max(2, int(round(pause / period)))
        rest_steps = recorded[-1] // every + gap_steps + np.arange(int(round(rest_duration / period)) + 1)
        times = np.concatenate([times, rest_steps * period])
        positions = np.vstack([positions, np.tile(rest, (rest_steps.size, 1))])
    log = add_pose_noise(_record(truth, layout, times, positions), position_noise, rotation_noise, seed)
    LOG.debug('Synthesized %d pose log entries over %s s', len(log), float(times[-1]))
    return SyntheticExperiment(log=log, loads=loads, trajectory=trajectory, model=truth, rest=rest)


def _relative_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    return float(np.max(np.abs(estimate - truth) / np.abs(truth)))


# pylint: disable-next=too-many-arguments, too-many-positional-arguments, too-many-locals
def noise_study(model: CableModel, stiffness: float | Sequence[float], damping: float | Sequence[float], seeds: Sequence[int],
                position_noise: float = 1e-3, rotation_noise: float = float(np.radians(0.5)), tip_mass: float = 0.1,
                duration: float = 2.0, dt: float = 1e-3, record_every: int = 10, settings: Optional[IdentificationSettings] = None,
                jobs: int = 1, rest_duration: float = 1.0) -> NoiseStudyResult:
    """
    Simulates the synthetic experiment once, adds Gaussian pose noise for every seed and reports median relative errors.

    Stiffness errors are kept for seeds whose damping stage fails; such seeds count as failures.
    """
    settings = settings or NOISY_SETTINGS
    true_stiffness = _per_joint(model, stiffness, 'stiffness')
    true_damping = _per_joint(model, damping, 'damping')
    clean = synthesize_pose_log(model, true_stiffness, true_damping, tip_mass=tip_mass, duration=duration, dt=dt,
                                record_every=record_every, rest_duration=rest_duration)

    def run(seed: int) -> Tuple[Optional[float], Optional[float]]:
        try:
            samples = log_to_samples(model, add_pose_noise(clean.log, position_noise, rotation_noise, seed), settings)
        except CableSim2RealError as err:
            LOG.warning('Seed %d: pose log rejected: %s', seed, err)
            return None, None
        try:
            params = identify_from_samples(model, samples, clean.loads, settings)
        except CableSim2RealError as err:
            LOG.warning('Seed %d: identification failed: %s', seed, err)
        else:
            return _relative_error(params.stiffness, true_stiffness), _relative_error(params.damping, true_damping)
        try:
            static, _ = split_samples(samples, settings.velocity_threshold, settings.dynamic_threshold, settings.tail_duration,
                                      settings.noise_floor_factor)
            estimate = identify_stiffness(model, static, clean.loads, cutoff=settings.cutoff,
                                          velocity_threshold=velocity_thresholds(samples, settings.velocity_threshold,
                                                                                 settings.noise_floor_factor))
        except CableSim2RealError as err:
            LOG.warning('Seed %d: stiffness identification failed: %s', seed, err)
            return None, None
        return _relative_error(estimate.values, true_stiffness), None

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        outcomes: List[Tuple[Optional[float], Optional[float]]] = list(executor.map(run, seeds))
    stiffness_errors = tuple(error for error, _ in outcomes if error is not None)
    damping_errors = tuple(error for _, error in outcomes if error is not None)
    failures: int = sum(1 for k_error, d_error in outcomes if k_error is None or d_error is None)
    LOG.info('Noise study over %d seeds: %d failures', len(outcomes), failures)
    return NoiseStudyResult(median_stiffness_error=float(np.median(stiffness_errors)) if stiffness_errors else float('nan'),
                            median_damping_error=float(np.median(damping_errors)) if damping_errors else float('nan'),
                            failures=failures, stiffness_errors=stiffness_errors, damping_errors=damping_errors)
