""" This module estimates joint stiffness and damping of a passive chain by joint-wise pseudoinverse least squares"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass
import logging

import numpy as np

from cable_sim2real.dynamics import rne_batch
from cable_sim2real.errors import DimensionError, IdentificationError
from cable_sim2real.identification.differentiation import differentiate_log, split_samples, velocity_thresholds, DEFAULT_WINDOW
from cable_sim2real.identification.pose_log import associate, joint_angles, ASSOCIATION_WINDOW
from cable_sim2real.model.cable import with_pitch_parameters
from cable_sim2real.model.state import validate_loads

if TYPE_CHECKING:
    from typing import Dict, List, Optional, Sequence, Tuple

    from cable_sim2real.identification.differentiation import StateSample
    from cable_sim2real.identification.pose_log import PoseLog, TagLayout
    from cable_sim2real.model.cable import CableModel
    from cable_sim2real.model.state import ExternalLoad

LOG: logging.Logger = logging.getLogger("cable_sim2real.identification.estimator")

SINGULAR_VALUE_CUTOFF: float = 1e-10


@dataclass(frozen=True)
class IdentificationSettings:  # pylint: disable=too-many-instance-attributes
    """
    Tunables of the identification pipeline.

    Attributes:
        window (int): Moving-average length in samples.
        dt (float, optional): Resampling step in seconds, median log spacing if None.
        velocity_threshold (float): Joint speed in rad/s below which a sample counts as stationary.
        dynamic_threshold (float): Joint speed in rad/s a dynamic sample has to exceed on at least one joint.
        tail_duration (float): Required length of the stationary tail in seconds.
        refinement_passes (int): Alternating stiffness and damping re-estimates after the first estimate.
        association_window (float): Largest time spread in seconds of tag entries forming one instant.
        cutoff (float): Relative singular value cutoff of the pseudoinverse.
        smoothing_passes (int): Moving-average passes before differentiation, two give a triangular kernel.
        noise_floor_factor (float): Raise both speed thresholds of each joint to this multiple of its estimated velocity noise,
            zero keeps the thresholds fixed.
    """
    window: int = DEFAULT_WINDOW
    dt: Optional[float] = None
    velocity_threshold: float = 1e-3
    dynamic_threshold: float = 1e-2
    tail_duration: float = 0.5
    refinement_passes: int = 2
    association_window: float = ASSOCIATION_WINDOW
    cutoff: float = SINGULAR_VALUE_CUTOFF
    smoothing_passes: int = 1
    noise_floor_factor: float = 0.0


@dataclass(frozen=True, eq=False)
class JointEstimate:
    """
    Result of a joint-wise least-squares fit.

    Attributes:
        values (np.ndarray): One parameter per joint.
        residual (float): Norm of the fit residual over all joints and samples.
        condition (float): Ratio of the largest to the smallest regressor column norm.
        samples (int): Number of samples used.
    """
    values: np.ndarray
    residual: float
    condition: float
    samples: int


@dataclass(frozen=True, eq=False)
class IdentifiedParams:  # pylint: disable=too-many-instance-attributes
    """
    Identified stiffness and damping of the observed joints in base-to-tip order.

    Attributes:
        stiffness (np.ndarray): N*m/rad per joint.
        damping (np.ndarray): N*m*s/rad per joint.
        residual (float): Combined regression residual norm.
        condition (float): Worst regressor condition number.
        stiffness_residual (float): Residual of the stiffness fit.
        damping_residual (float): Residual of the damping fit.
        static_samples (int): Samples of the stationary tail.
        dynamic_samples (int): Samples of the transient.
        model (CableModel, optional): The identification chain with the identified parameters written in.
    """
    stiffness: np.ndarray
    damping: np.ndarray
    residual: float
    condition: float
    stiffness_residual: float
    damping_residual: float
    static_samples: int
    dynamic_samples: int
    model: Optional[CableModel] = None


def jointwise_least_squares(regressor: np.ndarray, rhs: np.ndarray, cutoff: float = SINGULAR_VALUE_CUTOFF) -> JointEstimate:
    """
    Solves ``regressor[:, j] * x_j = rhs[:, j]`` for every joint j with the pseudoinverse of the regressor column.

    Raises:
        IdentificationError: if a regressor column is zero relative to the largest one.
    """
    regressor = np.asarray(regressor, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if regressor.ndim != 2 or regressor.shape != rhs.shape:
        raise DimensionError(f'regressor {regressor.shape} and right-hand side {rhs.shape} do not match')
    norms = np.linalg.norm(regressor, axis=0)
    largest: float = float(np.max(norms, initial=0.0))
    if largest == 0.0 or np.any(norms <= cutoff * largest):
        raise IdentificationError(f'rank-deficient regressor (column norms {np.array2string(norms, precision=3)})')
    values = np.array([(np.linalg.pinv(regressor[:, joint:joint + 1], rcond=cutoff) @ rhs[:, joint])[0]
                       for joint in range(regressor.shape[1])])
    residual: float = float(np.linalg.norm(regressor * values - rhs))
    return JointEstimate(values=values, residual=residual, condition=largest / float(np.min(norms)), samples=regressor.shape[0])


def _stack(model: CableModel, samples: Sequence[StateSample]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    for sample in samples:
        if sample.state.dof != model.dof:
            raise DimensionError(f'sample at t={sample.t} has dimension {sample.state.dof}, model has {model.dof} DOF')
    return (np.array([sample.state.q for sample in samples]), np.array([sample.state.qd for sample in samples]),
            np.array([sample.state.qdd for sample in samples]))


def passive_torque(model: CableModel, samples: Sequence[StateSample], loads: Optional[Sequence[ExternalLoad]] = None) -> np.ndarray:
    """
    RNE torque with gravity plus load torque per sample; samples with own loads use them instead of ``loads``.
    """
    default: Tuple[ExternalLoad, ...] = tuple(validate_loads(model, loads))
    positions, velocities, accelerations = _stack(model, samples)
    groups: Dict[Tuple[int, ...], List[int]] = {}
    group_loads: Dict[Tuple[int, ...], Tuple[ExternalLoad, ...]] = {}
    for index, sample in enumerate(samples):
        active = sample.loads or default
        key = tuple(id(load) for load in active)
        groups.setdefault(key, []).append(index)
        group_loads[key] = active
    torque = np.zeros_like(positions)
    for key, indices in groups.items():
        torque[indices] = rne_batch(model, positions[indices], velocities[indices], accelerations[indices], gravity_on=True,
                                    loads=group_loads[key])
    return torque


# pylint: disable-next=too-many-arguments, too-many-positional-arguments
def identify_stiffness(model: CableModel, static_samples: Sequence[StateSample], loads: Optional[Sequence[ExternalLoad]] = None,
                       damping: Optional[Sequence[float]] = None, velocity_threshold: float | Sequence[float] = 1e-3,
                       cutoff: float = SINGULAR_VALUE_CUTOFF) -> JointEstimate:
    """
    Stiffness from stationary samples: K q = -(tau_RNE + load torque), joint-wise over all samples. With ``damping`` the term
    D q' is moved to the right side as well.

    Raises:
        IdentificationError: for empty input, moving samples, a rank-deficient regressor or a negative estimate.
    """
    if not static_samples:
        raise IdentificationError('no stationary samples')
    positions, velocities, _ = _stack(model, static_samples)
    limit = np.broadcast_to(np.asarray(velocity_threshold, dtype=float), (model.dof,))
    too_fast = np.max(np.abs(velocities), axis=0) >= limit
    if np.any(too_fast):
        joint: int = int(np.argmax(too_fast))
        raise IdentificationError(f'stationary samples move with up to {float(np.max(np.abs(velocities[:, joint]))):.3g} rad/s at joint '
                                  f'{joint} (limit {float(limit[joint]):.3g} rad/s)')
    rhs = -passive_torque(model, static_samples, loads)
    if damping is not None:
        rhs -= np.asarray(damping, dtype=float) * velocities
    estimate = jointwise_least_squares(positions, rhs, cutoff)
    _reject_negative(estimate.values, 'stiffness')
    LOG.debug('Stiffness %s from %d samples (residual %.3e)', estimate.values, estimate.samples, estimate.residual)
    return estimate


# pylint: disable-next=too-many-arguments, too-many-positional-arguments
def identify_damping(model: CableModel, stiffness: Sequence[float], dynamic_samples: Sequence[StateSample],
                     loads: Optional[Sequence[ExternalLoad]] = None, dynamic_threshold: float | Sequence[float] = 1e-2,
                     cutoff: float = SINGULAR_VALUE_CUTOFF) -> JointEstimate:
    """
    Damping from transient samples: D q' = -(tau_RNE + load torque + K q), joint-wise over all samples.

    Raises:
        IdentificationError: if no sample moves faster than ``dynamic_threshold``, for a rank-deficient regressor or a negative
            estimate.
    """
    if not dynamic_samples:
        raise IdentificationError('no dynamic samples')
    positions, velocities, _ = _stack(model, dynamic_samples)
    limit = np.broadcast_to(np.asarray(dynamic_threshold, dtype=float), (model.dof,))
    if not np.any(np.abs(velocities) > limit):
        raise IdentificationError(f'all samples are static: no joint moves faster than {np.array2string(limit, precision=3)} rad/s')
    rhs = -passive_torque(model, dynamic_samples, loads) - np.asarray(stiffness, dtype=float) * positions
    estimate = jointwise_least_squares(velocities, rhs, cutoff)
    _reject_negative(estimate.values, 'damping')
    LOG.debug('Damping %s from %d samples (residual %.3e)', estimate.values, estimate.samples, estimate.residual)
    return estimate


def _reject_negative(values: np.ndarray, name: str) -> None:
    negative = np.nonzero(values < 0.0)[0]
    if negative.size:
        raise IdentificationError(f'negative {name} estimate {values[negative[0]]:.4g} for joint {int(negative[0])}')


def identify_from_samples(model: CableModel, samples: Sequence[StateSample], loads: Optional[Sequence[ExternalLoad]] = None,
                          settings: Optional[IdentificationSettings] = None) -> IdentifiedParams:
    """
    Splits differentiated samples, estimates stiffness from the stationary tail and damping from the transient, then refines
    both alternately with the damping term kept in the stiffness equation.
    """
    settings = settings or IdentificationSettings()
    static, dynamic = split_samples(samples, settings.velocity_threshold, settings.dynamic_threshold, settings.tail_duration,
                                    settings.noise_floor_factor)
    still = velocity_thresholds(samples, settings.velocity_threshold, settings.noise_floor_factor)
    moving = velocity_thresholds(samples, settings.dynamic_threshold, settings.noise_floor_factor)
    stiffness = identify_stiffness(model, static, loads, velocity_threshold=still, cutoff=settings.cutoff)
    damping = identify_damping(model, stiffness.values, dynamic, loads, moving, settings.cutoff)
    for refinement in range(settings.refinement_passes):
        stiffness = identify_stiffness(model, static, loads, damping=damping.values, velocity_threshold=still, cutoff=settings.cutoff)
        damping = identify_damping(model, stiffness.values, dynamic, loads, moving, settings.cutoff)
        LOG.debug('Refinement %d: K=%s D=%s', refinement + 1, stiffness.values, damping.values)
    updated: CableModel = with_pitch_parameters(model, stiffness.values, damping.values)
    LOG.info('Identified stiffness %s N*m/rad and damping %s N*m*s/rad', np.array2string(stiffness.values, precision=5),
             np.array2string(damping.values, precision=5))
    return IdentifiedParams(stiffness=stiffness.values, damping=damping.values,
                            residual=float(np.hypot(stiffness.residual, damping.residual)),
                            condition=max(stiffness.condition, damping.condition), stiffness_residual=stiffness.residual,
                            damping_residual=damping.residual, static_samples=len(static), dynamic_samples=len(dynamic), model=updated)


def log_to_samples(model: CableModel, pose_log: PoseLog, settings: Optional[IdentificationSettings] = None,
                   layout: Optional[TagLayout] = None) -> List[StateSample]:
    """Associates tags, extracts joint angles and differentiates them."""
    settings = settings or IdentificationSettings()
    frame_sets = associate(pose_log, settings.association_window)
    positions = joint_angles(frame_sets, model, layout or pose_log.layout)
    return differentiate_log(frame_sets.t, positions, settings.window, settings.dt, settings.smoothing_passes)


def run_identification(model: CableModel, pose_log: PoseLog, loads: Optional[Sequence[ExternalLoad]] = None,
                       settings: Optional[IdentificationSettings] = None) -> IdentifiedParams:
    """
    Full pipeline from a pose log of the weight-drop experiment to stiffness and damping of the identification chain.

    Args:
        model (CableModel): Pitch-only identification chain, its stiffness and damping are ignored.
        pose_log (PoseLog): Tag poses covering the transient and the stationary tail.
        loads (Sequence[ExternalLoad], optional): Loads acting during the whole log, usually the tip weight.
        settings (IdentificationSettings, optional): Pipeline tunables.

    Returns:
        IdentifiedParams: Estimates, diagnostics and the updated chain.
    """
    samples: List[StateSample] = log_to_samples(model, pose_log, settings)
    return identify_from_samples(model, samples, loads, settings)


def update_model(model: CableModel, params: IdentifiedParams, fill_remaining: bool = False) -> CableModel:
    """Writes identified parameters into the most distal pitch joints of ``model``, optionally the means into all others."""
    return with_pitch_parameters(model, params.stiffness, params.damping, fill_remaining=fill_remaining)
