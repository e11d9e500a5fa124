""" This module closes a resolved-rate servo loop that drives the cable tip frame onto a target frame"""
from __future__ import annotations
from typing import TYPE_CHECKING, Protocol

from dataclasses import dataclass, field
import csv
import logging

import numpy as np
from scipy.spatial.transform import Rotation

from cable_sim2real.errors import DimensionError, DivergenceError, ServoError
from cable_sim2real.kinematics import FramePose, check_joint_vector, forward_kinematics, jacobian
from cable_sim2real.model.state import check_limits_of

if TYPE_CHECKING:
    from typing import List, Optional, Sequence, Tuple
    from pathlib import Path

    from cable_sim2real.model.cable import CableModel

LOG: logging.Logger = logging.getLogger("cable_sim2real.servo")

# Singular values below this fraction of the largest one make an undamped Jacobian singular
SINGULAR_TOLERANCE: float = 1e-10


@dataclass(frozen=True)
class ServoGains:  # pylint: disable=too-many-instance-attributes
    """
    Controller parameters.

    Attributes:
        kp (float | Tuple[float, ...]): Proportional gain on the joint velocity command, one value or one per joint.
        ki (float | Tuple[float, ...]): Integral gain.
        kd (float | Tuple[float, ...]): Derivative gain.
        time_constant (float): Seconds the Cartesian error is divided by to obtain the Cartesian velocity.
        damping_lambda (float): Damping of the pseudoinverse.
        pos_tol (float): Position tolerance in meters.
        rot_tol (float): Rotation tolerance in rad.
        max_iters (int): Iteration limit.
        dt (float): Loop period in seconds shared with the plant.
        integral_limit (float): Anti-windup bound of the integrator per joint.
        position_only (bool): Control the tip position only and ignore the orientation.
        divergence_factor (float): Abort when the error grows this many times beyond its initial value.
    """
    kp: float | Tuple[float, ...] = 1.0
    ki: float | Tuple[float, ...] = 0.0
    kd: float | Tuple[float, ...] = 0.0
    time_constant: float = 1.0
    damping_lambda: float = 0.01
    pos_tol: float = 1e-3
    rot_tol: float = 0.01
    max_iters: int = 2000
    dt: float = 0.01
    integral_limit: float = 1.0
    position_only: bool = False
    divergence_factor: float = 10.0

    def __post_init__(self) -> None:
        for name in ('kp', 'ki', 'kd'):
            value = getattr(self, name)
            if isinstance(value, (list, tuple)):
                object.__setattr__(self, name, tuple(float(item) for item in value))
            if np.any(np.asarray(getattr(self, name), dtype=float) < 0):
                raise ServoError(f'{name} must not be negative')
        if not self.time_constant > 0:
            raise ServoError('time constant must be positive')
        if self.damping_lambda < 0:
            raise ServoError('damping lambda must not be negative')
        if not (self.pos_tol > 0 and self.rot_tol > 0):
            raise ServoError('tolerances must be positive')
        if self.max_iters < 0 or not self.dt > 0 or self.integral_limit < 0:
            raise ServoError('max_iters, dt and integral_limit must be valid')


@dataclass(frozen=True, eq=False)
class IntegratorState:
    """
    Memory of the PID acting on joint velocity commands.

    Attributes:
        integral (np.ndarray, optional): Accumulated raw command times dt, None before the first step.
        previous (np.ndarray, optional): Raw command of the previous step.
    """
    integral: Optional[np.ndarray] = None
    previous: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class ServoStep:
    """
    One command of a servo run.

    Attributes:
        velocity (np.ndarray): Cartesian velocity the damped pseudoinverse was applied to.
        jacobian (np.ndarray): Rows of the tip Jacobian matching ``velocity``.
        raw (np.ndarray): Damped least-squares joint velocity before the PID.
        command (np.ndarray): Joint velocity command sent to the plant.
    """
    velocity: np.ndarray
    jacobian: np.ndarray
    raw: np.ndarray
    command: np.ndarray


@dataclass(frozen=True, eq=False)
class ServoResult:
    """
    Outcome of a servo run.

    Attributes:
        converged (bool): True if both tolerances were met.
        iterations (int): Commands sent to the plant.
        error_history (List[Tuple[float, float]]): Position and rotation error before every command.
        final_state (np.ndarray): Joint positions of the plant at the end.
        joint_history (List[np.ndarray]): Joint positions before every command.
        final_error (Tuple[float, float]): Position and rotation error at the end.
        steps (List[ServoStep]): Every command with its inputs, only filled when requested.
    """
    converged: bool
    iterations: int
    error_history: List[Tuple[float, float]]
    final_state: np.ndarray
    joint_history: List[np.ndarray] = field(default_factory=list)
    final_error: Tuple[float, float] = (0.0, 0.0)
    steps: List[ServoStep] = field(default_factory=list)


class ServoPlant(Protocol):
    """Anything the servo loop can drive."""

    @property
    def q(self) -> np.ndarray:
        """Current joint positions."""

    def tip_frame(self) -> FramePose:
        """Current frame of the cable tip."""

    def jacobian(self) -> np.ndarray:
        """Current 6 x n tip Jacobian."""

    def apply(self, command: np.ndarray, dt: float) -> None:
        """Executes a joint velocity command for ``dt`` seconds."""


class KinematicPlant:
    """
    Plant executing joint velocity commands exactly: q += q' dt, clamped to the joint limits.

    Args:
        model (CableModel): The chain.
        q0 (Sequence[float]): Initial joint positions.
    """
    def __init__(self, model: CableModel, q0: Optional[Sequence[float]] = None) -> None:
        self.model: CableModel = model
        self._q: np.ndarray = np.zeros(model.dof) if q0 is None else check_joint_vector(model, q0).copy()
        check_limits_of(model, self._q)

    @property
    def q(self) -> np.ndarray:
        return self._q.copy()

    def tip_frame(self) -> FramePose:
        return forward_kinematics(self.model, self._q).tip

    def jacobian(self) -> np.ndarray:
        result = jacobian(self.model, self._q)
        result[:, self.model.locked] = 0.0
        return result

    def apply(self, command: np.ndarray, dt: float) -> None:
        command = np.asarray(command, dtype=float)
        if command.shape != self._q.shape:
            raise DimensionError(f'command has shape {command.shape}, plant has {self._q.size} joints')
        self._q = np.clip(self._q + command * dt, self.model.lower_limits, self.model.upper_limits)


def frame_error(current: FramePose, target: FramePose) -> np.ndarray:
    """
    Translation from current to target and the rotation vector of ``current^-1 * target`` expressed in the world frame.
    """
    translation = target.translation - current.translation
    local = Rotation.from_matrix(current.rotation.T @ target.rotation).as_rotvec()
    return np.concatenate([translation, current.rotation @ local])


def _gain(value: float | Tuple[float, ...], size: int) -> np.ndarray:
    array = np.asarray(value, dtype=float).reshape(-1)
    if array.size == 1:
        return np.full(size, float(array[0]))
    if array.size != size:
        raise DimensionError(f'expected {size} gains, got {array.size}')
    return array


def damped_pseudoinverse_solve(matrix: np.ndarray, vector: np.ndarray, damping_lambda: float) -> np.ndarray:
    """
    J^T (J J^T + lambda^2 I)^-1 v computed from the SVD of J.

    Raises:
        ServoError: if J is singular and ``damping_lambda`` is zero.
    """
    left, singular, right_t = np.linalg.svd(matrix, full_matrices=False)
    largest: float = float(np.max(singular, initial=0.0))
    if damping_lambda == 0.0 and (largest == 0.0 or np.min(singular) <= SINGULAR_TOLERANCE * largest):
        raise ServoError('Jacobian is singular and the pseudoinverse is not damped')
    factors = singular / (singular ** 2 + damping_lambda ** 2)
    return right_t.T @ (factors * (left.T @ vector))


def damped_norm_bound(matrix: np.ndarray, vector: np.ndarray, damping_lambda: float) -> float:
    """
    Largest possible norm of :func:`damped_pseudoinverse_solve`: |v| max_i s_i / (s_i^2 + lambda^2) over the singular values s_i
    of J. Never above |v| / (2 lambda).
    """
    singular = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    denominator = singular ** 2 + damping_lambda ** 2
    gains = np.divide(singular, denominator, out=np.zeros_like(singular), where=denominator > 0)
    return float(np.linalg.norm(vector)) * float(np.max(gains, initial=0.0))


def servo_step(error: np.ndarray, jacobian_matrix: np.ndarray, gains: ServoGains,
               integ_state: Optional[IntegratorState] = None) -> Tuple[np.ndarray, IntegratorState]:
    """
    One resolved-rate step: Cartesian velocity error / time_constant, joint velocity by damped pseudoinverse, PID on the joint
    velocity with a clamped integrator.

    Returns:
        Tuple[np.ndarray, IntegratorState]: Joint velocity command and the new integrator state. A zero error returns a zero
        command and the unchanged state.
    """
    error = np.asarray(error, dtype=float).reshape(-1)
    jacobian_matrix = np.asarray(jacobian_matrix, dtype=float)
    state = integ_state or IntegratorState()
    if error.shape != (6,) or jacobian_matrix.ndim != 2 or jacobian_matrix.shape[0] != 6:
        raise DimensionError('servo step needs a 6-vector error and a 6 x n Jacobian')
    dof: int = jacobian_matrix.shape[1]
    if not np.any(error):
        return np.zeros(dof), state
    rows = slice(0, 3) if gains.position_only else slice(0, 6)
    velocity = error[rows] / gains.time_constant
    raw = damped_pseudoinverse_solve(jacobian_matrix[rows], velocity, gains.damping_lambda)
    integral = np.zeros(dof) if state.integral is None else state.integral
    integral = np.clip(integral + raw * gains.dt, -gains.integral_limit, gains.integral_limit)
    previous = raw if state.previous is None else state.previous
    command = _gain(gains.kp, dof) * raw + _gain(gains.ki, dof) * integral + _gain(gains.kd, dof) * (raw - previous) / gains.dt
    return command, IntegratorState(integral=integral, previous=raw)


def _error_norms(error: np.ndarray, gains: ServoGains) -> Tuple[float, float]:
    return float(np.linalg.norm(error[:3])), 0.0 if gains.position_only else float(np.linalg.norm(error[3:]))


def run_servo(plant: ServoPlant, target: FramePose, gains: Optional[ServoGains] = None, record_steps: bool = False) -> ServoResult:
    """
    Drives the plant until the tip frame matches ``target`` within the tolerances or ``max_iters`` commands were sent. With
    ``record_steps`` every command is kept together with the Jacobian and Cartesian velocity it was computed from.

    Raises:
        DivergenceError: if the error grows beyond ``divergence_factor`` times its initial value.
    """
    gains = gains or ServoGains()
    history: List[Tuple[float, float]] = []
    joints: List[np.ndarray] = []
    steps: List[ServoStep] = []
    rows = slice(0, 3) if gains.position_only else slice(0, 6)
    state: Optional[IntegratorState] = None
    initial: Optional[float] = None
    iteration: int = 0
    while True:
        error = frame_error(plant.tip_frame(), target)
        position_error, rotation_error = _error_norms(error, gains)
        if position_error <= gains.pos_tol and rotation_error <= gains.rot_tol:
            LOG.info('Servo converged after %d iterations', iteration)
            return ServoResult(converged=True, iterations=iteration, error_history=history, final_state=plant.q, joint_history=joints,
                               final_error=(position_error, rotation_error), steps=steps)
        combined: float = position_error + rotation_error
        if initial is None:
            initial = combined
        elif combined > gains.divergence_factor * initial:
            raise DivergenceError(f'servo diverged: error {combined:.4g} after {iteration} iterations, started at {initial:.4g}', history)
        if iteration >= gains.max_iters:
            LOG.warning('Servo stopped after %d iterations with errors %.4g m and %.4g rad', iteration, position_error, rotation_error)
            return ServoResult(converged=False, iterations=iteration, error_history=history, final_state=plant.q, joint_history=joints,
                               final_error=(position_error, rotation_error), steps=steps)
        history.append((position_error, rotation_error))
        joints.append(plant.q)
        jacobian_matrix = plant.jacobian()
        command, state = servo_step(error, jacobian_matrix, gains, state)
        if record_steps:
            raw = state.previous if np.any(error) and state.previous is not None else np.zeros_like(command)
            steps.append(ServoStep(velocity=error[rows] / gains.time_constant, jacobian=jacobian_matrix[rows], raw=raw, command=command))
        plant.apply(command, gains.dt)
        iteration += 1


def write_servo_report_csv(result: ServoResult, path: Path) -> None:
    """Writes ``iter,err_pos,err_rot,q1..qn`` per iteration."""
    dof: int = result.final_state.size
    with open(path, 'w', encoding='utf-8', newline='') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(['iter', 'err_pos', 'err_rot'] + [f'q{index}' for index in range(1, dof + 1)])
        for iteration, ((position_error, rotation_error), q) in enumerate(zip(result.error_history, result.joint_history)):
            writer.writerow([iteration, f'{position_error:.9g}', f'{rotation_error:.9g}'] + [f'{value:.9g}' for value in q])
