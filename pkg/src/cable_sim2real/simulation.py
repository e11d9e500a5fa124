""" This module integrates the passive chain in time, solves for static equilibria and runs fixture experiments"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass, field
import csv
import logging

import numpy as np
from scipy import optimize
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from cable_sim2real.dynamics import mass_matrix, mass_matrix_and_bias, potential_energy, static_torque
from cable_sim2real.errors import ConvergenceError, DimensionError, SimulationError
from cable_sim2real.kinematics import tip_sagging_angle
from cable_sim2real.model.cable import fix_link
from cable_sim2real.model.state import ChainState, check_state, tip_weight, validate_loads

if TYPE_CHECKING:
    from typing import List, Optional, Sequence, Tuple, Union
    from pathlib import Path

    from cable_sim2real.model.cable import CableModel
    from cable_sim2real.model.state import ExternalLoad

    LoadSchedule = Union[None, Sequence[ExternalLoad], Sequence['LoadEvent']]

__all__ = ['LoadEvent', 'Trajectory', 'EquilibriumResult', 'step', 'simulate', 'static_equilibrium', 'settle', 'chain_energy',
           'projected_residual', 'is_stable', 'fix_link', 'fixture_equilibrium', 'write_trajectory_csv', 'read_trajectory_csv']

LOG: logging.Logger = logging.getLogger("cable_sim2real.simulation")

DEFAULT_DT: float = 1e-3
EQUILIBRIUM_TOLERANCE: float = 1e-9
# Relative distance to a joint limit below which a DOF rests on it
LIMIT_TOLERANCE: float = 1e-12
# Smallest eigenvalue of the static stiffness in N*m/rad still accepted as stable
STABILITY_TOLERANCE: float = 1e-9
DIVERGED_VELOCITY: float = 1e3


@dataclass(frozen=True)
class LoadEvent:
    """
    From ``t`` on the set of active external loads is ``loads``.

    Attributes:
        t (float): Time in seconds.
        loads (Tuple[ExternalLoad, ...]): Loads active after the event.
    """
    t: float
    loads: Tuple[ExternalLoad, ...] = field(default=())


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Uniformly sampled simulation result.

    Attributes:
        dt (float): Sample spacing in seconds.
        t (np.ndarray): Sample times, ``t[k] = t[0] + k * dt``.
        q (np.ndarray): Positions, one row per sample.
        qd (np.ndarray): Velocities, one row per sample.
        qdd (np.ndarray): Accelerations, one row per sample.
        events (Tuple[LoadEvent, ...]): Load changes applied during the run.
    """
    dt: float
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    events: Tuple[LoadEvent, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise SimulationError('dt must be positive')
        if not self.q.shape == self.qd.shape == self.qdd.shape or self.q.ndim != 2 or self.q.shape[0] != self.t.size:
            raise DimensionError('trajectory arrays are not dimension consistent')
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise SimulationError('trajectory times must increase strictly')

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def samples(self) -> List[Tuple[float, ChainState]]:
        """All samples as (t, state) pairs."""
        return [(float(self.t[index]), self.state(index)) for index in range(len(self))]

    def state(self, index: int) -> ChainState:
        """State of one sample."""
        return ChainState(q=self.q[index], qd=self.qd[index], qdd=self.qdd[index])

    @property
    def final(self) -> ChainState:
        """Last recorded state."""
        return self.state(len(self) - 1)


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    """
    Static equilibrium of a fixture experiment.

    Attributes:
        model (CableModel): The sub-chain rooted at the fixed link.
        q (np.ndarray): Equilibrium positions.
        sagging_angle (float): Tip pitch relative to the fixture in rad.
        residual (float): Infinity norm of the static torque residual.
    """
    model: CableModel
    q: np.ndarray
    sagging_angle: float
    residual: float


def _schedule(load_schedule: LoadSchedule) -> Tuple[LoadEvent, ...]:
    if not load_schedule:
        return (LoadEvent(t=0.0, loads=()),)
    items = list(load_schedule)
    if all(isinstance(item, LoadEvent) for item in items):
        events = tuple(sorted(items, key=lambda event: event.t))  # type: ignore[union-attr]
        if events[0].t > 0.0:
            events = (LoadEvent(t=0.0, loads=()),) + events
        return events  # type: ignore[return-value]
    return (LoadEvent(t=0.0, loads=tuple(items)),)  # type: ignore[arg-type]


def _free_mask(model: CableModel) -> np.ndarray:
    return ~model.locked


def _acceleration(model: CableModel, q: np.ndarray, qd: np.ndarray, loads: Sequence[ExternalLoad],
                  damping: Optional[np.ndarray] = None) -> np.ndarray:
    """q'' = M^-1 (-C q' - G - L - K q - D q') on the free DOF, zero on locked ones."""
    free: np.ndarray = _free_mask(model)
    matrix, bias = mass_matrix_and_bias(model, q, qd, loads=loads)
    damping_vector = model.damping if damping is None else damping
    rhs = -bias - model.stiffness * q - damping_vector * qd
    qdd = np.zeros(model.dof)
    if not np.any(free):
        return qdd
    try:
        factor = cho_factor(matrix[np.ix_(free, free)])
    except LinAlgError as err:
        raise SimulationError('mass matrix is not positive definite (degenerate model)') from err
    qdd[free] = cho_solve(factor, rhs[free])
    return qdd


def _advance(model: CableModel, q: np.ndarray, qd: np.ndarray, qdd: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Semi-implicit Euler update with clamping and velocity zeroing at the limits."""
    lower, upper = model.lower_limits, model.upper_limits
    new_qd = qd + qdd * dt
    new_qd[model.locked] = 0.0
    new_q = q + new_qd * dt
    clamped = (new_q < lower) | (new_q > upper)
    if np.any(clamped):
        new_q = np.clip(new_q, lower, upper)
        new_qd[clamped] = 0.0
    return new_q, new_qd


def step(model: CableModel, state: ChainState, loads: Optional[Sequence[ExternalLoad]], dt: float) -> ChainState:
    """
    Advances the passive chain by one step of ``dt`` seconds.

    Returns:
        ChainState: The new positions and velocities; ``qdd`` holds the acceleration used for the update.

    Raises:
        SimulationError: if ``dt`` is not positive or the mass matrix is singular.
    """
    if not dt > 0:
        raise SimulationError(f'dt must be positive, got {dt}')
    check_state(model, state)
    checked = validate_loads(model, loads)
    qdd = _acceleration(model, state.q, state.qd, checked)
    q, qd = _advance(model, state.q, state.qd, qdd, dt)
    return ChainState(q=q, qd=qd, qdd=qdd)


def _active_loads(events: Tuple[LoadEvent, ...], time: float, dt: float) -> Tuple[ExternalLoad, ...]:
    active: Tuple[ExternalLoad, ...] = ()
    for event in events:
        if event.t <= time + 1e-9 * dt:
            active = event.loads
    return active


# pylint: disable-next=too-many-arguments, too-many-positional-arguments, too-many-locals
def simulate(model: CableModel, initial: ChainState, load_schedule: LoadSchedule = None, duration: float = 1.0,
             dt: float = DEFAULT_DT) -> Trajectory:
    """
    Integrates the chain for ``duration`` seconds and records every step.

    Args:
        model (CableModel): The chain.
        initial (ChainState): State at t = 0, its acceleration is recomputed.
        load_schedule: Constant loads, or load events switching the active loads at given times.
        duration (float): Simulated time in seconds.
        dt (float): Step size in seconds.

    Returns:
        Trajectory: ``round(duration / dt) + 1`` samples, the i-th recorded at ``i * dt``.
    """
    if not duration > 0:
        raise SimulationError(f'duration must be positive, got {duration}')
    if not dt > 0:
        raise SimulationError(f'dt must be positive, got {dt}')
    check_state(model, initial)
    events: Tuple[LoadEvent, ...] = _schedule(load_schedule)
    for event in events:
        validate_loads(model, event.loads)
    count: int = int(round(duration / dt)) + 1
    times = np.arange(count) * dt
    positions = np.zeros((count, model.dof))
    velocities = np.zeros((count, model.dof))
    accelerations = np.zeros((count, model.dof))
    q, qd = initial.q.copy(), initial.qd.copy()
    LOG.debug('Simulating %d samples of %d DOF with dt %s', count, model.dof, dt)
    for index in range(count):
        qdd = _acceleration(model, q, qd, _active_loads(events, times[index], dt))
        positions[index], velocities[index], accelerations[index] = q, qd, qdd
        if index < count - 1:
            q, qd = _advance(model, q, qd, qdd, dt)
    if not np.all(np.isfinite(positions)):
        raise SimulationError('simulation diverged, reduce dt')
    return Trajectory(dt=dt, t=times, q=positions, qd=velocities, qdd=accelerations, events=events)


def chain_energy(model: CableModel, q: Sequence[float], qd: Sequence[float], loads: Optional[Sequence[ExternalLoad]] = None) -> float:
    """Kinetic energy, spring energy and gravity and load potential of a state."""
    q_vector = np.asarray(q, dtype=float)
    qd_vector = np.asarray(qd, dtype=float)
    kinetic: float = 0.5 * float(qd_vector @ mass_matrix(model, q_vector) @ qd_vector)
    spring: float = 0.5 * float(np.sum(model.stiffness * q_vector ** 2))
    return kinetic + spring + potential_energy(model, q_vector, loads)


# pylint: disable-next=too-many-arguments, too-many-positional-arguments, too-many-locals
def settle(model: CableModel, state: ChainState, loads: Optional[Sequence[ExternalLoad]] = None, dt: float = DEFAULT_DT,
           max_time: float = 120.0, tolerance: float = 1e-7) -> ChainState:
    """
    Lets the chain come to rest with additional near-critical damping.

    The extra damping follows the mass matrix of the current configuration. Accelerations that push a joint further into
    the limit it rests on do not count as motion.

    Raises:
        ConvergenceError: if the chain still moves after ``max_time`` seconds or the integration blows up.
    """
    checked = validate_loads(model, loads)
    check_state(model, state)
    lower, upper = model.lower_limits, model.upper_limits
    stiffness = np.maximum(model.stiffness, 1e-2)
    q, qd = state.q.copy(), state.qd.copy()
    steps: int = int(np.ceil(max_time / dt))
    qdd = np.zeros(model.dof)
    for iteration in range(steps):
        diagonal = np.clip(np.diag(mass_matrix(model, q)), 1e-12, None)
        # semi-implicit Euler needs dt * d / m well below 2
        damping = np.minimum(np.maximum(model.damping, 2.0 * np.sqrt(stiffness * diagonal)), diagonal / dt)
        qdd = _acceleration(model, q, qd, checked, damping=damping)
        if not (np.all(np.isfinite(qdd)) and np.max(np.abs(qd), initial=0.0) < DIVERGED_VELOCITY):
            raise ConvergenceError('damped settling diverged', residual=float(np.max(np.abs(qdd))), iterations=iteration)
        moving = qdd.copy()
        moving[((q <= lower) & (moving < 0.0)) | ((q >= upper) & (moving > 0.0))] = 0.0
        if np.max(np.abs(qd), initial=0.0) < tolerance and np.max(np.abs(moving), initial=0.0) < tolerance:
            LOG.debug('Settled after %d steps', iteration)
            return ChainState(q=q, qd=np.zeros(model.dof), qdd=qdd)
        q, qd = _advance(model, q, qd, qdd, dt)
    raise ConvergenceError('damped settling did not come to rest', residual=float(np.max(np.abs(qdd))), iterations=steps)


def projected_residual(model: CableModel, q: np.ndarray, residual: np.ndarray) -> np.ndarray:
    """
    Static torque residual with locked DOF and DOF held by a limit removed.

    A DOF at its lower limit whose torque is positive (or at its upper limit with negative torque) would move further out
    if released, the limit takes that torque and the DOF counts as balanced.
    """
    projected = np.array(residual, dtype=float)
    projected[model.locked] = 0.0
    projected[_held_by_limit(model, q, projected)] = 0.0
    return projected


def _held_by_limit(model: CableModel, q: np.ndarray, residual: np.ndarray) -> np.ndarray:
    span = LIMIT_TOLERANCE * np.maximum(1.0, np.abs(model.upper_limits - model.lower_limits))
    at_lower = q <= model.lower_limits + span
    at_upper = q >= model.upper_limits - span
    return ((at_lower & (residual > 0.0)) | (at_upper & (residual < 0.0))) & ~model.locked


def _torque_jacobian(model: CableModel, q: np.ndarray, loads: Sequence[ExternalLoad], columns: np.ndarray) -> np.ndarray:
    """Central difference derivative of the static torque with respect to ``q[columns]``, rows restricted to ``columns``."""
    h: float = 1e-6
    perturbed = np.tile(q, (2 * columns.size, 1))
    perturbed[np.arange(columns.size), columns] += h
    perturbed[columns.size + np.arange(columns.size), columns] -= h
    torques = static_torque(model, perturbed, loads)
    return ((torques[:columns.size] - torques[columns.size:]) / (2.0 * h))[:, columns].T


def is_stable(model: CableModel, q: np.ndarray, loads: Optional[Sequence[ExternalLoad]] = None) -> bool:
    """True if the equilibrium is a local energy minimum: the stiffness matrix of the DOF not held by a limit is positive definite."""
    checked = validate_loads(model, loads)
    residual = static_torque(model, q, checked)
    inner = np.nonzero(~model.locked & ~_held_by_limit(model, q, residual))[0]
    if inner.size == 0:
        return True
    jacobian = _torque_jacobian(model, q, checked, inner)
    return bool(np.min(np.linalg.eigvalsh(0.5 * (jacobian + jacobian.T))) > -STABILITY_TOLERANCE)


def _newton(model: CableModel, q: np.ndarray, loads: Sequence[ExternalLoad], tolerance: float,
            max_iterations: int) -> Tuple[np.ndarray, float, int]:
    """Newton iteration on the free DOF not held by a limit, central difference Jacobian and backtracking on the projected residual."""
    lower, upper = model.lower_limits, model.upper_limits
    raw = static_torque(model, q, loads)
    residual = projected_residual(model, q, raw)
    norm: float = float(np.max(np.abs(residual)))
    iteration: int = 0
    for iteration in range(1, max_iterations + 1):
        if norm < tolerance:
            return q, norm, iteration - 1
        inner = np.nonzero(~model.locked & ~_held_by_limit(model, q, raw))[0]
        try:
            delta = np.linalg.solve(_torque_jacobian(model, q, loads, inner), -residual[inner])
        except np.linalg.LinAlgError:
            LOG.debug('Singular equilibrium Jacobian at iteration %d', iteration)
            break
        alpha: float = 1.0
        while True:
            candidate = q.copy()
            candidate[inner] = np.clip(q[inner] + alpha * delta, lower[inner], upper[inner])
            candidate_raw = static_torque(model, candidate, loads)
            candidate_residual = projected_residual(model, candidate, candidate_raw)
            candidate_norm = float(np.max(np.abs(candidate_residual)))
            if candidate_norm < norm or alpha < 1e-6:
                break
            alpha *= 0.5
        if candidate_norm >= norm and np.max(np.abs(candidate - q)) < 1e-15:
            break
        q, raw, residual, norm = candidate, candidate_raw, candidate_residual, candidate_norm
        LOG.debug('Newton iteration %d: residual %.3e, step %.3e', iteration, norm, alpha)
    return q, norm, iteration


def _minimize_energy(model: CableModel, q: np.ndarray, loads: Sequence[ExternalLoad], tolerance: float) -> np.ndarray:
    """Bounded minimization of spring, gravity and load potential over the free DOF, the static torque is its gradient."""
    free = _free_mask(model)

    def expand(values: np.ndarray) -> np.ndarray:
        full = q.copy()
        full[free] = values
        return full

    def energy(values: np.ndarray) -> float:
        full = expand(values)
        return potential_energy(model, full, loads) + 0.5 * float(np.sum(model.stiffness * full ** 2))

    def gradient(values: np.ndarray) -> np.ndarray:
        return static_torque(model, expand(values), loads)[free]

    result = optimize.minimize(energy, q[free], jac=gradient, method='L-BFGS-B',
                               bounds=list(zip(model.lower_limits[free], model.upper_limits[free])),
                               options={'ftol': 0.0, 'gtol': tolerance, 'maxiter': 20000, 'maxfun': 40000})
    LOG.debug('Energy minimization: %s after %d iterations', result.message, result.nit)
    return expand(np.asarray(result.x, dtype=float))


# pylint: disable-next=too-many-arguments, too-many-positional-arguments
def static_equilibrium(model: CableModel, loads: Optional[Sequence[ExternalLoad]] = None, q_init: Optional[Sequence[float]] = None,
                       tolerance: float = EQUILIBRIUM_TOLERANCE, max_iterations: int = 100, fallback: bool = True) -> np.ndarray:
    """
    Finds a stable q with K q + G(q) + L(q) = 0 on all free DOF; locked DOF stay at their limit and a DOF resting on a limit
    only needs its torque to point into that limit.

    Newton's method is tried first. If it stalls or ends on an unstable equilibrium, the total potential energy is minimized
    within the joint limits and Newton polishes the minimum; as a last resort the chain is settled dynamically.

    Raises:
        ConvergenceError: with the final residual if no equilibrium within ``tolerance`` N*m is found.
    """
    checked = validate_loads(model, loads)
    lower, upper = model.lower_limits, model.upper_limits
    q = np.zeros(model.dof) if q_init is None else np.array(q_init, dtype=float).reshape(-1)
    if q.size != model.dof:
        raise DimensionError(f'initial guess has dimension {q.size}, model has {model.dof} DOF')
    q = np.clip(q, lower, upper)
    q[model.locked] = lower[model.locked]
    if not np.any(_free_mask(model)):
        return q
    start = q
    q, norm, iterations = _newton(model, start, checked, tolerance, max_iterations)
    if fallback and (norm >= tolerance or not is_stable(model, q, checked)):
        LOG.info('Newton iteration ended at residual %.3e, minimizing the potential energy instead', norm)
        q, norm, more = _newton(model, _minimize_energy(model, start, checked, tolerance), checked, tolerance, max_iterations)
        iterations += more
        if norm >= tolerance:
            LOG.warning('Energy minimization stalled at residual %.3e, falling back to damped settling', norm)
            settled = settle(model, ChainState(q=q), checked)
            q, norm, more = _newton(model, settled.q, checked, tolerance, max_iterations)
            iterations += more
    if norm >= tolerance:
        raise ConvergenceError('static equilibrium not found', residual=norm, iterations=iterations)
    LOG.info('Static equilibrium converged after %d iterations, residual %.3e', iterations, norm)
    return q


def fixture_equilibrium(model: CableModel, link_id: int, tip_mass: float = 0.0, q_init: Optional[Sequence[float]] = None) -> EquilibriumResult:
    """
    Welds link ``link_id`` (counted from the distal end) horizontally, hangs ``tip_mass`` kilograms at the tip and solves
    for the resting shape.
    """
    fixed: CableModel = fix_link(model, link_id)
    loads = [tip_weight(fixed, tip_mass)] if tip_mass > 0 else []
    q = static_equilibrium(fixed, loads, q_init)
    residual: float = float(np.max(np.abs(projected_residual(fixed, q, static_torque(fixed, q, loads))), initial=0.0))
    return EquilibriumResult(model=fixed, q=q, sagging_angle=tip_sagging_angle(fixed, q), residual=residual)


def trajectory_header(dof: int) -> List[str]:
    """Column names of the trajectory CSV."""
    return ['t'] + [f'{name}{index}' for name in ('q', 'qd', 'qdd') for index in range(1, dof + 1)]


def write_trajectory_csv(trajectory: Trajectory, path: Path) -> None:
    """Writes the trajectory with 9 significant digits."""
    dof: int = trajectory.q.shape[1]
    with open(path, 'w', encoding='utf-8', newline='') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(trajectory_header(dof))
        for index in range(len(trajectory)):
            row = np.concatenate([[trajectory.t[index]], trajectory.q[index], trajectory.qd[index], trajectory.qdd[index]])
            writer.writerow([f'{value:.9g}' for value in row])


def read_trajectory_csv(path: Path) -> Trajectory:
    """Reads a trajectory written by :func:`write_trajectory_csv`."""
    with open(path, 'r', encoding='utf-8', newline='') as csv_file:
        rows = list(csv.reader(csv_file))
    if not rows or rows[0][0] != 't' or (len(rows[0]) - 1) % 3 != 0:
        raise SimulationError(f'{path}: not a trajectory CSV')
    dof: int = (len(rows[0]) - 1) // 3
    if rows[0] != trajectory_header(dof):
        raise SimulationError(f'{path}: unexpected header {rows[0]}')
    data = np.array([[float(value) for value in row] for row in rows[1:]], dtype=float).reshape(-1, 1 + 3 * dof)
    dt: float = float(data[1, 0] - data[0, 0]) if data.shape[0] > 1 else 1.0
    return Trajectory(dt=dt, t=data[:, 0], q=data[:, 1:1 + dof], qd=data[:, 1 + dof:1 + 2 * dof], qdd=data[:, 1 + 2 * dof:])
