""" This module estimates joint velocities and accelerations from sampled joint positions"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import ndimage

from cable_sim2real.errors import PoseLogError
from cable_sim2real.model.state import ChainState

if TYPE_CHECKING:
    from typing import List, Optional, Sequence, Tuple

    from cable_sim2real.model.state import ExternalLoad

LOG: logging.Logger = logging.getLogger("cable_sim2real.identification.differentiation")

MIN_SAMPLES: int = 5
DEFAULT_WINDOW: int = 5
# Log spacings above this many resampling steps are gaps
GAP_FACTOR: float = 1.5
# Median absolute deviation to standard deviation of a normal distribution
MAD_SCALE: float = 1.4826


@dataclass(frozen=True, eq=False)
class StateSample:
    """
    One differentiated sample of the identification chain.

    Attributes:
        t (float): Time in seconds.
        state (ChainState): Smoothed positions with estimated velocities and accelerations.
        quality (np.ndarray): Absolute smoothing residual per joint in rad.
        reliable (bool): False near the ends of the log and around gaps, where one-sided differences, padding or interpolation
            entered the estimate.
        loads (Tuple[ExternalLoad, ...]): Loads acting at this sample, empty to use the loads of the experiment.
        velocity_noise (np.ndarray, optional): Estimated standard deviation of the velocity per joint in rad/s.
    """
    t: float
    state: ChainState
    quality: np.ndarray
    reliable: bool = True
    loads: Tuple[ExternalLoad, ...] = field(default=())
    velocity_noise: Optional[np.ndarray] = None


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average along the first axis, edges padded with the first and last value."""
    if window < 1 or window % 2 == 0:
        raise PoseLogError(f'smoothing window must be a positive odd number, got {window}')
    half: int = window // 2
    padded = np.pad(values, [(half, half)] + [(0, 0)] * (values.ndim - 1), mode='edge')
    kernel = np.ones(window) / window
    return np.apply_along_axis(lambda column: np.convolve(column, kernel, mode='valid'), 0, padded)


def smooth(values: np.ndarray, window: int, passes: int = 1) -> np.ndarray:
    """Applies :func:`moving_average` ``passes`` times, two passes give a triangular kernel."""
    if passes < 1:
        raise PoseLogError(f'smoothing needs at least one pass, got {passes}')
    smoothed = np.asarray(values, dtype=float)
    for _ in range(passes):
        smoothed = moving_average(smoothed, window)
    return smoothed


def first_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Central differences, three-point one-sided differences at both ends."""
    result = np.empty_like(values)
    result[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    result[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt)
    result[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dt)
    return result


def second_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Central second differences, four-point one-sided differences at both ends."""
    result = np.empty_like(values)
    result[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / dt ** 2
    result[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / dt ** 2
    result[-1] = (2.0 * values[-1] - 5.0 * values[-2] + 4.0 * values[-3] - values[-4]) / dt ** 2
    return result


def resample(times: np.ndarray, positions: np.ndarray, dt: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear interpolation onto a uniform grid starting at the first timestamp; ``dt`` defaults to the median spacing.

    Raises:
        PoseLogError: for too few samples or timestamps that do not increase strictly.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    positions = np.asarray(positions, dtype=float).reshape(times.size, -1)
    if times.size < MIN_SAMPLES:
        raise PoseLogError(f'need at least {MIN_SAMPLES} samples, got {times.size}')
    if np.any(np.diff(times) <= 0):
        raise PoseLogError('timestamps must increase strictly')
    step: float = float(np.median(np.diff(times))) if dt is None else float(dt)
    if not step > 0:
        raise PoseLogError(f'resampling step must be positive, got {step}')
    count: int = int(np.floor((times[-1] - times[0]) / step + 1e-9)) + 1
    grid = times[0] + np.arange(count) * step
    if count < MIN_SAMPLES:
        raise PoseLogError(f'need at least {MIN_SAMPLES} samples after resampling, got {count}')
    resampled = np.column_stack([np.interp(grid, times, positions[:, joint]) for joint in range(positions.shape[1])])
    return grid, resampled


def gap_mask(times: np.ndarray, grid: np.ndarray, step: float) -> np.ndarray:
    """True for grid points interpolated between two log samples more than ``GAP_FACTOR`` steps apart."""
    times = np.asarray(times, dtype=float).reshape(-1)
    following = np.clip(np.searchsorted(times, grid, side='left'), 1, times.size - 1)
    spacing = times[following] - times[following - 1]
    return spacing > GAP_FACTOR * step


def kernel_gains(window: int, passes: int, step: float) -> Tuple[float, float]:
    """
    Noise gains of the smoothing and differentiation chain for white position noise of unit variance.

    Returns:
        Tuple[float, float]: Standard deviation of the smoothing residual and of the velocity estimate.
    """
    reach: int = passes * (window // 2)
    impulse = np.zeros(4 * reach + 5)
    impulse[impulse.size // 2] = 1.0
    smoothed = smooth(impulse, window, passes)
    velocity = first_derivative(smoothed, step)
    return float(np.linalg.norm(impulse - smoothed)), float(np.linalg.norm(velocity))


# pylint: disable-next=too-many-arguments, too-many-positional-arguments, too-many-locals
def differentiate_log(times: Sequence[float], positions: np.ndarray, window: int = DEFAULT_WINDOW,
                      dt: Optional[float] = None, passes: int = 1) -> List[StateSample]:
    """
    Resamples joint positions to a uniform grid, smooths them with ``passes`` moving averages of ``window`` samples and
    differentiates the smoothed signal with central differences.

    Args:
        times (Sequence[float]): Sample times in seconds, strictly increasing.
        positions (np.ndarray): Joint positions, one row per sample.
        window (int): Odd moving-average length in samples.
        dt (float, optional): Uniform step, defaults to the median spacing of ``times``.
        passes (int): Number of moving-average passes.

    Returns:
        List[StateSample]: One sample per grid point. Samples influenced by padding, one-sided differences or gaps in the log
        are not reliable.
    """
    times_array = np.asarray(times, dtype=float).reshape(-1)
    grid, raw = resample(times_array, np.asarray(positions, dtype=float), dt)
    step: float = float(grid[1] - grid[0])
    if window > grid.size:
        raise PoseLogError(f'smoothing window {window} longer than the log ({grid.size} samples)')
    smoothed = smooth(raw, window, passes)
    velocities = first_derivative(smoothed, step)
    accelerations = second_derivative(smoothed, step)
    residual = raw - smoothed
    reach: int = passes * (window // 2) + 1
    reliable = np.zeros(grid.size, dtype=bool)
    reliable[reach:grid.size - reach] = True
    gaps = gap_mask(times_array, grid, step)
    if np.any(gaps):
        LOG.debug('%d grid points fall into gaps of the log', int(np.count_nonzero(gaps)))
        reliable &= ~ndimage.binary_dilation(gaps, structure=np.ones(2 * reach + 1, dtype=bool))
    velocity_noise = np.zeros(raw.shape[1])
    if np.any(reliable):
        central = residual[reliable]
        spread = MAD_SCALE * np.median(np.abs(central - np.median(central, axis=0)), axis=0)
        residual_gain, velocity_gain = kernel_gains(window, passes, step)
        velocity_noise = spread / residual_gain * velocity_gain
    LOG.debug('Differentiated %d samples with dt %s, window %d and %d passes, velocity noise %s', grid.size, step, window, passes,
              velocity_noise)
    quality = np.abs(residual)
    return [StateSample(t=float(grid[index]), state=ChainState(q=smoothed[index], qd=velocities[index], qdd=accelerations[index]),
                        quality=quality[index], reliable=bool(reliable[index]), velocity_noise=velocity_noise)
            for index in range(grid.size)]


def velocity_thresholds(samples: Sequence[StateSample], threshold: float | Sequence[float], noise_floor_factor: float = 0.0) -> np.ndarray:
    """
    Per joint speed thresholds: ``threshold`` raised to ``noise_floor_factor`` times the estimated velocity noise.

    Raises:
        PoseLogError: if there are no samples.
    """
    if not samples:
        raise PoseLogError('no samples')
    base = np.broadcast_to(np.asarray(threshold, dtype=float), (samples[0].state.dof,))
    noise = samples[0].velocity_noise
    if noise is None or noise_floor_factor <= 0.0:
        return np.array(base)
    return np.maximum(base, noise_floor_factor * np.asarray(noise, dtype=float))


# pylint: disable-next=too-many-arguments, too-many-positional-arguments
def split_samples(samples: Sequence[StateSample], velocity_threshold: float | Sequence[float] = 1e-3,
                  dynamic_threshold: float | Sequence[float] = 1e-2, tail_duration: float = 0.5,
                  noise_floor_factor: float = 0.0) -> Tuple[List[StateSample], List[StateSample]]:
    """
    Splits reliable samples into the stationary tail and the dynamic samples before it.

    The tail is the final contiguous run of reliable samples with every joint velocity below its threshold; trailing unreliable
    samples are skipped, any other unreliable sample ends the run. Dynamic samples precede the tail, are reliable and have at least
    one joint velocity above its dynamic threshold. With ``noise_floor_factor`` both thresholds are raised to that multiple of the
    estimated velocity noise of each joint.

    Raises:
        PoseLogError: if the stationary tail is shorter than ``tail_duration`` seconds.
    """
    if not samples:
        raise PoseLogError('no samples')
    still = velocity_thresholds(samples, velocity_threshold, noise_floor_factor)
    moving = velocity_thresholds(samples, dynamic_threshold, noise_floor_factor)
    end: int = len(samples)
    while end > 0 and not samples[end - 1].reliable:
        end -= 1
    tail_start: int = end
    while tail_start > 0 and samples[tail_start - 1].reliable and np.all(np.abs(samples[tail_start - 1].state.qd) < still):
        tail_start -= 1
    static: List[StateSample] = list(samples[tail_start:end])
    if not static or static[-1].t - static[0].t < tail_duration - 1e-9:
        duration: float = static[-1].t - static[0].t if static else 0.0
        raise PoseLogError(f'no stationary tail of {tail_duration} s in the log (found {duration:.3f} s below '
                           f'{np.array2string(still, precision=3)} rad/s)')
    dynamic: List[StateSample] = [sample for sample in samples[:tail_start]
                                  if sample.reliable and np.any(np.abs(sample.state.qd) > moving)]
    LOG.debug('Split into %d static and %d dynamic samples', len(static), len(dynamic))
    return static, dynamic
