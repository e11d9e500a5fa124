""" This module fits the geometric cable model, two quadratic projections over a common axis, to a point cloud"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass
import csv
import logging
import math

import numpy as np
from scipy.integrate import quad
from scipy.linalg import qr, solve_triangular
from scipy.optimize import brentq

from cable_sim2real.errors import CurveFitError

if TYPE_CHECKING:
    from typing import List, Optional, Sequence, Tuple
    from pathlib import Path

LOG: logging.Logger = logging.getLogger("cable_sim2real.curve_fit")

AXIS_LABELS: Tuple[str, ...] = ('x', 'y', 'z')
MIN_EXTENT: float = 0.01
DEFAULT_SAMPLE_COUNT: int = 50


@dataclass(frozen=True)
class QuadraticFit:
    """
    Least-squares quadratic v = c2 u^2 + c1 u + c0.

    Attributes:
        coeffs (Tuple[float, float, float]): (c2, c1, c0).
        residual (float): Euclidean norm of the residual vector.
        rms (float): Root mean square residual.
    """
    coeffs: Tuple[float, float, float]
    residual: float
    rms: float

    def __call__(self, u: np.ndarray | float) -> np.ndarray:
        return np.polyval(self.coeffs, u)


@dataclass(frozen=True)
class PolyCurve3D:
    """
    Curve given by two quadratic projections over a common coordinate axis.

    Attributes:
        axis (str): Label of the parameter axis.
        coeffs_a (Tuple[float, float, float]): Quadratic of the first transverse coordinate in label order.
        coeffs_b (Tuple[float, float, float]): Quadratic of the second transverse coordinate.
        param_range (Tuple[float, float]): Covered interval of the parameter axis in meters.
        rms_residual (float): Root mean square distance of the fitted points from the curve in meters.
        tip_at_max (bool): True if the cable tip lies at the upper end of the parameter range.
    """
    axis: str
    coeffs_a: Tuple[float, float, float]
    coeffs_b: Tuple[float, float, float]
    param_range: Tuple[float, float]
    rms_residual: float = 0.0
    tip_at_max: bool = True

    def __post_init__(self) -> None:
        if self.axis not in AXIS_LABELS:
            raise CurveFitError(f'unknown axis label {self.axis}')
        if not self.param_range[0] < self.param_range[1]:
            raise CurveFitError(f'parameter range {self.param_range} is empty')
        if not self.rms_residual >= 0:
            raise CurveFitError('rms residual must not be negative')

    @property
    def axis_index(self) -> int:
        """Coordinate index of the parameter axis."""
        return AXIS_LABELS.index(self.axis)

    @property
    def transverse_indices(self) -> Tuple[int, int]:
        """Coordinate indices described by ``coeffs_a`` and ``coeffs_b``."""
        first, second = (index for index in range(3) if index != self.axis_index)
        return first, second

    def evaluate(self, u: np.ndarray | float) -> np.ndarray:
        """Points of the curve at parameter values, shape (..., 3)."""
        u = np.asarray(u, dtype=float)
        first, second = self.transverse_indices
        points = np.zeros(u.shape + (3,))
        points[..., self.axis_index] = u
        points[..., first] = np.polyval(self.coeffs_a, u)
        points[..., second] = np.polyval(self.coeffs_b, u)
        return points

    def derivative(self, u: np.ndarray | float) -> np.ndarray:
        """Derivative of the curve with respect to the parameter."""
        u = np.asarray(u, dtype=float)
        first, second = self.transverse_indices
        derivative = np.zeros(u.shape + (3,))
        derivative[..., self.axis_index] = 1.0
        derivative[..., first] = 2.0 * self.coeffs_a[0] * u + self.coeffs_a[1]
        derivative[..., second] = 2.0 * self.coeffs_b[0] * u + self.coeffs_b[1]
        return derivative

    def arc_length(self, start: float, stop: float) -> float:
        """Arc length between two parameter values by adaptive quadrature."""
        value, _ = quad(lambda u: float(np.linalg.norm(self.derivative(u))), start, stop, epsabs=1e-13, epsrel=1e-12, limit=200)
        return float(value)


@dataclass(frozen=True)
class GraspPoint:
    """
    Attributes:
        point (np.ndarray): Position on the curve in meters.
        tangent (np.ndarray): Unit tangent in the direction of the increasing parameter.
        parameter (float): Parameter value of the point.
    """
    point: np.ndarray
    tangent: np.ndarray
    parameter: float


def fit_quadratic_projection(points: Sequence[Tuple[float, float]] | np.ndarray) -> QuadraticFit:
    """
    Least-squares quadratic through (u, v) pairs, solved by QR factorization of the Vandermonde matrix.

    Raises:
        CurveFitError: for fewer than three points or fewer than three distinct u values.
    """
    pairs = np.asarray(points, dtype=float).reshape(-1, 2)
    if pairs.shape[0] < 3:
        raise CurveFitError(f'need at least 3 points, got {pairs.shape[0]}')
    u, v = pairs[:, 0], pairs[:, 1]
    if np.unique(u).size < 3:
        raise CurveFitError('rank-deficient fit: fewer than 3 distinct parameter values')
    design = np.column_stack([u ** 2, u, np.ones_like(u)])
    orthogonal, upper = qr(design, mode='economic')
    if np.min(np.abs(np.diag(upper))) <= 1e-12 * np.max(np.abs(np.diag(upper))):
        raise CurveFitError('rank-deficient fit')
    coeffs = solve_triangular(upper, orthogonal.T @ v)
    residuals = design @ coeffs - v
    return QuadraticFit(coeffs=(float(coeffs[0]), float(coeffs[1]), float(coeffs[2])), residual=float(np.linalg.norm(residuals)),
                        rms=float(np.sqrt(np.mean(residuals ** 2))))


def _fit_on_axis(cloud: np.ndarray, axis: int, tip_at_max: bool) -> Tuple[PolyCurve3D, np.ndarray]:
    first, second = (index for index in range(3) if index != axis)
    u = cloud[:, axis]
    fit_a = fit_quadratic_projection(np.column_stack([u, cloud[:, first]]))
    fit_b = fit_quadratic_projection(np.column_stack([u, cloud[:, second]]))
    distances = np.hypot(fit_a(u) - cloud[:, first], fit_b(u) - cloud[:, second])
    curve = PolyCurve3D(axis=AXIS_LABELS[axis], coeffs_a=fit_a.coeffs, coeffs_b=fit_b.coeffs,
                        param_range=(float(np.min(u)), float(np.max(u))), rms_residual=float(np.sqrt(np.mean(distances ** 2))),
                        tip_at_max=tip_at_max)
    return curve, distances


def fit_curve3d(cloud: Sequence[Sequence[float]] | np.ndarray, trim_fraction: float = 0.0, tip_hint: Optional[Sequence[float]] = None) -> PolyCurve3D:
    """
    Fits the geometric cable model to a point cloud.

    The parameter axis is the coordinate with the largest extent, ties resolved in x, y, z order. With ``trim_fraction`` the
    given share of points farthest from the first fit is dropped and the curve refitted. ``tip_hint`` selects the end of the
    parameter range nearest to it as cable tip, otherwise the upper end.

    Raises:
        CurveFitError: for fewer than three points or an extent of at most 1 cm along the parameter axis.
    """
    points = np.asarray(cloud, dtype=float).reshape(-1, 3)
    if points.shape[0] < 3:
        raise CurveFitError(f'need at least 3 points, got {points.shape[0]}')
    if not np.all(np.isfinite(points)):
        raise CurveFitError('point cloud contains non-finite coordinates')
    extents = np.ptp(points, axis=0)
    axis: int = int(np.argmax(extents))
    if extents[axis] <= MIN_EXTENT:
        raise CurveFitError(f'degenerate cloud: largest extent {extents[axis]:.4f} m is not above {MIN_EXTENT} m')
    tip_at_max: bool = True
    if tip_hint is not None:
        hint = np.asarray(tip_hint, dtype=float)
        tip_at_max = abs(hint[axis] - np.max(points[:, axis])) <= abs(hint[axis] - np.min(points[:, axis]))
    curve, distances = _fit_on_axis(points, axis, tip_at_max)
    if trim_fraction > 0:
        if not trim_fraction < 1:
            raise CurveFitError('trim fraction must be below 1')
        keep: int = max(3, points.shape[0] - int(math.ceil(trim_fraction * points.shape[0])))
        kept = points[np.argsort(distances, kind='stable')[:keep]]
        curve, _ = _fit_on_axis(kept, axis, tip_at_max)
        LOG.debug('Refitted after trimming %d of %d points', points.shape[0] - keep, points.shape[0])
    LOG.info('Fitted curve along %s over [%.4f, %.4f] m, rms residual %.3e m', curve.axis, curve.param_range[0], curve.param_range[1],
             curve.rms_residual)
    return curve


def sample_curve(curve: PolyCurve3D, count: int = DEFAULT_SAMPLE_COUNT) -> np.ndarray:
    """
    ``count`` points at uniform parameter spacing over the parameter range, ordered by the parameter.

    Raises:
        CurveFitError: if ``count`` is below 2.
    """
    if count < 2:
        raise CurveFitError(f'need at least 2 samples, got {count}')
    return curve.evaluate(np.linspace(curve.param_range[0], curve.param_range[1], count))


def curve_arc_length(curve: PolyCurve3D) -> float:
    """Arc length over the whole parameter range."""
    return curve.arc_length(*curve.param_range)


def polyline_length(points: np.ndarray) -> float:
    """Length of the polyline connecting consecutive points."""
    return float(np.sum(np.linalg.norm(np.diff(np.asarray(points, dtype=float), axis=0), axis=1)))


def grasp_point(curve: PolyCurve3D, arclength_from_tip: float) -> GraspPoint:
    """
    Point at the given arc length from the cable tip and the unit tangent there.

    Raises:
        CurveFitError: if the arc length is negative or longer than the curve.
    """
    lower, upper = curve.param_range
    total: float = curve_arc_length(curve)
    if arclength_from_tip < 0 or arclength_from_tip > total + 1e-12:
        raise CurveFitError(f'arc length {arclength_from_tip} m outside of [0, {total:.6f}] m')
    tip: float = upper if curve.tip_at_max else lower
    if arclength_from_tip == 0.0:
        parameter: float = tip
    elif arclength_from_tip >= total:
        parameter = lower if curve.tip_at_max else upper
    elif curve.tip_at_max:
        parameter = float(brentq(lambda u: curve.arc_length(u, upper) - arclength_from_tip, lower, upper, xtol=1e-14, rtol=1e-14))
    else:
        parameter = float(brentq(lambda u: curve.arc_length(lower, u) - arclength_from_tip, lower, upper, xtol=1e-14, rtol=1e-14))
    derivative = curve.derivative(parameter)
    return GraspPoint(point=curve.evaluate(parameter), tangent=derivative / np.linalg.norm(derivative), parameter=parameter)


def read_point_cloud_csv(path: Path) -> np.ndarray:
    """
    Reads ``x,y,z`` rows in meters, an optional header line is skipped.

    Raises:
        CurveFitError: for an unreadable file or malformed rows.
    """
    try:
        with open(path, 'r', encoding='utf-8', newline='') as csv_file:
            rows = [row for row in csv.reader(csv_file) if row]
    except OSError as err:
        raise CurveFitError(f'{path}: cannot read point cloud: {err.strerror}') from err
    if rows and [value.strip() for value in rows[0]] == list(AXIS_LABELS):
        rows = rows[1:]
    try:
        points: List[List[float]] = [[float(value) for value in row] for row in rows]
    except ValueError as err:
        raise CurveFitError(f'{path}: {err}') from err
    if any(len(row) != 3 for row in points):
        raise CurveFitError(f'{path}: every row needs exactly three coordinates')
    return np.array(points, dtype=float).reshape(-1, 3)


def write_polyline_csv(points: np.ndarray, path: Path) -> None:
    """Writes ordered ``x,y,z`` rows."""
    with open(path, 'w', encoding='utf-8', newline='') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(AXIS_LABELS)
        for point in np.asarray(points, dtype=float).reshape(-1, 3):
            writer.writerow([f'{value:.9g}' for value in point])
