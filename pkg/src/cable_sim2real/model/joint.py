""" This module contains the joint description of the cable model"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from cable_sim2real.errors import ModelError

if TYPE_CHECKING:
    from typing import Tuple, Sequence


class JointAxis(Enum):
    """Rotation axes a cable joint can have."""
    PITCH = 'pitch'
    ROLL = 'roll'

    @property
    def unit_vector(self) -> np.ndarray:
        """Axis in the frame of the proximal link: pitch is about y (sagging down is positive), roll about the link axis x."""
        if self is JointAxis.PITCH:
            return np.array([0.0, 1.0, 0.0])
        return np.array([1.0, 0.0, 0.0])


# Canonical order of the axes inside one joint: pitch is applied first, roll about the pitched link axis
AXIS_ORDER: Tuple[JointAxis, ...] = (JointAxis.PITCH, JointAxis.ROLL)

DEFAULT_LIMITS: dict[JointAxis, Tuple[float, float]] = {
    JointAxis.PITCH: (-math.pi / 2.0, math.pi / 2.0),
    JointAxis.ROLL: (0.0, 0.0),
}


@dataclass(frozen=True)
class JointSpec:
    """
    A passive joint between two links.

    An empty set of axes is a fixed weld. All per-axis tuples are aligned with ``axes``.

    Attributes:
        axes (Tuple[JointAxis, ...]): Enabled axes in canonical order (pitch before roll).
        stiffness (Tuple[float, ...]): N*m/rad per enabled axis.
        damping (Tuple[float, ...]): N*m*s/rad per enabled axis.
        limits (Tuple[Tuple[float, float], ...]): [lower, upper] in radians per enabled axis.
    """
    axes: Tuple[JointAxis, ...] = AXIS_ORDER
    stiffness: Tuple[float, ...] = field(default=())
    damping: Tuple[float, ...] = field(default=())
    limits: Tuple[Tuple[float, float], ...] = field(default=())

    def __post_init__(self) -> None:
        # missing per-axis values default to zero stiffness/damping and the axis default limits
        if not self.stiffness:
            object.__setattr__(self, 'stiffness', tuple(0.0 for _ in self.axes))
        if not self.damping:
            object.__setattr__(self, 'damping', tuple(0.0 for _ in self.axes))
        if not self.limits:
            object.__setattr__(self, 'limits', tuple(DEFAULT_LIMITS[axis] for axis in self.axes))
        self.validate()

    def validate(self) -> None:
        """
        Checks the type invariants.

        Raises:
            ModelError: with the offending field as path.
        """
        if len(set(self.axes)) != len(self.axes):
            raise ModelError('axes must not repeat', path='axes')
        if tuple(axis for axis in AXIS_ORDER if axis in self.axes) != tuple(self.axes):
            raise ModelError('axes must be ordered pitch before roll', path='axes')
        for name, values in (('stiffness_nm_per_rad', self.stiffness), ('damping_nms_per_rad', self.damping), ('limits_rad', self.limits)):
            if len(values) != len(self.axes):
                raise ModelError(f'expected {len(self.axes)} values, one per axis', path=name)
        for index, value in enumerate(self.stiffness):
            if not np.isfinite(value) or value < 0:
                raise ModelError('stiffness must be non-negative', path=f'stiffness_nm_per_rad[{index}]')
        for index, value in enumerate(self.damping):
            if not np.isfinite(value) or value < 0:
                raise ModelError('damping must be non-negative', path=f'damping_nms_per_rad[{index}]')
        for index, (lower, upper) in enumerate(self.limits):
            if lower > upper:
                raise ModelError('lower limit must not exceed upper limit', path=f'limits_rad[{index}]')

    @property
    def is_fixed(self) -> bool:
        """True for a weld without any degree of freedom."""
        return not self.axes

    @property
    def dof(self) -> int:
        """Number of enabled axes."""
        return len(self.axes)

    def has_axis(self, axis: JointAxis) -> bool:
        """Returns True if the axis is enabled."""
        return axis in self.axes

    def only(self, keep: Sequence[JointAxis]) -> JointSpec:
        """Returns a copy restricted to the given axes (disabled axes are dropped with their parameters)."""
        indices = [index for index, axis in enumerate(self.axes) if axis in keep]
        return JointSpec(axes=tuple(self.axes[index] for index in indices),
                         stiffness=tuple(self.stiffness[index] for index in indices),
                         damping=tuple(self.damping[index] for index in indices),
                         limits=tuple(self.limits[index] for index in indices))

    def with_axis_parameters(self, axis: JointAxis, stiffness: float | None = None, damping: float | None = None) -> JointSpec:
        """Returns a copy with stiffness and/or damping of one axis replaced."""
        if axis not in self.axes:
            raise ModelError(f'joint has no {axis.value} axis', path='axes')
        index: int = self.axes.index(axis)
        new_stiffness = list(self.stiffness)
        new_damping = list(self.damping)
        if stiffness is not None:
            new_stiffness[index] = float(stiffness)
        if damping is not None:
            new_damping[index] = float(damping)
        return JointSpec(axes=self.axes, stiffness=tuple(new_stiffness), damping=tuple(new_damping), limits=self.limits)


WELD: JointSpec = JointSpec(axes=())
