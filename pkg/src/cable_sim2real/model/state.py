""" This module contains the chain state and external load types"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass, field
import logging

import numpy as np

from cable_sim2real.errors import DimensionError, JointLimitError, ModelError

if TYPE_CHECKING:
    from typing import Iterable, Optional, Sequence

    from cable_sim2real.model.cable import CableModel

LOG: logging.Logger = logging.getLogger("cable_sim2real.model.state")

# Slack for limit checks, positions produced by clamping sit exactly on the limit
LIMIT_TOLERANCE: float = 1e-9


@dataclass(frozen=True, eq=False)
class ChainState:
    """
    Joint positions, velocities and accelerations of the chain in state-vector order.

    Attributes:
        q (np.ndarray): Joint positions in rad.
        qd (np.ndarray): Joint velocities in rad/s.
        qdd (np.ndarray): Joint accelerations in rad/s^2.
    """
    q: np.ndarray
    qd: np.ndarray = field(default=None)  # type: ignore[assignment]
    qdd: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        q = np.array(self.q, dtype=float).reshape(-1)
        object.__setattr__(self, 'q', q)
        for name in ('qd', 'qdd'):
            value = getattr(self, name)
            value = np.zeros_like(q) if value is None else np.array(value, dtype=float).reshape(-1)
            if value.shape != q.shape:
                raise DimensionError(f'{name} has dimension {value.size}, q has {q.size}')
            object.__setattr__(self, name, value)
        for array in (self.q, self.qd, self.qdd):
            array.setflags(write=False)

    @property
    def dof(self) -> int:
        """Dimension of the state."""
        return int(self.q.size)

    @classmethod
    def zeros(cls, dof: int) -> ChainState:
        """State at rest in the straight configuration."""
        return cls(q=np.zeros(dof))

    def with_values(self, q: Optional[np.ndarray] = None, qd: Optional[np.ndarray] = None, qdd: Optional[np.ndarray] = None) -> ChainState:
        """Returns a copy with some of the vectors replaced."""
        return ChainState(q=self.q if q is None else q, qd=self.qd if qd is None else qd, qdd=self.qdd if qdd is None else qdd)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChainState):
            return NotImplemented
        return bool(np.array_equal(self.q, other.q) and np.array_equal(self.qd, other.qd) and np.array_equal(self.qdd, other.qdd))

    def __hash__(self) -> int:
        return hash((self.q.tobytes(), self.qd.tobytes(), self.qdd.tobytes()))


def check_state(model: CableModel, state: ChainState, check_limits: bool = True) -> None:
    """
    Verifies that the state fits the model.

    Raises:
        DimensionError: if the dimension differs from the model DOF count.
        JointLimitError: if a position lies outside of its limits.
    """
    if state.dof != model.dof:
        raise DimensionError(f'state has dimension {state.dof}, model has {model.dof} DOF')
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.qd)) and np.all(np.isfinite(state.qdd))):
        raise DimensionError('state contains non-finite values')
    if check_limits:
        check_limits_of(model, state.q)


def check_limits_of(model: CableModel, q: np.ndarray) -> None:
    """
    Raises:
        JointLimitError: naming the first joint position outside of its limits.
    """
    lower: np.ndarray = model.lower_limits
    upper: np.ndarray = model.upper_limits
    violating = np.nonzero((q < lower - LIMIT_TOLERANCE) | (q > upper + LIMIT_TOLERANCE))[0]
    if violating.size > 0:
        index: int = int(violating[0])
        joint_index, axis = model.dof_axes[index]
        raise JointLimitError(f'q[{index}] = {q[index]:.6g} rad outside of [{lower[index]:.6g}, {upper[index]:.6g}] '
                              f'({axis.value} of joint {joint_index})')


@dataclass(frozen=True, eq=False)
class ExternalLoad:
    """
    A wrench applied to the cable at a point on one link.

    Attributes:
        link (int): Index into ``CableModel.links``.
        offset (float): Distance in meters from the proximal end of the link along its axis.
        wrench (np.ndarray): Force (N) and torque (N*m) applied to the cable, world frame.
    """
    link: int
    offset: float
    wrench: np.ndarray

    def __post_init__(self) -> None:
        wrench = np.array(self.wrench, dtype=float).reshape(-1)
        if wrench.shape != (6,) or not np.all(np.isfinite(wrench)):
            raise ModelError('wrench must be a finite 6-vector', path='wrench')
        wrench.setflags(write=False)
        object.__setattr__(self, 'wrench', wrench)
        object.__setattr__(self, 'offset', float(self.offset))

    @property
    def force(self) -> np.ndarray:
        """Force part of the wrench."""
        return self.wrench[:3]

    @property
    def torque(self) -> np.ndarray:
        """Torque part of the wrench."""
        return self.wrench[3:]

    def scaled(self, factor: float) -> ExternalLoad:
        """Returns the load with the wrench multiplied by ``factor``."""
        return ExternalLoad(link=self.link, offset=self.offset, wrench=self.wrench * factor)


def validate_load(model: CableModel, load: ExternalLoad) -> None:
    """
    Raises:
        ModelError: if the attachment link does not exist or the offset lies outside of the link.
    """
    if not 0 <= load.link < len(model.links):
        raise ModelError(f'attachment link {load.link} does not exist', path='attachment.link')
    if not 0.0 <= load.offset <= model.links[load.link].length:
        raise ModelError(f'offset {load.offset} outside of link length {model.links[load.link].length}', path='attachment.offset_m')


def validate_loads(model: CableModel, loads: Optional[Iterable[ExternalLoad]]) -> Sequence[ExternalLoad]:
    """Validates all loads and returns them as tuple."""
    checked = tuple(loads) if loads is not None else ()
    for load in checked:
        validate_load(model, load)
    return checked


def tip_weight(model: CableModel, mass: float) -> ExternalLoad:
    """A hanging weight of ``mass`` kilograms at the distal end of the last link."""
    if mass < 0:
        raise ModelError('weight mass must not be negative', path='tip_mass_kg')
    force = mass * model.gravity_vector
    return ExternalLoad(link=len(model.links) - 1, offset=model.links[-1].length, wrench=np.concatenate([force, np.zeros(3)]))
