""" This module contains the rigid link description of the cable model"""
from __future__ import annotations
from typing import TYPE_CHECKING

from dataclasses import dataclass

import numpy as np

from cable_sim2real.errors import ModelError

if TYPE_CHECKING:
    from typing import Tuple

    Inertia = Tuple[Tuple[float, float, float], Tuple[float, float, float], Tuple[float, float, float]]

# Nominal cable radius, only used for the (tiny) axial inertia of a slender rod
DEFAULT_RADIUS: float = 0.005


@dataclass(frozen=True)
class LinkSpec:
    """
    A rigid link of the cable.

    The link frame has its x-axis along the link, its origin at the proximal joint.

    Attributes:
        length (float): Length of the link in meters.
        mass (float): Mass of the link in kilograms.
        com_offset (float): Distance in meters from the proximal joint to the center of mass, measured along the link axis.
        inertia (Inertia): 3x3 rotational inertia about the center of mass in the link frame, kg*m^2.
    """
    length: float
    mass: float
    com_offset: float
    inertia: Inertia

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """
        Checks the type invariants.

        Raises:
            ModelError: with the offending field as path.
        """
        if not np.isfinite(self.length) or self.length <= 0:
            raise ModelError('length must be positive', path='length_m')
        if not np.isfinite(self.mass) or self.mass <= 0:
            raise ModelError('mass must be positive', path='mass_kg')
        if not 0.0 <= self.com_offset <= self.length:
            raise ModelError('center of mass offset must lie within the link', path='com_offset_m')
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3) or not np.all(np.isfinite(inertia)):
            raise ModelError('inertia must be a finite 3x3 matrix', path='inertia_kgm2')
        scale: float = max(float(np.max(np.abs(inertia))), 1e-300)
        if np.max(np.abs(inertia - inertia.T)) > 1e-12 * scale:
            raise ModelError('inertia must be symmetric', path='inertia_kgm2')
        if np.min(np.linalg.eigvalsh(inertia)) < -1e-12 * scale:
            raise ModelError('inertia must be positive semi-definite', path='inertia_kgm2')

    @property
    def inertia_matrix(self) -> np.ndarray:
        """Inertia tensor about the center of mass as numpy array."""
        return np.array(self.inertia, dtype=float)

    @classmethod
    def slender_rod(cls, length: float, mass: float, com_offset: float | None = None, radius: float = DEFAULT_RADIUS) -> LinkSpec:
        """
        Uniform slender rod: (1/12)*m*L^2 about the transverse axes, 0.5*m*r^2 about the link axis.
        """
        transverse: float = mass * length ** 2 / 12.0
        axial: float = 0.5 * mass * radius ** 2
        return cls(length=length, mass=mass, com_offset=length / 2.0 if com_offset is None else com_offset,
                   inertia=((axial, 0.0, 0.0), (0.0, transverse, 0.0), (0.0, 0.0, transverse)))
