"""Module containing the exceptions raised by cable_sim2real."""
from __future__ import annotations
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from typing import Optional, Sequence, Tuple


class CableSim2RealError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CableSim2RealError):
    """
    Error in a configuration or settings document.

    Args:
        message (str): Human readable description of the problem.
        path (str, optional): Key path inside the document, e.g. ``cable.links[3].mass_kg``.
    """
    def __init__(self, message: str, path: Optional[str] = None) -> None:
        self.path: Optional[str] = path
        self.message: str = message
        super().__init__(f'{path}: {message}' if path else message)


class ModelError(ConfigurationError):
    """A cable model or one of its parts violates a type invariant."""


class DimensionError(CableSim2RealError):
    """Vectors or matrices do not match the dimension of the model."""


class JointLimitError(CableSim2RealError):
    """A joint position lies outside of its limits."""


class SimulationError(CableSim2RealError):
    """Time integration could not proceed (degenerate model, invalid step size)."""


class ConvergenceError(CableSim2RealError):
    """
    An iterative solver did not converge.

    Args:
        message (str): Description of the failure.
        residual (float): Final residual norm.
        iterations (int): Number of iterations performed.
    """
    def __init__(self, message: str, residual: float, iterations: int) -> None:
        self.residual: float = residual
        self.iterations: int = iterations
        super().__init__(f'{message} (residual {residual:.3e} after {iterations} iterations)')


class PoseLogError(CableSim2RealError):
    """A pose log or its tag layout is malformed or incomplete."""


class IdentificationError(CableSim2RealError):
    """Stiffness or damping cannot be identified from the given samples."""


class CurveFitError(CableSim2RealError):
    """A point cloud cannot be fitted or sampled."""


class ServoError(CableSim2RealError):
    """The resolved-rate controller cannot compute a command."""


class DivergenceError(ServoError):
    """
    The servo loop diverged.

    Args:
        message (str): Description of the failure.
        error_history (Sequence[Tuple[float, float]]): Position and rotation error per iteration.
    """
    def __init__(self, message: str, error_history: Sequence[Tuple[float, float]]) -> None:
        self.error_history: Sequence[Tuple[float, float]] = error_history
        super().__init__(message)


class ReportError(CableSim2RealError):
    """Comparison report inputs are inconsistent."""


class StoreError(CableSim2RealError):
    """Results could not be written to or read from the result store."""


class KinematicsError(CableSim2RealError):
    """A kinematic quantity is undefined for the given configuration or point."""
