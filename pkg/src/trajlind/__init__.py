"""Quantum-trajectory simulation of Lindbladians with state-independent jump rates."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConstraintViolation,
    DomainError,
    InvalidInputError,
    NumericalFailure,
    ShapeError,
    TrajlindError,
)
from .lindblad import LindbladModel, check_constraint, load_model
from .trajectory import SimulationBudget, TrajectoryPlan, allocate_budget, compile_trajectory, truncation_order

__all__ = [
    "__version__",
    "ConstraintViolation", "DomainError", "InvalidInputError", "NumericalFailure", "ShapeError", "TrajlindError",
    "LindbladModel", "check_constraint", "load_model",
    "SimulationBudget", "TrajectoryPlan", "allocate_budget", "compile_trajectory", "truncation_order",
]
