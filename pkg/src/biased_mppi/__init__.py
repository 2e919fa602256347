"""Sampling-based MPC with ancillary-controller sample injection."""

from ._accel import backend
from .engine import (
    GAUSSIAN,
    PlanConfig,
    Planner,
    PlannerState,
    RolloutBatch,
    RolloutError,
    StepResult,
    WeightedBatch,
    compute_weights,
    draw_samples,
    plan_step,
    shift_plan,
    update_lambda,
    update_plan,
)

__version__ = "0.1.0"

__all__ = [
    "GAUSSIAN",
    "PlanConfig",
    "Planner",
    "PlannerState",
    "RolloutBatch",
    "RolloutError",
    "StepResult",
    "WeightedBatch",
    "backend",
    "compute_weights",
    "draw_samples",
    "plan_step",
    "shift_plan",
    "update_lambda",
    "update_plan",
]
