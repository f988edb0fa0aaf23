from services.objective import (
    BudgetedObjective,
    BudgetExhaustedError,
    InvalidPlacementError,
    Observation,
    Placement,
    ReplayEvaluator,
    SimulationEvaluator,
)
from services.optimizers import OptimizerError, run_bo, run_dgbo, run_ga, run_greedy

__all__ = [
    "BudgetedObjective",
    "BudgetExhaustedError",
    "InvalidPlacementError",
    "Observation",
    "Placement",
    "ReplayEvaluator",
    "SimulationEvaluator",
    "OptimizerError",
    "run_bo",
    "run_dgbo",
    "run_ga",
    "run_greedy",
]
