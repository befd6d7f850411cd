from .checker import AUDIT, assert_feasible, check_solution, recompute_objective
from .core import ENGINES, decompose_paths, solve, solve_saa, solve_second_stage
from .lpformat import to_lp, write_lp
from .model import ModelInstance, build_extensive_form, cheapest_path_cost, default_overflow_penalty
from .types import DeploymentPlan, RoutingSolution, SolveReport, truck_count

__all__ = [
    "AUDIT", "DeploymentPlan", "ENGINES", "ModelInstance", "RoutingSolution", "SolveReport",
    "assert_feasible", "build_extensive_form", "cheapest_path_cost", "check_solution", "decompose_paths",
    "default_overflow_penalty", "recompute_objective", "solve", "solve_saa", "solve_second_stage", "to_lp",
    "truck_count", "write_lp",
]
