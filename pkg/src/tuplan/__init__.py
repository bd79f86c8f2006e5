"""Multi-robot task assignment and path planning on Petri nets via LP relaxations."""

from .errors import Infeasible, TuplanError
from .petri import Rmpn, grid_to_rmpn
from .planner import CollisionMode, PlanConfig, PlanOutcome, plan
from .spec import CnfFormula, encode_cnf

__version__ = "0.1.0"

__all__ = [
    "CnfFormula",
    "CollisionMode",
    "Infeasible",
    "PlanConfig",
    "PlanOutcome",
    "Rmpn",
    "TuplanError",
    "encode_cnf",
    "grid_to_rmpn",
    "plan",
]
