"""Max-min user-carrier allocation with carrier aggregation for multibeam satellites."""
from .model import (
    Beam,
    Carrier,
    LinkParams,
    Scenario,
    SolverParams,
    User,
    load_scenario,
    save_scenario,
    swap_distance,
    validate_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Beam",
    "Carrier",
    "LinkParams",
    "Scenario",
    "SolverParams",
    "User",
    "load_scenario",
    "save_scenario",
    "swap_distance",
    "validate_scenario",
]
