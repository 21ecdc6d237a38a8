"""Mission planners: named strategies plus the protocol for writing new ones."""

from .base import (  # noqa: F401
    BasePlanner,
    Observation,
    available_planners,
    make_planner,
    register,
)
from .belief import BeliefMap, generate_inspection_waypoints, grid_shortest_path  # noqa: F401
from .executor import Leg, WaypointExecutor  # noqa: F401

# importing the strategy modules registers them by name
from . import grid_sweep  # noqa: F401,E402
