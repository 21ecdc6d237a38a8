"""Deterministic desk-scale simulation kernel and benchmark harness for
cooperative multi-UAV structural inspection.
"""

__version__ = "0.1.0"

from .geometry import Aabb, CameraIntrinsics, Pose, Quat, Vec3  # noqa: F401
from .world import (  # noqa: F401
    FleetSpec,
    GeneratorSpec,
    InterestPoint,
    LidarSpec,
    OccupancyGrid,
    Scenario,
    ScenarioError,
    UavSpec,
    generate_scenario,
    load_scenario,
    save_scenario,
)
