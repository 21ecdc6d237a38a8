"""Simulation engine: flight dynamics, sensors, and the mission tick loop."""

from .types import (  # noqa: F401
    GROUNDED_TICK_LIMIT,
    MAP_SYNC_INTERVAL_TICKS,
    TICK_S,
    Command,
    ControlState,
    LidarScan,
    PeerInfo,
    PlannerBrief,
    SimEvent,
    UavState,
)
from .dynamics import apply_command, clamp_into_volume, desired_velocity, step_uav  # noqa: F401
from .lidar import fibonacci_directions, scan, scan_directions  # noqa: F401
from .mission import MissionResult, MissionRunner, run_mission  # noqa: F401
