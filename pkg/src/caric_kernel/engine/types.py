"""Shared simulation types and fixed control-loop constants.

This module is intentionally dependency-light (geometry only) so that both
the engine and the planners can import it without cycles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from ..geometry import Pose, Vec3, camera_pose, vnorm

TICK_S = 0.1  # control/physics step; lidar and comms share the same cadence

BODY_YAW_RATE_RAD_S = math.pi  # how fast the airframe can swing its nose
GIMBAL_RATE_RAD_S = math.pi  # gimbal slews half a turn per second
GIMBAL_PITCH_MIN_RAD = -2.0 * math.pi / 3.0  # 120 degrees down
GIMBAL_PITCH_MAX_RAD = math.pi / 6.0  # 30 degrees up
BRAKING_FACTOR = 0.6  # fraction of max decel assumed when approaching a goal

MAP_SYNC_INTERVAL_TICKS = 10  # explorers share map updates at this cadence
GROUNDED_TICK_LIMIT = 600  # give up if nobody lifts off within this many ticks


@dataclass
class UavState:
    """Physical state of one airframe, advanced by the engine each tick."""

    name: str
    role: str
    position: Vec3
    velocity: Vec3 = Vec3(0.0, 0.0, 0.0)
    yaw: float = 0.0
    gimbal_pitch: float = 0.0
    gimbal_yaw: float = 0.0
    airborne: bool = False
    collided: bool = False
    collided_tick: Optional[int] = None

    def speed(self) -> float:
        return vnorm(self.velocity)

    def camera_pose(self) -> Pose:
        return camera_pose(self.position, self.yaw, self.gimbal_pitch, self.gimbal_yaw)

    def copy(self) -> "UavState":
        return UavState(
            name=self.name,
            role=self.role,
            position=self.position,
            velocity=self.velocity,
            yaw=self.yaw,
            gimbal_pitch=self.gimbal_pitch,
            gimbal_yaw=self.gimbal_yaw,
            airborne=self.airborne,
            collided=self.collided,
            collided_tick=self.collided_tick,
        )


@dataclass(frozen=True)
class Command:
    """One tick's worth of intent from a planner.

    Position and velocity setpoints are mutually exclusive; gimbal targets and
    the shutter may ride along with either. Fields left at None keep whatever
    the airframe was last told.
    """

    move_to: Optional[Vec3] = None
    velocity: Optional[Vec3] = None
    yaw: Optional[float] = None
    gimbal_pitch: Optional[float] = None
    gimbal_yaw: Optional[float] = None
    capture: bool = False

    @classmethod
    def goto(cls, position, yaw: Optional[float] = None, **kw) -> "Command":
        return cls(move_to=Vec3(*position), yaw=yaw, **kw)

    @classmethod
    def cruise(cls, velocity, yaw: Optional[float] = None, **kw) -> "Command":
        return cls(velocity=Vec3(*velocity), yaw=yaw, **kw)

    @classmethod
    def aim(cls, pitch: float, gimbal_yaw: float = 0.0, **kw) -> "Command":
        return cls(gimbal_pitch=pitch, gimbal_yaw=gimbal_yaw, **kw)

    @classmethod
    def hold(cls) -> "Command":
        return cls(velocity=Vec3(0.0, 0.0, 0.0))

    def wants_movement(self) -> bool:
        return self.move_to is not None or self.velocity is not None


@dataclass
class ControlState:
    """Per-airframe latched setpoints; invalid commands leave these untouched."""

    mode: str = "hold"  # "hold" | "position" | "velocity"
    target: Vec3 = Vec3(0.0, 0.0, 0.0)
    yaw_target: Optional[float] = None
    gimbal_pitch_target: float = 0.0
    gimbal_yaw_target: float = 0.0


@dataclass(frozen=True)
class LidarScan:
    """One spinning-lidar revolution: per-ray endpoint (hit or max range).

    hit_cells carries the blocking voxel index per ray (sensor-grid frame,
    None on a miss) so map integration frees exactly the cells the ray
    certified empty — recovering the cell from the endpoint alone is
    ambiguous when a ray enters a voxel edge-on. max_range_m lets the
    integrator rebuild each ray's full segment for the same reason.
    """

    origin: Vec3
    endpoints: tuple[Vec3, ...]
    hits: tuple[bool, ...]
    scan_index: int
    hit_cells: tuple = ()
    max_range_m: float = 0.0


@dataclass(frozen=True)
class PeerInfo:
    """Latest odometry heard from a teammate (may be stale if out of sight)."""

    name: str
    role: str
    position: Vec3
    velocity: Vec3
    tick: int


@dataclass(frozen=True)
class SimEvent:
    tick: int
    agent: str
    kind: str  # takeoff | collision | command-rejected | capture | report-delivered | ...
    detail: str = ""


@dataclass(frozen=True)
class PlannerBrief:
    """Everything a planner may legitimately know before takeoff: the mission
    envelope and fleet composition — never the ground-truth map or the
    interest points."""

    agent: str
    role: str
    boxes: tuple
    volume_lo: Vec3
    volume_hi: Vec3
    grid_origin: Vec3
    grid_dims: tuple[int, int, int]
    voxel_size: float
    roster: tuple[tuple[str, str], ...]  # (name, role) pairs, fleet order
    start_positions: dict = field(default_factory=dict)  # name -> Vec3
    gcs_position: Vec3 = Vec3(0.0, 0.0, 0.0)
    mission_budget_s: float = 0.0
    camera_focal_px: float = 600.0
    camera_image_w: float = 1280.0
    camera_image_h: float = 960.0
    camera_desired_mmpp: float = 8.0
    max_speed_mps: float = 3.0
    max_accel_mps2: float = 3.0
    lidar_range_m: float = 0.0
