"""Inspection quality model and mission scoring.

A photo of an interest point earns quality q = q_seen * q_blur * q_res:

  * q_seen  — 1 when the surface faces the camera, falls inside the image
    rectangle, and no occupied voxel blocks the sight line; else 0.
  * q_blur  — motion blur during the exposure, measured as the pixel
    displacement of the point while the shutter is open; one pixel or less
    is sharp, beyond that quality falls off inversely.
  * q_res   — ground sampling distance on the surface (mm per pixel) against
    the desired resolution; capped obliquity so grazing views degrade
    smoothly instead of dividing by zero.

The mission score sums, over interest points, the best quality any delivered
capture achieved for that point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .geometry import (
    CameraIntrinsics,
    Pose,
    Vec3,
    point_velocity_in_camera,
    project_pixel,
    project_point,
    voxel_raycast,
    vsub,
    world_to_camera,
)
from .world import InterestPoint, OccupancyGrid

BLUR_THRESHOLD_PX = 1.0
OBLIQUITY_FLOOR = 0.05  # cos(angle) below this no longer widens the footprint


# ------------------------------------------------------------------
# per-factor metrics
# ------------------------------------------------------------------

def pixel_displacement_px(p_cam: Sequence[float], v_cam: Sequence[float], intr: CameraIntrinsics) -> Optional[float]:
    """Pixel travel of a point during the exposure, camera-frame kinematics.

    The point starts at p_cam moving at v_cam (both camera frame); exposure
    integrates that drift. Returns max(|du|, |dv|) in pixels, or None when
    either endpoint of the streak falls behind the camera.
    """
    f = intr.focal_length_px
    start = project_pixel(p_cam, f)
    if start is None:
        return None
    tau = intr.exposure_time_s
    end = project_pixel(
        (p_cam[0] + v_cam[0] * tau, p_cam[1] + v_cam[1] * tau, p_cam[2] + v_cam[2] * tau), f
    )
    if end is None:
        return None
    return max(abs(end[0] - start[0]), abs(end[1] - start[1]))


def blur_quality(displacement_px: Optional[float], threshold_px: float = BLUR_THRESHOLD_PX) -> float:
    """1.0 for streaks up to the threshold, inverse falloff beyond it."""
    if displacement_px is None:
        return 0.0
    if displacement_px <= threshold_px:
        return 1.0
    return threshold_px / displacement_px


def resolution_mmpp(p_cam: Sequence[float], n_cam: Sequence[float], focal_length_px: float) -> tuple[float, float]:
    """Surface footprint of one pixel (horizontal, vertical) in millimetres.

    Exact differential of the ray/surface-plane intersection at the point:
    moving one pixel across the image sweeps the intersection across the
    surface by (z / f) * ||e_ax - (n_ax / (n . p)) * p|| metres, which reduces
    to the familiar (z / f) / cos(theta) for on-axis views. Obliquity is
    capped so the footprint never exceeds 1 / OBLIQUITY_FLOOR times nadir.
    """
    z = p_cam[2]
    base = 1000.0 * z / focal_length_px  # frontal mm per pixel at this depth
    ndp = n_cam[0] * p_cam[0] + n_cam[1] * p_cam[1] + n_cam[2] * p_cam[2]
    cap = 1.0 / OBLIQUITY_FLOOR
    if abs(ndp) < 1e-12:
        return base * cap, base * cap
    sx = n_cam[0] / ndp
    sy = n_cam[1] / ndp
    mh = math.sqrt(
        (1.0 - sx * p_cam[0]) ** 2 + (sx * p_cam[1]) ** 2 + (sx * p_cam[2]) ** 2
    )
    mv = math.sqrt(
        (sy * p_cam[0]) ** 2 + (1.0 - sy * p_cam[1]) ** 2 + (sy * p_cam[2]) ** 2
    )
    return base * min(mh, cap), base * min(mv, cap)


def resolution_quality(p_cam: Sequence[float], n_cam: Sequence[float], intr: CameraIntrinsics) -> float:
    """1.0 when the worse image axis resolves at least desired_mmpp."""
    rh, rv = resolution_mmpp(p_cam, n_cam, intr.focal_length_px)
    worst = max(rh, rv)
    if worst <= 1e-12:
        return 1.0
    return min(intr.desired_mmpp / worst, 1.0)


def surface_visible(
    pose: Pose,
    intr: CameraIntrinsics,
    grid: OccupancyGrid,
    position: Sequence[float],
    normal: Sequence[float],
) -> bool:
    """q_seen: frontal, inside the image rectangle, and unoccluded."""
    to_cam = vsub(pose.position, position)
    if normal[0] * to_cam[0] + normal[1] * to_cam[1] + normal[2] * to_cam[2] <= 0.0:
        return False
    p_cam = world_to_camera(pose, position)
    if project_point(p_cam, intr) is None:
        return False
    blocked, _ = voxel_raycast(
        grid.origin, grid.voxel_size, grid.dims, grid.occ, pose.position, position
    )
    return not blocked


# ------------------------------------------------------------------
# capture scoring
# ------------------------------------------------------------------

@dataclass(frozen=True)
class CaptureView:
    """Camera state at the capture instant."""

    pose: Pose  # camera frame in world coordinates
    velocity_mps: Vec3  # camera origin velocity, world frame
    angular_rate: Vec3  # camera-frame angular velocity, rad/s
    intrinsics: CameraIntrinsics


def point_quality(view: CaptureView, grid: OccupancyGrid, ip: InterestPoint) -> float:
    """Quality this view earns for one interest point (0 when unseen)."""
    if not surface_visible(view.pose, view.intrinsics, grid, ip.position, ip.normal):
        return 0.0
    p_cam = world_to_camera(view.pose, ip.position)
    n_cam = world_to_camera(
        Pose(Vec3(0.0, 0.0, 0.0), view.pose.orientation), ip.normal
    )
    v_cam = point_velocity_in_camera(ip.position, view.pose, view.velocity_mps, view.angular_rate)
    q_blur = blur_quality(pixel_displacement_px(p_cam, v_cam, view.intrinsics))
    q_res = resolution_quality(p_cam, n_cam, view.intrinsics)
    return q_blur * q_res


def score_capture(
    view: CaptureView, grid: OccupancyGrid, interest_points: Iterable[InterestPoint]
) -> list[tuple[int, float]]:
    """(interest point id, quality) for every point this view scores above 0."""
    out = []
    for ip in interest_points:
        q = point_quality(view, grid, ip)
        if q > 0.0:
            out.append((ip.id, q))
    return out


# ------------------------------------------------------------------
# mission tally
# ------------------------------------------------------------------

@dataclass(frozen=True)
class CaptureRecord:
    """One shutter release: per-point qualities plus bookkeeping flags.

    `delivered` is set once the record reaches the ground station;
    `collided` marks records taken by an airframe after its crash (void).
    """

    agent: str
    tick: int
    qualities: tuple[tuple[int, float], ...]
    delivered: bool = False
    collided: bool = False


@dataclass
class ScoreBoard:
    best: dict[int, float]
    total: float
    detected: int

    def mean_quality(self) -> float:
        return self.total / self.detected if self.detected else 0.0


def tally(records: Iterable[CaptureRecord], require_delivery: bool = True) -> ScoreBoard:
    """Best-per-point aggregation over valid records.

    Records from crashed airframes never count; undelivered records only
    count when delivery gating is explicitly waived.
    """
    best: dict[int, float] = {}
    for rec in records:
        if rec.collided:
            continue
        if require_delivery and not rec.delivered:
            continue
        for pid, q in rec.qualities:
            if q > 0.0 and q > best.get(pid, 0.0):
                best[pid] = q
    total = sum(best.values())
    return ScoreBoard(best=best, total=total, detected=len(best))
