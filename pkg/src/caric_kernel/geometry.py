"""Scalar vector/quaternion math, axis-aligned boxes, voxel indexing, exact
voxel ray traversal, and the pinhole camera model used across the kernel.

Conventions:
- World frame: x/y horizontal, z up, meters.
- Camera frame: +z optical axis (forward), +x image right, +y image down.
- Rotation matrices are row-major 9-tuples; the hot paths stay in plain
  Python scalars on purpose (no per-call numpy round trips).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


VoxelIndex = tuple[int, int, int]

_EPS = 1e-12


# ------------------------------------------------------------------
# vector helpers (tuple in, Vec3 out)
# ------------------------------------------------------------------

def vadd(a: Sequence[float], b: Sequence[float]) -> Vec3:
    return Vec3(a[0] + b[0], a[1] + b[1], a[2] + b[2])


def vsub(a: Sequence[float], b: Sequence[float]) -> Vec3:
    return Vec3(a[0] - b[0], a[1] - b[1], a[2] - b[2])


def vscale(a: Sequence[float], s: float) -> Vec3:
    return Vec3(a[0] * s, a[1] * s, a[2] * s)


def vdot(a: Sequence[float], b: Sequence[float]) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vcross(a: Sequence[float], b: Sequence[float]) -> Vec3:
    return Vec3(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def vnorm(a: Sequence[float]) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def vdist(a: Sequence[float], b: Sequence[float]) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def vunit(a: Sequence[float]) -> Vec3:
    n = vnorm(a)
    if n < _EPS:
        raise ValueError("cannot normalize a zero-length vector")
    return Vec3(a[0] / n, a[1] / n, a[2] / n)


def visfinite(a: Sequence[float]) -> bool:
    return math.isfinite(a[0]) and math.isfinite(a[1]) and math.isfinite(a[2])


# ------------------------------------------------------------------
# quaternions and rotation matrices
# ------------------------------------------------------------------

class Quat(NamedTuple):
    w: float
    x: float
    y: float
    z: float


QUAT_IDENTITY = Quat(1.0, 0.0, 0.0, 0.0)

Mat9 = tuple[float, float, float, float, float, float, float, float, float]

MAT9_IDENTITY: Mat9 = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)


def quat_normalize(q: Quat) -> Quat:
    n = math.sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z)
    if n < _EPS:
        raise ValueError("cannot normalize a zero quaternion")
    return Quat(q.w / n, q.x / n, q.y / n, q.z / n)


def quat_from_yaw(yaw: float) -> Quat:
    h = 0.5 * yaw
    return Quat(math.cos(h), 0.0, 0.0, math.sin(h))


def quat_from_axis_angle(axis: Sequence[float], angle: float) -> Quat:
    u = vunit(axis)
    h = 0.5 * angle
    s = math.sin(h)
    return Quat(math.cos(h), u.x * s, u.y * s, u.z * s)


def quat_to_mat9(q: Quat) -> Mat9:
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return (
        1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy),
        2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx),
        2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy),
    )


def mat9_to_quat(m: Mat9) -> Quat:
    """Rotation matrix (row-major 9-tuple) to unit quaternion, stable branches."""
    m00, m01, m02, m10, m11, m12, m20, m21, m22 = m
    tr = m00 + m11 + m22
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = Quat(0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
    elif m00 >= m11 and m00 >= m22:
        s = math.sqrt(1.0 + m00 - m11 - m22) * 2.0
        q = Quat((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
    elif m11 >= m22:
        s = math.sqrt(1.0 + m11 - m00 - m22) * 2.0
        q = Quat((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
    else:
        s = math.sqrt(1.0 + m22 - m00 - m11) * 2.0
        q = Quat((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)
    return quat_normalize(q)


def mat9_apply(m: Mat9, v: Sequence[float]) -> Vec3:
    """R @ v."""
    return Vec3(
        m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
        m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
        m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
    )


def mat9_apply_t(m: Mat9, v: Sequence[float]) -> Vec3:
    """R.T @ v."""
    return Vec3(
        m[0] * v[0] + m[3] * v[1] + m[6] * v[2],
        m[1] * v[0] + m[4] * v[1] + m[7] * v[2],
        m[2] * v[0] + m[5] * v[1] + m[8] * v[2],
    )


def mat9_mul(a: Mat9, b: Mat9) -> Mat9:
    return (
        a[0] * b[0] + a[1] * b[3] + a[2] * b[6],
        a[0] * b[1] + a[1] * b[4] + a[2] * b[7],
        a[0] * b[2] + a[1] * b[5] + a[2] * b[8],
        a[3] * b[0] + a[4] * b[3] + a[5] * b[6],
        a[3] * b[1] + a[4] * b[4] + a[5] * b[7],
        a[3] * b[2] + a[4] * b[5] + a[5] * b[8],
        a[6] * b[0] + a[7] * b[3] + a[8] * b[6],
        a[6] * b[1] + a[7] * b[4] + a[8] * b[7],
        a[6] * b[2] + a[7] * b[5] + a[8] * b[8],
    )


def mat9_transpose(m: Mat9) -> Mat9:
    return (m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8])


def rotation_rate_between(m0: Mat9, m1: Mat9, dt: float) -> Vec3:
    """Body-frame angular velocity that carries orientation m0 to m1 over dt.

    Uses the log map of R = m0.T @ m1; exact for what the simulator applies
    per tick, small-angle safe.
    """
    if dt <= 0.0:
        return Vec3(0.0, 0.0, 0.0)
    r = mat9_mul(mat9_transpose(m0), m1)
    tr = r[0] + r[4] + r[8]
    c = max(-1.0, min(1.0, (tr - 1.0) * 0.5))
    angle = math.acos(c)
    if angle < 1e-9:
        return Vec3(0.0, 0.0, 0.0)
    # skew-symmetric part carries the axis
    ax = r[7] - r[5]
    ay = r[2] - r[6]
    az = r[3] - r[1]
    s = 2.0 * math.sin(angle)
    k = angle / (s * dt)
    return Vec3(ax * k, ay * k, az * k)


class Pose(NamedTuple):
    """Rigid transform: position in world plus world-from-frame orientation."""

    position: Vec3
    orientation: Quat


# ------------------------------------------------------------------
# axis-aligned boxes
# ------------------------------------------------------------------

@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box, min corner inclusive, max corner exclusive-ish."""

    lo: Vec3
    hi: Vec3

    def __post_init__(self) -> None:
        if not (self.lo[0] <= self.hi[0] and self.lo[1] <= self.hi[1] and self.lo[2] <= self.hi[2]):
            raise ValueError(f"degenerate Aabb: lo={self.lo} hi={self.hi}")

    @staticmethod
    def of(lo: Sequence[float], hi: Sequence[float]) -> "Aabb":
        return Aabb(Vec3(*lo), Vec3(*hi))

    def contains(self, p: Sequence[float], slack: float = 0.0) -> bool:
        return (
            self.lo[0] - slack <= p[0] <= self.hi[0] + slack
            and self.lo[1] - slack <= p[1] <= self.hi[1] + slack
            and self.lo[2] - slack <= p[2] <= self.hi[2] + slack
        )

    def center(self) -> Vec3:
        return Vec3(
            0.5 * (self.lo[0] + self.hi[0]),
            0.5 * (self.lo[1] + self.hi[1]),
            0.5 * (self.lo[2] + self.hi[2]),
        )

    def size(self) -> Vec3:
        return vsub(self.hi, self.lo)

    def volume(self) -> float:
        s = self.size()
        return s.x * s.y * s.z

    def inflate(self, margin: float) -> "Aabb":
        return Aabb(
            Vec3(self.lo.x - margin, self.lo.y - margin, self.lo.z - margin),
            Vec3(self.hi.x + margin, self.hi.y + margin, self.hi.z + margin),
        )

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(
            Vec3(min(self.lo.x, other.lo.x), min(self.lo.y, other.lo.y), min(self.lo.z, other.lo.z)),
            Vec3(max(self.hi.x, other.hi.x), max(self.hi.y, other.hi.y), max(self.hi.z, other.hi.z)),
        )


def point_box_distance(p: Sequence[float], box: Aabb) -> float:
    dx = max(box.lo.x - p[0], 0.0, p[0] - box.hi.x)
    dy = max(box.lo.y - p[1], 0.0, p[1] - box.hi.y)
    dz = max(box.lo.z - p[2], 0.0, p[2] - box.hi.z)
    return math.sqrt(dx * dx + dy * dy + dz * dz)


# ------------------------------------------------------------------
# voxel indexing
# ------------------------------------------------------------------

def world_to_voxel(
    p: Sequence[float],
    origin: Sequence[float],
    voxel_size: float,
    dims: tuple[int, int, int],
) -> Optional[VoxelIndex]:
    """Voxel index containing a world point, or None when out of bounds."""
    i = math.floor((p[0] - origin[0]) / voxel_size)
    j = math.floor((p[1] - origin[1]) / voxel_size)
    k = math.floor((p[2] - origin[2]) / voxel_size)
    if 0 <= i < dims[0] and 0 <= j < dims[1] and 0 <= k < dims[2]:
        return (i, j, k)
    return None


def voxel_center(
    idx: Sequence[int],
    origin: Sequence[float],
    voxel_size: float,
) -> Vec3:
    return Vec3(
        origin[0] + (idx[0] + 0.5) * voxel_size,
        origin[1] + (idx[1] + 0.5) * voxel_size,
        origin[2] + (idx[2] + 0.5) * voxel_size,
    )


def _segment_grid_span(
    origin: Sequence[float],
    voxel_size: float,
    dims: tuple[int, int, int],
    a: Sequence[float],
    b: Sequence[float],
) -> Optional[tuple[float, float]]:
    """Clip segment a->b against the grid box; returns (tmin, tmax) in [0, 1]."""
    tmin = 0.0
    tmax = 1.0
    for ax in range(3):
        lo = origin[ax]
        hi = origin[ax] + dims[ax] * voxel_size
        d = b[ax] - a[ax]
        if abs(d) < _EPS:
            if a[ax] < lo or a[ax] > hi:
                return None
            continue
        t1 = (lo - a[ax]) / d
        t2 = (hi - a[ax]) / d
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
        if tmin > tmax:
            return None
    return tmin, tmax


def _entry_cell(
    origin: Sequence[float],
    voxel_size: float,
    dims: tuple[int, int, int],
    a: Sequence[float],
    d: Sequence[float],
    t: float,
) -> tuple[int, int, int]:
    # nudge slightly forward along the travel direction to resolve boundary sits
    tt = t + 1e-12
    i = int(math.floor((a[0] + d[0] * tt - origin[0]) / voxel_size))
    j = int(math.floor((a[1] + d[1] * tt - origin[1]) / voxel_size))
    k = int(math.floor((a[2] + d[2] * tt - origin[2]) / voxel_size))
    if i < 0:
        i = 0
    elif i >= dims[0]:
        i = dims[0] - 1
    if j < 0:
        j = 0
    elif j >= dims[1]:
        j = dims[1] - 1
    if k < 0:
        k = 0
    elif k >= dims[2]:
        k = dims[2] - 1
    return i, j, k


def traverse_segment(
    origin: Sequence[float],
    voxel_size: float,
    dims: tuple[int, int, int],
    a: Sequence[float],
    b: Sequence[float],
) -> list[VoxelIndex]:
    """All voxels the open segment a->b passes through, in visit order.

    Exact 3D DDA (Amanatides/Woo stepping). Boundary grazes that touch only
    a face/edge at a single point resolve by advancing every tied axis at
    once, which keeps a->b and b->a traversals symmetric.
    """
    span = _segment_grid_span(origin, voxel_size, dims, a, b)
    if span is None:
        return []
    tmin, tmax = span
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    dz = b[2] - a[2]
    i, j, k = _entry_cell(origin, voxel_size, dims, a, (dx, dy, dz), tmin)
    out: list[VoxelIndex] = [(i, j, k)]

    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    step_z = 1 if dz > 0 else -1
    big = math.inf
    # t advance per full voxel along each axis
    tdx = voxel_size / abs(dx) if abs(dx) > _EPS else big
    tdy = voxel_size / abs(dy) if abs(dy) > _EPS else big
    tdz = voxel_size / abs(dz) if abs(dz) > _EPS else big
    # t of the next boundary crossing per axis
    if tdx is not big:
        edge = origin[0] + (i + (1 if step_x > 0 else 0)) * voxel_size
        tx = (edge - a[0]) / dx
    else:
        tx = big
    if tdy is not big:
        edge = origin[1] + (j + (1 if step_y > 0 else 0)) * voxel_size
        ty = (edge - a[1]) / dy
    else:
        ty = big
    if tdz is not big:
        edge = origin[2] + (k + (1 if step_z > 0 else 0)) * voxel_size
        tz = (edge - a[2]) / dz
    else:
        tz = big

    nx, ny, nz = dims
    while True:
        t = tx if tx <= ty else ty
        if tz < t:
            t = tz
        if t >= tmax - 1e-15:
            return out
        if tx == t:
            i += step_x
            tx += tdx
            if i < 0 or i >= nx:
                return out
        if ty == t:
            j += step_y
            ty += tdy
            if j < 0 or j >= ny:
                return out
        if tz == t:
            k += step_z
            tz += tdz
            if k < 0 or k >= nz:
                return out
        out.append((i, j, k))


def voxel_raycast(
    origin: Sequence[float],
    voxel_size: float,
    dims: tuple[int, int, int],
    occupancy: Sequence[int],
    a: Sequence[float],
    b: Sequence[float],
    exclude_src: bool = True,
    exclude_dst: bool = True,
) -> tuple[bool, Optional[VoxelIndex]]:
    """Line-of-sight test: does any occupied voxel block the open segment a->b?

    `occupancy` is a flat buffer in i*ny*nz + j*nz + k layout where nonzero
    means occupied. Voxels containing the endpoints can be excluded so that
    a sensor sitting on a surface does not occlude itself. Returns
    (blocked, first blocking index).
    """
    span = _segment_grid_span(origin, voxel_size, dims, a, b)
    if span is None:
        return False, None
    tmin, tmax = span
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    dz = b[2] - a[2]
    if dx * dx + dy * dy + dz * dz < _EPS * _EPS:
        return False, None
    src_cell = world_to_voxel(a, origin, voxel_size, dims) if exclude_src else None
    dst_cell = world_to_voxel(b, origin, voxel_size, dims) if exclude_dst else None

    i, j, k = _entry_cell(origin, voxel_size, dims, a, (dx, dy, dz), tmin)
    nx, ny, nz = dims
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    step_z = 1 if dz > 0 else -1
    big = math.inf
    tdx = voxel_size / abs(dx) if abs(dx) > _EPS else big
    tdy = voxel_size / abs(dy) if abs(dy) > _EPS else big
    tdz = voxel_size / abs(dz) if abs(dz) > _EPS else big
    if tdx is not big:
        edge = origin[0] + (i + (1 if step_x > 0 else 0)) * voxel_size
        tx = (edge - a[0]) / dx
    else:
        tx = big
    if tdy is not big:
        edge = origin[1] + (j + (1 if step_y > 0 else 0)) * voxel_size
        ty = (edge - a[1]) / dy
    else:
        ty = big
    if tdz is not big:
        edge = origin[2] + (k + (1 if step_z > 0 else 0)) * voxel_size
        tz = (edge - a[2]) / dz
    else:
        tz = big

    plane = ny * nz
    while True:
        cell = (i, j, k)
        if occupancy[i * plane + j * nz + k] and cell != src_cell and cell != dst_cell:
            return True, cell
        t = tx if tx <= ty else ty
        if tz < t:
            t = tz
        if t >= tmax - 1e-15:
            return False, None
        if tx == t:
            i += step_x
            tx += tdx
            if i < 0 or i >= nx:
                return False, None
        if ty == t:
            j += step_y
            ty += tdy
            if j < 0 or j >= ny:
                return False, None
        if tz == t:
            k += step_z
            tz += tdz
            if k < 0 or k >= nz:
                return False, None


def raycast_first_hit(
    origin: Sequence[float],
    voxel_size: float,
    dims: tuple[int, int, int],
    occupancy: Sequence[int],
    a: Sequence[float],
    b: Sequence[float],
    exclude_src: bool = True,
) -> tuple[Optional[VoxelIndex], float]:
    """First occupied voxel along a->b and the segment parameter of its entry.

    Range sensing flavor of `voxel_raycast`: returns (hit index, t in [0, 1])
    or (None, 1.0) when nothing blocks up to b.
    """
    span = _segment_grid_span(origin, voxel_size, dims, a, b)
    if span is None:
        return None, 1.0
    tmin, tmax = span
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    dz = b[2] - a[2]
    if dx * dx + dy * dy + dz * dz < _EPS * _EPS:
        return None, 1.0
    src_cell = world_to_voxel(a, origin, voxel_size, dims) if exclude_src else None

    i, j, k = _entry_cell(origin, voxel_size, dims, a, (dx, dy, dz), tmin)
    nx, ny, nz = dims
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    step_z = 1 if dz > 0 else -1
    big = math.inf
    tdx = voxel_size / abs(dx) if abs(dx) > _EPS else big
    tdy = voxel_size / abs(dy) if abs(dy) > _EPS else big
    tdz = voxel_size / abs(dz) if abs(dz) > _EPS else big
    if tdx is not big:
        edge = origin[0] + (i + (1 if step_x > 0 else 0)) * voxel_size
        tx = (edge - a[0]) / dx
    else:
        tx = big
    if tdy is not big:
        edge = origin[1] + (j + (1 if step_y > 0 else 0)) * voxel_size
        ty = (edge - a[1]) / dy
    else:
        ty = big
    if tdz is not big:
        edge = origin[2] + (k + (1 if step_z > 0 else 0)) * voxel_size
        tz = (edge - a[2]) / dz
    else:
        tz = big

    plane = ny * nz
    t_entry = tmin
    while True:
        cell = (i, j, k)
        if occupancy[i * plane + j * nz + k] and cell != src_cell:
            return cell, max(t_entry, 0.0)
        t = tx if tx <= ty else ty
        if tz < t:
            t = tz
        if t >= tmax - 1e-15:
            return None, 1.0
        t_entry = t
        if tx == t:
            i += step_x
            tx += tdx
            if i < 0 or i >= nx:
                return None, 1.0
        if ty == t:
            j += step_y
            ty += tdy
            if j < 0 or j >= ny:
                return None, 1.0
        if tz == t:
            k += step_z
            tz += tdz
            if k < 0 or k >= nz:
                return None, 1.0


# ------------------------------------------------------------------
# pinhole camera
# ------------------------------------------------------------------

@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: square pixels, focal length in pixel units."""

    focal_length_px: float
    image_width_px: float
    image_height_px: float
    horizontal_fov_rad: float
    vertical_fov_rad: float
    exposure_time_s: float
    desired_mmpp: float
    pixel_width_px: float = 1.0

    def __post_init__(self) -> None:
        if self.focal_length_px <= 0.0:
            raise ValueError("focal_length_px must be positive")
        if self.image_width_px <= 0.0 or self.image_height_px <= 0.0:
            raise ValueError("image dimensions must be positive")
        if self.exposure_time_s < 0.0:
            raise ValueError("exposure_time_s must be >= 0")
        if self.desired_mmpp <= 0.0:
            raise ValueError("desired_mmpp must be positive")

    @classmethod
    def from_pinhole(
        cls,
        focal_length_px: float,
        image_width_px: float,
        image_height_px: float,
        exposure_time_s: float = 0.01,
        desired_mmpp: float = 8.0,
    ) -> "CameraIntrinsics":
        return cls(
            focal_length_px=focal_length_px,
            image_width_px=image_width_px,
            image_height_px=image_height_px,
            horizontal_fov_rad=2.0 * math.atan(0.5 * image_width_px / focal_length_px),
            vertical_fov_rad=2.0 * math.atan(0.5 * image_height_px / focal_length_px),
            exposure_time_s=exposure_time_s,
            desired_mmpp=desired_mmpp,
        )


def project_pixel(p_cam: Sequence[float], focal_length_px: float) -> Optional[tuple[float, float]]:
    """Pinhole projection without the image-rectangle check; None behind camera."""
    z = p_cam[2]
    if z <= _EPS:
        return None
    return focal_length_px * p_cam[0] / z, focal_length_px * p_cam[1] / z


def project_point(
    p_cam: Sequence[float],
    intrinsics: CameraIntrinsics,
) -> Optional[tuple[float, float]]:
    """Camera-frame point to pixel coordinates; None if behind or off-image."""
    uv = project_pixel(p_cam, intrinsics.focal_length_px)
    if uv is None:
        return None
    u, v = uv
    if abs(u) > 0.5 * intrinsics.image_width_px or abs(v) > 0.5 * intrinsics.image_height_px:
        return None
    return u, v


def camera_axes(body_yaw: float, gimbal_pitch: float, gimbal_yaw: float) -> tuple[Vec3, Vec3, Vec3]:
    """World-frame (right, down, forward) axes of the gimballed camera.

    Gimbal yaw is body-relative about world z; pitch tilts the optical axis
    (positive up). The image stays roll-free relative to the horizon.
    """
    psi = body_yaw + gimbal_yaw
    cp = math.cos(gimbal_pitch)
    sp = math.sin(gimbal_pitch)
    cpsi = math.cos(psi)
    spsi = math.sin(psi)
    fwd = Vec3(cp * cpsi, cp * spsi, sp)
    right = Vec3(spsi, -cpsi, 0.0)
    down = Vec3(sp * cpsi, sp * spsi, -cp)
    return right, down, fwd


def camera_matrix(body_yaw: float, gimbal_pitch: float, gimbal_yaw: float) -> Mat9:
    """World-from-camera rotation (columns are the camera right/down/forward)."""
    r, d, f = camera_axes(body_yaw, gimbal_pitch, gimbal_yaw)
    return (r.x, d.x, f.x, r.y, d.y, f.y, r.z, d.z, f.z)


def camera_pose(
    position: Sequence[float],
    body_yaw: float,
    gimbal_pitch: float,
    gimbal_yaw: float,
) -> Pose:
    return Pose(Vec3(*position), mat9_to_quat(camera_matrix(body_yaw, gimbal_pitch, gimbal_yaw)))


def world_to_camera(cam_pose: Pose, p_world: Sequence[float]) -> Vec3:
    m = quat_to_mat9(cam_pose.orientation)
    return mat9_apply_t(m, vsub(p_world, cam_pose.position))


def fov_contains(cam_pose: Pose, intrinsics: CameraIntrinsics, p_world: Sequence[float]) -> bool:
    """True when the world point lands inside the image rectangle."""
    return project_point(world_to_camera(cam_pose, p_world), intrinsics) is not None


def point_velocity_in_camera(
    p_world: Sequence[float],
    cam_pose: Pose,
    cam_linear_velocity_world: Sequence[float],
    cam_angular_velocity_camframe: Sequence[float],
) -> Vec3:
    """Apparent velocity of a static world point, expressed in the camera frame.

    For p_cam = R.T (p - c):  dp_cam/dt = -R.T v_c - omega x p_cam
    with omega the camera angular rate in its own frame.
    """
    m = quat_to_mat9(cam_pose.orientation)
    p_cam = mat9_apply_t(m, vsub(p_world, cam_pose.position))
    v1 = mat9_apply_t(m, cam_linear_velocity_world)
    w = cam_angular_velocity_camframe
    return Vec3(
        -v1.x - (w[1] * p_cam.z - w[2] * p_cam.y),
        -v1.y - (w[2] * p_cam.x - w[0] * p_cam.z),
        -v1.z - (w[0] * p_cam.y - w[1] * p_cam.x),
    )


def yaw_wrap(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def look_angles(from_pos: Sequence[float], at_pos: Sequence[float]) -> tuple[float, float]:
    """(azimuth, elevation) of the ray from_pos -> at_pos in world frame."""
    d = vsub(at_pos, from_pos)
    horiz = math.hypot(d.x, d.y)
    az = math.atan2(d.y, d.x) if horiz > _EPS or abs(d.z) > _EPS else 0.0
    el = math.atan2(d.z, horiz)
    return az, el
