"""Geometry unit tests: projection, camera frames, and the voxel ray marcher
checked against a dense-sampling oracle.
"""

import math
import random

import pytest

from oracles import dense_los_blocked

from caric_kernel.geometry import (
    Aabb,
    CameraIntrinsics,
    Vec3,
    camera_axes,
    camera_matrix,
    camera_pose,
    fov_contains,
    mat9_apply,
    mat9_to_quat,
    point_box_distance,
    point_velocity_in_camera,
    project_pixel,
    project_point,
    quat_from_axis_angle,
    quat_to_mat9,
    raycast_first_hit,
    rotation_rate_between,
    traverse_segment,
    vadd,
    vcross,
    vdot,
    vnorm,
    voxel_center,
    voxel_raycast,
    vscale,
    vsub,
    world_to_camera,
    world_to_voxel,
    yaw_wrap,
)

ORIGIN = Vec3(0.0, 0.0, 0.0)


# ------------------------------------------------------------------
# projection
# ------------------------------------------------------------------

def test_pinhole_projection_examples():
    assert project_pixel(Vec3(0.0, 0.0, 5.0), 600.0) == (0.0, 0.0)
    u, v = project_pixel(Vec3(1.0, 0.0, 2.0), 600.0)
    assert u == pytest.approx(300.0)
    assert v == pytest.approx(0.0)


def test_projection_behind_camera_is_rejected():
    assert project_pixel(Vec3(0.0, 0.0, -1.0), 600.0) is None
    assert project_pixel(Vec3(0.5, 0.5, 0.0), 600.0) is None


def test_projection_scale_invariance():
    # scaling a ray's endpoint along itself does not move its pixel
    p = Vec3(0.7, -0.3, 2.4)
    u1, v1 = project_pixel(p, 425.0)
    u2, v2 = project_pixel(vscale(p, 7.5), 425.0)
    assert u1 == pytest.approx(u2)
    assert v1 == pytest.approx(v2)


def test_fov_containment_uses_image_rectangle():
    cam = CameraIntrinsics.from_pinhole(600.0, 1280.0, 960.0)
    # horizontal half-extent at z=3: (640/600)*3 = 3.2
    assert project_point(Vec3(3.19, 0.0, 3.0), cam) is not None
    assert project_point(Vec3(3.21, 0.0, 3.0), cam) is None
    # vertical half-extent at z=3: (480/600)*3 = 2.4
    assert project_point(Vec3(0.0, 2.39, 3.0), cam) is not None
    assert project_point(Vec3(0.0, 2.41, 3.0), cam) is None


def test_fov_angles_match_rectangle():
    cam = CameraIntrinsics.from_pinhole(600.0, 1280.0, 960.0)
    assert cam.horizontal_fov_rad == pytest.approx(2.0 * math.atan(640.0 / 600.0))
    assert cam.vertical_fov_rad == pytest.approx(2.0 * math.atan(480.0 / 600.0))


# ------------------------------------------------------------------
# camera frames
# ------------------------------------------------------------------

def test_camera_axes_level_flight():
    right, down, fwd = camera_axes(0.0, 0.0, 0.0)
    assert fwd == pytest.approx((1.0, 0.0, 0.0))
    assert right == pytest.approx((0.0, -1.0, 0.0))
    assert down == pytest.approx((0.0, 0.0, -1.0))


def test_camera_axes_straight_down():
    right, down, fwd = camera_axes(0.0, -math.pi / 2.0, 0.0)
    assert fwd == pytest.approx((0.0, 0.0, -1.0), abs=1e-12)
    # image-bottom swings backward as the lens tilts down, so the top of the
    # frame faces the flight direction
    assert down == pytest.approx((-1.0, 0.0, 0.0), abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_camera_axes_orthonormal_right_handed(seed):
    rng = random.Random(seed)
    yaw = rng.uniform(-math.pi, math.pi)
    pitch = rng.uniform(-2.0, 0.5)
    gyaw = rng.uniform(-math.pi, math.pi)
    right, down, fwd = camera_axes(yaw, pitch, gyaw)
    for a in (right, down, fwd):
        assert vnorm(a) == pytest.approx(1.0)
    assert vdot(right, down) == pytest.approx(0.0, abs=1e-12)
    assert vdot(right, fwd) == pytest.approx(0.0, abs=1e-12)
    assert vdot(down, fwd) == pytest.approx(0.0, abs=1e-12)
    assert vcross(right, down) == pytest.approx(fwd)


def test_world_to_camera_round_trip():
    pose = camera_pose(Vec3(1.0, 2.0, 3.0), 0.7, -0.4, 0.2)
    rot = quat_to_mat9(pose.orientation)
    p = Vec3(4.0, -1.0, 2.5)
    cam = world_to_camera(pose, p)
    back = vadd(pose.position, mat9_apply(rot, cam))
    assert back == pytest.approx(p)


def test_fov_contains_agrees_with_manual_transform():
    cam = CameraIntrinsics.from_pinhole(600.0, 1280.0, 960.0)
    pose = camera_pose(Vec3(0.0, 0.0, 5.0), 0.3, -0.7, 0.1)
    rng = random.Random(11)
    for _ in range(200):
        p = Vec3(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-2, 8))
        expect = project_point(world_to_camera(pose, p), cam) is not None
        assert fov_contains(pose, cam, p) == expect


def test_quat_mat_round_trip():
    rng = random.Random(5)
    for _ in range(50):
        q = quat_from_axis_angle(
            (rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
            rng.uniform(-3.0, 3.0),
        )
        m = quat_to_mat9(q)
        q2 = mat9_to_quat(m)
        sign = 1.0 if q.w * q2.w + q.x * q2.x + q.y * q2.y + q.z * q2.z >= 0 else -1.0
        assert (q2.w * sign, q2.x * sign, q2.y * sign, q2.z * sign) == pytest.approx(tuple(q), abs=1e-9)


def test_rotation_rate_between_recovers_axis_angle():
    axis = (0.26726124, 0.53452248, 0.80178373)
    dt = 0.1
    rate = 0.9  # rad/s
    m0 = quat_to_mat9(quat_from_axis_angle((0.1, -0.4, 0.2), 0.6))
    step = quat_to_mat9(quat_from_axis_angle(axis, rate * dt))
    # body-frame increment: m1 = m0 @ step
    from caric_kernel.geometry import mat9_mul

    m1 = mat9_mul(m0, step)
    omega = rotation_rate_between(m0, m1, dt)
    assert omega == pytest.approx(vscale(axis, rate), abs=1e-9)


def test_point_velocity_static_camera_moving_forward():
    # camera translating along its own +z axis: points stream toward the lens
    pose = camera_pose(ORIGIN, 0.0, 0.0, 0.0)
    fwd_world = camera_axes(0.0, 0.0, 0.0)[2]
    v = point_velocity_in_camera(Vec3(5.0, 0.0, 0.0), pose, vscale(fwd_world, 2.0), ORIGIN)
    assert v == pytest.approx((0.0, 0.0, -2.0))


def test_yaw_wrap_range():
    for k in range(-8, 9):
        a = yaw_wrap(0.5 + k * 2.0 * math.pi)
        assert a == pytest.approx(0.5)
    assert -math.pi < yaw_wrap(math.pi) <= math.pi
    assert -math.pi < yaw_wrap(-math.pi) <= math.pi


# ------------------------------------------------------------------
# voxel indexing
# ------------------------------------------------------------------

def test_world_to_voxel_round_trip_and_bounds():
    dims = (4, 5, 6)
    vs = 0.5
    assert world_to_voxel(Vec3(0.26, 0.01, 2.99), ORIGIN, vs, dims) == (0, 0, 5)
    assert world_to_voxel(Vec3(-0.01, 0.0, 0.0), ORIGIN, vs, dims) is None
    assert world_to_voxel(Vec3(0.0, 0.0, 3.01), ORIGIN, vs, dims) is None
    c = voxel_center((2, 3, 4), ORIGIN, vs)
    assert c == pytest.approx((1.25, 1.75, 2.25))
    assert world_to_voxel(c, ORIGIN, vs, dims) == (2, 3, 4)


def test_point_box_distance():
    box = Aabb(Vec3(0, 0, 0), Vec3(2, 2, 2))
    assert point_box_distance(Vec3(1, 1, 1), box) == 0.0
    assert point_box_distance(Vec3(3, 1, 1), box) == pytest.approx(1.0)
    assert point_box_distance(Vec3(3, 3, 1), box) == pytest.approx(math.sqrt(2.0))


# ------------------------------------------------------------------
# ray traversal
# ------------------------------------------------------------------

def test_traverse_straight_line_visits_every_cell():
    cells = traverse_segment(ORIGIN, 1.0, (10, 3, 3), Vec3(0.5, 1.5, 1.5), Vec3(9.5, 1.5, 1.5))
    assert cells == [(i, 1, 1) for i in range(10)]


def test_traverse_zero_length_segment():
    cells = traverse_segment(ORIGIN, 1.0, (4, 4, 4), Vec3(1.5, 1.5, 1.5), Vec3(1.5, 1.5, 1.5))
    assert cells == [(1, 1, 1)]


def test_traverse_segment_outside_grid_is_empty():
    assert traverse_segment(ORIGIN, 1.0, (4, 4, 4), Vec3(-5, -5, -5), Vec3(-1, -5, -5)) == []


def test_raycast_single_blocker_on_midpoint():
    dims = (5, 5, 5)
    occ = bytearray(125)
    occ[2 * 25 + 2 * 5 + 2] = 1
    a, b = Vec3(0.5, 2.5, 2.5), Vec3(4.5, 2.5, 2.5)
    blocked, cell = voxel_raycast(ORIGIN, 1.0, dims, occ, a, b)
    assert blocked and cell == (2, 2, 2)
    # swap: same verdict
    blocked, cell = voxel_raycast(ORIGIN, 1.0, dims, occ, b, a)
    assert blocked and cell == (2, 2, 2)


def test_raycast_endpoint_voxels_do_not_block():
    dims = (5, 5, 5)
    occ = bytearray(125)
    occ[0 * 25 + 2 * 5 + 2] = 1  # src voxel occupied
    occ[4 * 25 + 2 * 5 + 2] = 1  # dst voxel occupied
    a, b = Vec3(0.5, 2.5, 2.5), Vec3(4.5, 2.5, 2.5)
    blocked, _ = voxel_raycast(ORIGIN, 1.0, dims, occ, a, b)
    assert not blocked
    blocked, cell = voxel_raycast(ORIGIN, 1.0, dims, occ, a, b, exclude_dst=False)
    assert blocked and cell == (4, 2, 2)


def test_raycast_matches_dense_sampling_oracle():
    rng = random.Random(42)
    dims = (16, 16, 16)
    vs = 0.5
    for trial in range(100):
        occupied = set()
        occ = bytearray(16 * 16 * 16)
        for _ in range(rng.randrange(10, 120)):
            c = (rng.randrange(16), rng.randrange(16), rng.randrange(16))
            occupied.add(c)
            occ[c[0] * 256 + c[1] * 16 + c[2]] = 1
        a = Vec3(rng.uniform(0.01, 7.99), rng.uniform(0.01, 7.99), rng.uniform(0.01, 7.99))
        b = Vec3(rng.uniform(0.01, 7.99), rng.uniform(0.01, 7.99), rng.uniform(0.01, 7.99))
        got, _ = voxel_raycast(ORIGIN, vs, dims, occ, a, b)
        want = dense_los_blocked(ORIGIN, vs, dims, occupied, a, b, step_frac=0.05)
        assert got == want, f"trial {trial}: raycast {got} vs dense {want} for {a}->{b}"


def test_raycast_is_symmetric():
    rng = random.Random(7)
    dims = (12, 12, 12)
    occ = bytearray(12 * 12 * 12)
    for _ in range(140):
        c = (rng.randrange(12), rng.randrange(12), rng.randrange(12))
        occ[c[0] * 144 + c[1] * 12 + c[2]] = 1
    for _ in range(300):
        a = Vec3(rng.uniform(0, 12), rng.uniform(0, 12), rng.uniform(0, 12))
        b = Vec3(rng.uniform(0, 12), rng.uniform(0, 12), rng.uniform(0, 12))
        fwd, _ = voxel_raycast(ORIGIN, 1.0, dims, occ, a, b)
        rev, _ = voxel_raycast(ORIGIN, 1.0, dims, occ, b, a)
        assert fwd == rev


def test_first_hit_returns_entry_point():
    dims = (10, 3, 3)
    occ = bytearray(90)
    occ[6 * 9 + 1 * 3 + 1] = 1
    hit, t = raycast_first_hit(ORIGIN, 1.0, dims, occ, Vec3(0.5, 1.5, 1.5), Vec3(9.5, 1.5, 1.5))
    assert hit == (6, 1, 1)
    # entry plane x=6 -> t = (6-0.5)/9
    assert t == pytest.approx(5.5 / 9.0, abs=1e-9)


def test_first_hit_none_when_clear():
    dims = (10, 3, 3)
    occ = bytearray(90)
    hit, t = raycast_first_hit(ORIGIN, 1.0, dims, occ, Vec3(0.5, 1.5, 1.5), Vec3(9.5, 1.5, 1.5))
    assert hit is None and t == 1.0
