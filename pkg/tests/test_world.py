"""Scenario model tests: generator invariants, JSON round trip, validation
errors, and the operational-volume rule.
"""

import json

import pytest

from caric_kernel.geometry import Aabb, Vec3, vdist, voxel_raycast
from caric_kernel.world import (
    FREE,
    OCCUPIED,
    GeneratorSpec,
    InterestPoint,
    OccupancyGrid,
    ScenarioError,
    aligned_grid_params,
    exposed_faces,
    generate_scenario,
    load_scenario,
    operational_volume,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)


@pytest.fixture(scope="module")
def shell_scenario():
    return generate_scenario(GeneratorSpec(style="shell", seed=1))


def test_generator_is_deterministic():
    a = scenario_to_dict(generate_scenario(GeneratorSpec(style="lattice", seed=9)))
    b = scenario_to_dict(generate_scenario(GeneratorSpec(style="lattice", seed=9)))
    assert a == b


def test_generator_seeds_differ():
    a = scenario_to_dict(generate_scenario(GeneratorSpec(style="lattice", seed=1)))
    b = scenario_to_dict(generate_scenario(GeneratorSpec(style="lattice", seed=2)))
    assert a != b


def test_generated_scenario_passes_validation(shell_scenario):
    validate_scenario(shell_scenario)  # must not raise
    assert len(shell_scenario.interest_points) == 200
    assert shell_scenario.fleet.explorers()[0].lidar is not None
    assert all(u.lidar is None for u in shell_scenario.fleet.photographers())


def test_interest_points_sit_on_reachable_faces(shell_scenario):
    """Every point must be visible from somewhere outside: the face's free
    neighbor connects to the outside, so a ray from just off the face is clear."""
    g = shell_scenario.grid
    v = shell_scenario.voxel_size
    for ip in shell_scenario.interest_points:
        eye = Vec3(
            ip.position.x + ip.normal.x * 2.0 * v,
            ip.position.y + ip.normal.y * 2.0 * v,
            ip.position.z + ip.normal.z * 2.0 * v,
        )
        blocked, _ = voxel_raycast(g.origin, v, g.dims, g.occ, eye, ip.position)
        assert not blocked


def test_shell_is_hollow(shell_scenario):
    g = shell_scenario.grid
    arr = g.as_array()
    # courtyard interior of the facade must be free space
    assert arr[12, 12, 2] == FREE
    assert g.occupied_count() == 600


def test_starts_outside_boxes(shell_scenario):
    box = shell_scenario.boxes[0]
    for u in shell_scenario.fleet:
        assert not box.contains(u.start)
    assert not box.contains(shell_scenario.gcs_position)


def test_json_round_trip(tmp_path, shell_scenario):
    path = str(tmp_path / "scenario.json")
    save_scenario(shell_scenario, path)
    loaded = load_scenario(path)
    assert scenario_to_dict(loaded) == scenario_to_dict(shell_scenario)
    # file is stable: saving the loaded copy yields identical bytes
    path2 = str(tmp_path / "again.json")
    save_scenario(loaded, path2)
    assert open(path).read() == open(path2).read()


def test_load_rejects_missing_field(tmp_path, shell_scenario):
    d = scenario_to_dict(shell_scenario)
    del d["gcs_position_m"]
    with pytest.raises(ScenarioError, match=r"gcs_position_m"):
        scenario_from_dict(d)


def test_load_rejects_bad_span(shell_scenario):
    d = scenario_to_dict(shell_scenario)
    d["occupied_voxels"]["spans"][0] = [0, 0, 5, 99]
    with pytest.raises(ScenarioError, match=r"spans\[0\]"):
        scenario_from_dict(d)


def test_load_rejects_malformed_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        load_scenario(str(p))


def test_validation_rejects_occupied_outside_box(shell_scenario):
    sc = generate_scenario(GeneratorSpec(style="shell", seed=1))
    sc.boxes = [Aabb(Vec3(0, 0, 0), Vec3(3, 3, 3))]
    with pytest.raises(ScenarioError, match="outside every bounding box"):
        validate_scenario(sc)


def test_validation_rejects_floating_interest_point():
    sc = generate_scenario(GeneratorSpec(style="shell", seed=1))
    sc.interest_points = [InterestPoint(0, Vec3(2.0, 2.0, 30.0), Vec3(0, 0, 1.0))]
    with pytest.raises(ScenarioError, match="face of an occupied voxel"):
        validate_scenario(sc)


def test_validation_rejects_oblique_normal():
    sc = generate_scenario(GeneratorSpec(style="shell", seed=1))
    ip = sc.interest_points[0]
    sc.interest_points = [InterestPoint(0, ip.position, Vec3(0.7, 0.7, 0.0))]
    with pytest.raises(ScenarioError, match="axis-aligned"):
        validate_scenario(sc)


def test_validation_rejects_duplicate_uav_names():
    sc = generate_scenario(GeneratorSpec(style="shell", seed=1))
    sc.fleet.uavs[1] = sc.fleet.uavs[1].__class__(**{**sc.fleet.uavs[1].__dict__, "name": "alpha"})
    with pytest.raises(ScenarioError, match="duplicate UAV name"):
        validate_scenario(sc)


def test_validation_rejects_overlapping_starts():
    sc = generate_scenario(GeneratorSpec(style="shell", seed=1))
    u0, u1 = sc.fleet.uavs[0], sc.fleet.uavs[1]
    sc.fleet.uavs[1] = u1.__class__(**{**u1.__dict__, "start": u0.start})
    with pytest.raises(ScenarioError, match="start-separation"):
        validate_scenario(sc)


def test_validation_rejects_explorer_without_lidar():
    sc = generate_scenario(GeneratorSpec(style="shell", seed=1))
    u0 = sc.fleet.uavs[0]
    sc.fleet.uavs[0] = u0.__class__(**{**u0.__dict__, "lidar": None})
    with pytest.raises(ScenarioError, match="must carry a lidar"):
        validate_scenario(sc)


def test_operational_volume_example():
    boxes = [Aabb(Vec3(0, 0, 0), Vec3(10, 10, 10))]
    starts = [Vec3(-2.0, 0.0, 0.0)]
    vol = operational_volume(boxes, starts, 1.0)
    assert tuple(vol.lo) == pytest.approx((-3.0, -1.0, -1.0))
    assert tuple(vol.hi) == pytest.approx((11.0, 11.0, 11.0))


def test_aligned_grid_params_snaps_outward():
    vol = Aabb(Vec3(-2.3, 0.1, -0.7), Vec3(10.2, 9.9, 10.0))
    origin, dims = aligned_grid_params(vol, Vec3(0.0, 0.0, 0.0), 1.0)
    assert tuple(origin) == pytest.approx((-3.0, 0.0, -1.0))
    assert dims == (14, 10, 11)
    # covers volume
    assert origin.x <= vol.lo.x and origin.x + dims[0] >= vol.hi.x


def test_exposed_faces_exclude_sealed_interior():
    # 3x3x3 solid block in a 5x5x5 free grid: the center voxel is buried but
    # every outer face of the cube is exposed (including top); bottom faces at
    # k=0 have no free neighbor below inside the grid.
    g = OccupancyGrid(Vec3(0, 0, 0), 1.0, (5, 5, 5), fill=FREE)
    arr = g.as_array()
    arr[1:4, 1:4, 0:3] = OCCUPIED
    g.rebuild_occ()
    faces = exposed_faces(g)
    owners = {f[0] for f in faces}
    assert (2, 2, 1) not in owners  # buried center
    assert ((2, 2, 2), (0, 0, 1)) in faces  # top face
    assert ((1, 2, 1), (-1, 0, 0)) in faces  # side face
    assert all(not (d == (0, 0, -1) and c[2] == 0) for c, d in faces)


def test_occupancy_grid_views_share_buffer():
    g = OccupancyGrid(Vec3(0, 0, 0), 1.0, (3, 3, 3), fill=FREE)
    g.set_state((1, 2, 0), OCCUPIED)
    assert g.as_array()[1, 2, 0] == OCCUPIED
    assert g.occ_array()[1, 2, 0] == 1
    arr = g.as_array()
    arr[0, 0, 0] = OCCUPIED
    g.rebuild_occ()
    assert g.state((0, 0, 0)) == OCCUPIED
    assert g.occ[g.flat(0, 0, 0)] == 1


def test_grid_extent_and_clone():
    g = OccupancyGrid(Vec3(-1, 0, 0), 0.5, (4, 2, 2), fill=FREE)
    ext = g.extent()
    assert tuple(ext.lo) == (-1.0, 0.0, 0.0)
    assert tuple(ext.hi) == (1.0, 1.0, 1.0)
    g2 = g.clone()
    g2.set_state((0, 0, 0), OCCUPIED)
    assert g.state((0, 0, 0)) == FREE
