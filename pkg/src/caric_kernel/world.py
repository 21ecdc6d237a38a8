"""World model: occupancy grids, scenario schema + IO, and the procedural
scenario generator (solid block, hollow shell, sparse lattice).

A scenario is fully observable ground truth for the simulator; planners only
ever see bounding boxes, comms traffic, and their own sensors.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import (
    Aabb,
    CameraIntrinsics,
    Vec3,
    VoxelIndex,
    vdist,
    visfinite,
    voxel_center,
    world_to_voxel,
)

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

UAV_NAMES = ("alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel")


class ScenarioError(ValueError):
    """Scenario file or invariant violation; message names the failing check."""


# ------------------------------------------------------------------
# occupancy grid
# ------------------------------------------------------------------

class OccupancyGrid:
    """Dense voxel grid over a box, states in {UNKNOWN, FREE, OCCUPIED}.

    States live in a flat bytearray (i-major) with a parallel occupied-only
    mirror so the ray marchers can index without numpy overhead.
    """

    __slots__ = ("origin", "voxel_size", "dims", "states", "occ", "_plane")

    def __init__(
        self,
        origin: Sequence[float],
        voxel_size: float,
        dims: tuple[int, int, int],
        fill: int = UNKNOWN,
    ) -> None:
        if voxel_size <= 0.0:
            raise ScenarioError("voxel_size_m must be positive")
        if min(dims) <= 0:
            raise ScenarioError(f"grid dims must be positive, got {dims}")
        self.origin = Vec3(*origin)
        self.voxel_size = float(voxel_size)
        self.dims = (int(dims[0]), int(dims[1]), int(dims[2]))
        n = dims[0] * dims[1] * dims[2]
        self.states = bytearray(n) if fill == UNKNOWN else bytearray(bytes([fill]) * n)
        self.occ = bytearray(n) if fill != OCCUPIED else bytearray(b"\x01" * n)
        self._plane = dims[1] * dims[2]

    def flat(self, i: int, j: int, k: int) -> int:
        return i * self._plane + j * self.dims[2] + k

    def in_bounds(self, idx: Sequence[int]) -> bool:
        return (
            0 <= idx[0] < self.dims[0]
            and 0 <= idx[1] < self.dims[1]
            and 0 <= idx[2] < self.dims[2]
        )

    def state(self, idx: Sequence[int]) -> int:
        return self.states[idx[0] * self._plane + idx[1] * self.dims[2] + idx[2]]

    def set_state(self, idx: Sequence[int], value: int) -> None:
        f = idx[0] * self._plane + idx[1] * self.dims[2] + idx[2]
        self.states[f] = value
        self.occ[f] = 1 if value == OCCUPIED else 0

    def as_array(self) -> np.ndarray:
        """Writable (nx, ny, nz) uint8 view over the state buffer."""
        return np.frombuffer(self.states, dtype=np.uint8).reshape(self.dims)

    def occ_array(self) -> np.ndarray:
        return np.frombuffer(self.occ, dtype=np.uint8).reshape(self.dims)

    def rebuild_occ(self) -> None:
        """Re-derive the occupied mirror after bulk writes to `states`."""
        arr = np.frombuffer(self.states, dtype=np.uint8)
        np.copyto(np.frombuffer(self.occ, dtype=np.uint8), (arr == OCCUPIED).astype(np.uint8))

    def occupied_count(self) -> int:
        return int(np.frombuffer(self.occ, dtype=np.uint8).sum())

    def occupied_indices(self) -> list[VoxelIndex]:
        arr = self.occ_array()
        return [tuple(int(v) for v in idx) for idx in np.argwhere(arr)]

    def world_to_voxel(self, p: Sequence[float]) -> Optional[VoxelIndex]:
        return world_to_voxel(p, self.origin, self.voxel_size, self.dims)

    def voxel_center(self, idx: Sequence[int]) -> Vec3:
        return voxel_center(idx, self.origin, self.voxel_size)

    def extent(self) -> Aabb:
        return Aabb(
            self.origin,
            Vec3(
                self.origin.x + self.dims[0] * self.voxel_size,
                self.origin.y + self.dims[1] * self.voxel_size,
                self.origin.z + self.dims[2] * self.voxel_size,
            ),
        )

    def clone(self) -> "OccupancyGrid":
        g = OccupancyGrid(self.origin, self.voxel_size, self.dims)
        g.states[:] = self.states
        g.occ[:] = self.occ
        return g


# ------------------------------------------------------------------
# scenario schema
# ------------------------------------------------------------------

@dataclass(frozen=True)
class InterestPoint:
    id: int
    position: Vec3
    normal: Vec3


@dataclass(frozen=True)
class LidarSpec:
    max_range_m: float = 20.0
    rays_per_scan: int = 160
    scan_rate_hz: float = 10.0


@dataclass(frozen=True)
class UavSpec:
    name: str
    role: str  # "explorer" | "photographer"
    start: Vec3
    max_speed_mps: float = 3.0
    max_accel_mps2: float = 3.0
    collision_radius_m: float = 0.15
    camera: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics.from_pinhole(600.0, 1280.0, 960.0)
    )
    lidar: Optional[LidarSpec] = None


@dataclass
class FleetSpec:
    uavs: list[UavSpec]

    def __iter__(self):
        return iter(self.uavs)

    def __len__(self) -> int:
        return len(self.uavs)

    def names(self) -> list[str]:
        return [u.name for u in self.uavs]

    def by_name(self, name: str) -> UavSpec:
        for u in self.uavs:
            if u.name == name:
                return u
        raise KeyError(name)

    def explorers(self) -> list[UavSpec]:
        return [u for u in self.uavs if u.role == "explorer"]

    def photographers(self) -> list[UavSpec]:
        return [u for u in self.uavs if u.role == "photographer"]


@dataclass
class Scenario:
    name: str
    voxel_size: float
    boxes: list[Aabb]
    grid: OccupancyGrid  # ground truth, no UNKNOWN cells
    interest_points: list[InterestPoint]
    fleet: FleetSpec
    gcs_position: Vec3
    mission_budget_s: float
    rng_seed: int


def validate_scenario(sc: Scenario) -> None:
    """Raise ScenarioError naming the first violated invariant."""
    if sc.voxel_size <= 0.0:
        raise ScenarioError("voxel_size_m must be positive")
    if sc.mission_budget_s <= 0.0:
        raise ScenarioError("mission_budget_s must be positive")
    if not sc.boxes:
        raise ScenarioError("bounding_boxes: at least one box is required")
    if not visfinite(sc.gcs_position):
        raise ScenarioError("gcs_position_m must be finite")

    if bytes(sc.grid.states).find(bytes([UNKNOWN])) >= 0:
        raise ScenarioError("ground-truth grid must not contain unknown voxels")

    half = 0.5 * sc.voxel_size
    for idx in sc.grid.occupied_indices():
        c = sc.grid.voxel_center(idx)
        if not any(b.contains(c, slack=1e-9) for b in sc.boxes):
            raise ScenarioError(
                f"occupied voxel {idx} lies outside every bounding box (structures may not exceed their boxes)"
            )

    ids = set()
    for n, ip in enumerate(sc.interest_points):
        path = f"interest_points[{n}]"
        if ip.id in ids:
            raise ScenarioError(f"{path}.id: duplicate interest point id {ip.id}")
        ids.add(ip.id)
        if not visfinite(ip.position) or not visfinite(ip.normal):
            raise ScenarioError(f"{path}: position/normal must be finite")
        ax = _axis_of(ip.normal)
        if ax is None:
            raise ScenarioError(f"{path}.normal: must be a unit axis-aligned vector, got {tuple(ip.normal)}")
        owner_center = Vec3(
            ip.position.x - ip.normal.x * half,
            ip.position.y - ip.normal.y * half,
            ip.position.z - ip.normal.z * half,
        )
        owner = sc.grid.world_to_voxel(owner_center)
        if owner is None or sc.grid.state(owner) != OCCUPIED:
            raise ScenarioError(f"{path}: position does not lie on a face of an occupied voxel")
        neigh = (owner[0] + int(ip.normal.x), owner[1] + int(ip.normal.y), owner[2] + int(ip.normal.z))
        if sc.grid.in_bounds(neigh) and sc.grid.state(neigh) == OCCUPIED:
            raise ScenarioError(f"{path}: normal points into an occupied voxel")
        if not any(b.contains(ip.position, slack=1e-9) for b in sc.boxes):
            raise ScenarioError(f"{path}: interest point lies outside every bounding box")

    names = set()
    for n, u in enumerate(sc.fleet.uavs):
        path = f"fleet[{n}]"
        if u.name in names:
            raise ScenarioError(f"{path}.name: duplicate UAV name {u.name!r}")
        names.add(u.name)
        if u.role not in ("explorer", "photographer"):
            raise ScenarioError(f"{path}.role: unknown role {u.role!r}")
        if u.role == "explorer" and u.lidar is None:
            raise ScenarioError(f"{path}: explorer {u.name!r} must carry a lidar")
        if u.max_speed_mps <= 0.0 or u.max_accel_mps2 <= 0.0:
            raise ScenarioError(f"{path}: speed/accel limits must be positive")
        if u.collision_radius_m <= 0.0:
            raise ScenarioError(f"{path}.collision_radius_m: must be positive")
        cell = sc.grid.world_to_voxel(u.start)
        if cell is not None and sc.grid.state(cell) == OCCUPIED:
            raise ScenarioError(f"{path}: start position is inside an occupied voxel")
    for a in range(len(sc.fleet.uavs)):
        for b in range(a + 1, len(sc.fleet.uavs)):
            ua, ub = sc.fleet.uavs[a], sc.fleet.uavs[b]
            if vdist(ua.start, ub.start) <= ua.collision_radius_m + ub.collision_radius_m:
                raise ScenarioError(
                    f"fleet: start positions of {ua.name!r} and {ub.name!r} violate the "
                    f"start-separation invariant (must exceed the sum of collision radii)"
                )


def _axis_of(v: Sequence[float]) -> Optional[int]:
    for ax in range(3):
        if abs(abs(v[ax]) - 1.0) < 1e-9 and abs(v[(ax + 1) % 3]) < 1e-9 and abs(v[(ax + 2) % 3]) < 1e-9:
            return ax
    return None


def operational_volume(boxes: Iterable[Aabb], starts: Iterable[Sequence[float]], voxel_size: float) -> Aabb:
    """Smallest cuboid containing every box and start, plus one voxel margin."""
    boxes = list(boxes)
    if not boxes:
        raise ScenarioError("operational volume needs at least one bounding box")
    lo = [min(b.lo[ax] for b in boxes) for ax in range(3)]
    hi = [max(b.hi[ax] for b in boxes) for ax in range(3)]
    for s in starts:
        for ax in range(3):
            lo[ax] = min(lo[ax], s[ax])
            hi[ax] = max(hi[ax], s[ax])
    return Aabb(
        Vec3(lo[0] - voxel_size, lo[1] - voxel_size, lo[2] - voxel_size),
        Vec3(hi[0] + voxel_size, hi[1] + voxel_size, hi[2] + voxel_size),
    )


def aligned_grid_params(
    volume: Aabb,
    anchor: Sequence[float],
    voxel_size: float,
) -> tuple[Vec3, tuple[int, int, int]]:
    """Snap a volume outward onto the voxel lattice anchored at `anchor`.

    Keeps belief grids index-aligned with the ground-truth grid so voxel
    identities agree across maps.
    """
    lo = []
    dims = []
    for ax in range(3):
        i0 = math.floor((volume.lo[ax] - anchor[ax]) / voxel_size + 1e-9)
        i1 = math.ceil((volume.hi[ax] - anchor[ax]) / voxel_size - 1e-9)
        lo.append(anchor[ax] + i0 * voxel_size)
        dims.append(max(1, i1 - i0))
    return Vec3(*lo), (dims[0], dims[1], dims[2])


# ------------------------------------------------------------------
# serialization
# ------------------------------------------------------------------

SCENARIO_FORMAT = "caric-kernel-scenario@1"


def _occupied_spans(grid: OccupancyGrid) -> list[list[int]]:
    """Run-length encode occupied voxels as [j, k, i_start, i_end) spans."""
    arr = grid.occ_array()
    spans: list[list[int]] = []
    nx = grid.dims[0]
    for j in range(grid.dims[1]):
        for k in range(grid.dims[2]):
            col = arr[:, j, k]
            if not col.any():
                continue
            padded = np.diff(np.concatenate(([0], col.astype(np.int8), [0])))
            starts = np.flatnonzero(padded == 1)
            ends = np.flatnonzero(padded == -1)
            for i0, i1 in zip(starts, ends):
                spans.append([int(j), int(k), int(i0), int(i1)])
    return spans


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "format": SCENARIO_FORMAT,
        "name": sc.name,
        "rng_seed": sc.rng_seed,
        "voxel_size_m": sc.voxel_size,
        "grid_origin_m": list(sc.grid.origin),
        "grid_dims": list(sc.grid.dims),
        "bounding_boxes": [{"min_m": list(b.lo), "max_m": list(b.hi)} for b in sc.boxes],
        "occupied_voxels": {"encoding": "x_spans", "spans": _occupied_spans(sc.grid)},
        "interest_points": [
            {"id": ip.id, "pos_m": list(ip.position), "normal": list(ip.normal)}
            for ip in sc.interest_points
        ],
        "fleet": [
            {
                "name": u.name,
                "role": u.role,
                "start_m": list(u.start),
                "max_speed_mps": u.max_speed_mps,
                "max_accel_mps2": u.max_accel_mps2,
                "collision_radius_m": u.collision_radius_m,
                "camera": {
                    "focal_length_px": u.camera.focal_length_px,
                    "image_width_px": u.camera.image_width_px,
                    "image_height_px": u.camera.image_height_px,
                    "horizontal_fov_rad": u.camera.horizontal_fov_rad,
                    "vertical_fov_rad": u.camera.vertical_fov_rad,
                    "exposure_time_s": u.camera.exposure_time_s,
                    "desired_mmpp": u.camera.desired_mmpp,
                },
                "lidar": None
                if u.lidar is None
                else {
                    "max_range_m": u.lidar.max_range_m,
                    "rays_per_scan": u.lidar.rays_per_scan,
                    "scan_rate_hz": u.lidar.scan_rate_hz,
                },
            }
            for u in sc.fleet.uavs
        ],
        "gcs_position_m": list(sc.gcs_position),
        "mission_budget_s": sc.mission_budget_s,
    }


def save_scenario(sc: Scenario, path: str) -> None:
    validate_scenario(sc)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _req(d: dict, key: str, path: str):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(f"{path}.{key}: missing required field")
    return d[key]


def _vec(v, path: str) -> Vec3:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ScenarioError(f"{path}: expected [x, y, z]")
    try:
        out = Vec3(float(v[0]), float(v[1]), float(v[2]))
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}: expected numeric [x, y, z]") from None
    if not visfinite(out):
        raise ScenarioError(f"{path}: components must be finite")
    return out


def scenario_from_dict(data: dict) -> Scenario:
    if _req(data, "format", "$") != SCENARIO_FORMAT:
        raise ScenarioError(f"$.format: unsupported scenario format {data.get('format')!r}")
    voxel = float(_req(data, "voxel_size_m", "$"))
    origin = _vec(_req(data, "grid_origin_m", "$"), "$.grid_origin_m")
    dims_raw = _req(data, "grid_dims", "$")
    if not isinstance(dims_raw, list) or len(dims_raw) != 3:
        raise ScenarioError("$.grid_dims: expected [nx, ny, nz]")
    dims = (int(dims_raw[0]), int(dims_raw[1]), int(dims_raw[2]))

    grid = OccupancyGrid(origin, voxel, dims, fill=FREE)
    occ = _req(data, "occupied_voxels", "$")
    if _req(occ, "encoding", "$.occupied_voxels") != "x_spans":
        raise ScenarioError("$.occupied_voxels.encoding: only 'x_spans' is supported")
    arr = grid.as_array()
    for n, span in enumerate(_req(occ, "spans", "$.occupied_voxels")):
        if not isinstance(span, list) or len(span) != 4:
            raise ScenarioError(f"$.occupied_voxels.spans[{n}]: expected [j, k, i_start, i_end]")
        j, k, i0, i1 = (int(x) for x in span)
        if not (0 <= j < dims[1] and 0 <= k < dims[2] and 0 <= i0 < i1 <= dims[0]):
            raise ScenarioError(f"$.occupied_voxels.spans[{n}]: span {span} out of grid bounds")
        arr[i0:i1, j, k] = OCCUPIED
    grid.rebuild_occ()

    boxes = []
    for n, b in enumerate(_req(data, "bounding_boxes", "$")):
        lo = _vec(_req(b, "min_m", f"$.bounding_boxes[{n}]"), f"$.bounding_boxes[{n}].min_m")
        hi = _vec(_req(b, "max_m", f"$.bounding_boxes[{n}]"), f"$.bounding_boxes[{n}].max_m")
        try:
            boxes.append(Aabb(lo, hi))
        except ValueError as e:
            raise ScenarioError(f"$.bounding_boxes[{n}]: {e}") from None

    points = []
    for n, p in enumerate(_req(data, "interest_points", "$")):
        path = f"$.interest_points[{n}]"
        points.append(
            InterestPoint(
                id=int(_req(p, "id", path)),
                position=_vec(_req(p, "pos_m", path), f"{path}.pos_m"),
                normal=_vec(_req(p, "normal", path), f"{path}.normal"),
            )
        )

    uavs = []
    for n, u in enumerate(_req(data, "fleet", "$")):
        path = f"$.fleet[{n}]"
        cam = _req(u, "camera", path)
        cpath = f"{path}.camera"
        try:
            camera = CameraIntrinsics(
                focal_length_px=float(_req(cam, "focal_length_px", cpath)),
                image_width_px=float(_req(cam, "image_width_px", cpath)),
                image_height_px=float(_req(cam, "image_height_px", cpath)),
                horizontal_fov_rad=float(_req(cam, "horizontal_fov_rad", cpath)),
                vertical_fov_rad=float(_req(cam, "vertical_fov_rad", cpath)),
                exposure_time_s=float(_req(cam, "exposure_time_s", cpath)),
                desired_mmpp=float(_req(cam, "desired_mmpp", cpath)),
            )
        except ValueError as e:
            raise ScenarioError(f"{cpath}: {e}") from None
        lid = u.get("lidar")
        lidar = None
        if lid is not None:
            lpath = f"{path}.lidar"
            lidar = LidarSpec(
                max_range_m=float(_req(lid, "max_range_m", lpath)),
                rays_per_scan=int(_req(lid, "rays_per_scan", lpath)),
                scan_rate_hz=float(_req(lid, "scan_rate_hz", lpath)),
            )
        uavs.append(
            UavSpec(
                name=str(_req(u, "name", path)),
                role=str(_req(u, "role", path)),
                start=_vec(_req(u, "start_m", path), f"{path}.start_m"),
                max_speed_mps=float(_req(u, "max_speed_mps", path)),
                max_accel_mps2=float(_req(u, "max_accel_mps2", path)),
                collision_radius_m=float(_req(u, "collision_radius_m", path)),
                camera=camera,
                lidar=lidar,
            )
        )

    sc = Scenario(
        name=str(_req(data, "name", "$")),
        voxel_size=voxel,
        boxes=boxes,
        grid=grid,
        interest_points=points,
        fleet=FleetSpec(uavs),
        gcs_position=_vec(_req(data, "gcs_position_m", "$"), "$.gcs_position_m"),
        mission_budget_s=float(_req(data, "mission_budget_s", "$")),
        rng_seed=int(_req(data, "rng_seed", "$")),
    )
    validate_scenario(sc)
    return sc


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario file is not valid JSON: {e}") from None
    return scenario_from_dict(data)


# ------------------------------------------------------------------
# procedural generator
# ------------------------------------------------------------------

@dataclass
class GeneratorSpec:
    style: str = "shell"  # "solid" | "shell" | "lattice"
    structure_size_m: tuple[float, float, float] = (16.0, 16.0, 10.0)
    voxel_size_m: float = 1.0
    n_interest_points: int = 200
    seed: int = 0
    n_explorers: int = 1
    n_photographers: int = 2
    mission_budget_s: float = 240.0
    box_padding_m: float = 4.0
    lattice_members: int = 12
    lidar_range_m: float = 20.0
    lidar_rays_per_scan: int = 160
    explorer_speed_mps: float = 4.0
    photographer_speed_mps: float = 3.0
    max_accel_mps2: float = 3.0
    collision_radius_m: float = 0.15
    focal_length_px: float = 600.0
    image_width_px: float = 1280.0
    image_height_px: float = 960.0
    exposure_time_s: float = 0.01
    desired_mmpp: float = 8.0
    name: Optional[str] = None


def _carve_structure(arr: np.ndarray, spec: GeneratorSpec, pad: int, sv: tuple[int, int, int], rng: random.Random) -> None:
    px, py = pad, pad
    sx, sy, sz = sv
    if spec.style == "solid":
        arr[px : px + sx, py : py + sy, 0:sz] = OCCUPIED
    elif spec.style == "shell":
        # hollow facade: four perimeter walls, open top, empty courtyard
        arr[px : px + sx, py, 0:sz] = OCCUPIED
        arr[px : px + sx, py + sy - 1, 0:sz] = OCCUPIED
        arr[px, py : py + sy, 0:sz] = OCCUPIED
        arr[px + sx - 1, py : py + sy, 0:sz] = OCCUPIED
    elif spec.style == "lattice":
        # sparse one-voxel-thick members, kept mutually separated
        placed: list[tuple[int, int, int, int, int]] = []  # (axis, i, j, k, length)
        attempts = 0
        while len(placed) < spec.lattice_members and attempts < 400:
            attempts += 1
            axis = rng.choice((0, 1, 2, 2))  # bias toward verticals, crane-like
            limit = (sx, sy, sz)[axis]
            if limit < 3:
                continue
            length = rng.randint(3, max(3, min(limit, 9)))
            i = rng.randrange(0, sx - (length if axis == 0 else 1) + 1)
            j = rng.randrange(0, sy - (length if axis == 1 else 1) + 1)
            k = rng.randrange(0, sz - (length if axis == 2 else 1) + 1)
            cells = []
            for s in range(length):
                cells.append((i + (s if axis == 0 else 0), j + (s if axis == 1 else 0), k + (s if axis == 2 else 0)))
            ok = True
            for (ci, cj, ck) in cells:
                lo_i, hi_i = max(0, ci - 1), min(sx, ci + 2)
                lo_j, hi_j = max(0, cj - 1), min(sy, cj + 2)
                lo_k, hi_k = max(0, ck - 1), min(sz, ck + 2)
                if (arr[px + lo_i : px + hi_i, py + lo_j : py + hi_j, lo_k:hi_k] == OCCUPIED).any():
                    ok = False
                    break
            if not ok:
                continue
            for (ci, cj, ck) in cells:
                arr[px + ci, py + cj, ck] = OCCUPIED
            placed.append((axis, i, j, k, length))
        if not placed:
            raise ScenarioError("lattice generator failed to place any member; structure too small")
    else:
        raise ScenarioError(f"unknown generator style {spec.style!r}")


def _outside_connected_free(grid: OccupancyGrid) -> np.ndarray:
    """Boolean mask of free voxels reachable from the grid boundary (6-conn)."""
    arr = grid.as_array()
    nx, ny, nz = grid.dims
    seen = np.zeros(grid.dims, dtype=bool)
    q: deque[tuple[int, int, int]] = deque()
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if i in (0, nx - 1) or j in (0, ny - 1) or k in (0, nz - 1):
                    if arr[i, j, k] != OCCUPIED and not seen[i, j, k]:
                        seen[i, j, k] = True
                        q.append((i, j, k))
    while q:
        i, j, k = q.popleft()
        for di, dj, dk in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            ni, nj, nk = i + di, j + dj, k + dk
            if 0 <= ni < nx and 0 <= nj < ny and 0 <= nk < nz:
                if not seen[ni, nj, nk] and arr[ni, nj, nk] != OCCUPIED:
                    seen[ni, nj, nk] = True
                    q.append((ni, nj, nk))
    return seen


def exposed_faces(grid: OccupancyGrid) -> list[tuple[VoxelIndex, tuple[int, int, int]]]:
    """(occupied voxel, outward unit step) pairs whose neighbor is free space
    reachable from outside the structure — the faces a camera can actually see.
    """
    reachable = _outside_connected_free(grid)
    arr = grid.as_array()
    nx, ny, nz = grid.dims
    faces = []
    for (i, j, k) in np.argwhere(arr == OCCUPIED):
        for d in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            ni, nj, nk = i + d[0], j + d[1], k + d[2]
            if 0 <= ni < nx and 0 <= nj < ny and 0 <= nk < nz and reachable[ni, nj, nk]:
                faces.append(((int(i), int(j), int(k)), d))
    faces.sort()
    return faces


def generate_scenario(spec: GeneratorSpec) -> Scenario:
    """Deterministic scenario synthesis; identical spec -> identical scenario."""
    rng = random.Random(spec.seed)
    v = spec.voxel_size_m
    pad = max(2, int(round(spec.box_padding_m / v)))
    sv = tuple(max(1, int(round(s / v))) for s in spec.structure_size_m)
    dims = (sv[0] + 2 * pad, sv[1] + 2 * pad, sv[2] + pad)
    grid = OccupancyGrid(Vec3(0.0, 0.0, 0.0), v, dims, fill=FREE)
    arr = grid.as_array()
    _carve_structure(arr, spec, pad, sv, rng)
    grid.rebuild_occ()

    box = grid.extent()
    faces = exposed_faces(grid)
    if not faces:
        raise ScenarioError("generated structure exposes no visible faces")

    points = []
    for pid in range(spec.n_interest_points):
        (i, j, k), d = faces[rng.randrange(len(faces))]
        center = grid.voxel_center((i, j, k))
        face_center = Vec3(
            center.x + d[0] * 0.5 * v,
            center.y + d[1] * 0.5 * v,
            center.z + d[2] * 0.5 * v,
        )
        # jitter within the face plane, inset from the edges
        offs = [rng.uniform(-0.48, 0.48) * v, rng.uniform(-0.48, 0.48) * v]
        tangents = [ax for ax in range(3) if d[ax] == 0]
        pos = list(face_center)
        pos[tangents[0]] += offs[0]
        pos[tangents[1]] += offs[1]
        points.append(InterestPoint(id=pid, position=Vec3(*pos), normal=Vec3(float(d[0]), float(d[1]), float(d[2]))))

    camera = CameraIntrinsics.from_pinhole(
        spec.focal_length_px,
        spec.image_width_px,
        spec.image_height_px,
        exposure_time_s=spec.exposure_time_s,
        desired_mmpp=spec.desired_mmpp,
    )
    n_total = spec.n_explorers + spec.n_photographers
    if n_total < 1:
        raise ScenarioError("fleet must contain at least one UAV")
    if n_total > len(UAV_NAMES):
        raise ScenarioError(f"fleet too large (max {len(UAV_NAMES)})")
    cx = 0.5 * (box.lo.x + box.hi.x)
    # launch pads staggered around the structure: the operating envelope is
    # the tight bbox of boxes and starts, so perimeter staging is what buys
    # the fleet camera standoff room on every side of the structure
    d = min(3.3 * v, (pad - 0.7) * v)
    pads = [
        Vec3(cx, box.lo.y - d, 0.0),
        Vec3(box.lo.x - d, box.lo.y - d, 0.0),
        Vec3(box.hi.x + d, box.hi.y + d, 0.0),
        Vec3(box.hi.x + d, box.lo.y - d, 0.0),
        Vec3(box.lo.x - d, box.hi.y + d, 0.0),
        Vec3(cx - 2.0 * v, box.lo.y - d, 0.0),
        Vec3(cx + 2.0 * v, box.lo.y - d, 0.0),
        Vec3(cx, box.hi.y + d, 0.0),
    ]
    uavs = []
    for n in range(n_total):
        role = "explorer" if n < spec.n_explorers else "photographer"
        start = pads[n]
        uavs.append(
            UavSpec(
                name=UAV_NAMES[n],
                role=role,
                start=start,
                max_speed_mps=spec.explorer_speed_mps if role == "explorer" else spec.photographer_speed_mps,
                max_accel_mps2=spec.max_accel_mps2,
                collision_radius_m=spec.collision_radius_m,
                camera=camera,
                lidar=LidarSpec(
                    max_range_m=spec.lidar_range_m,
                    rays_per_scan=spec.lidar_rays_per_scan,
                    scan_rate_hz=10.0,
                )
                if role == "explorer"
                else None,
            )
        )

    sc = Scenario(
        name=spec.name or f"{spec.style}-s{spec.seed}",
        voxel_size=v,
        boxes=[box],
        grid=grid,
        interest_points=points,
        fleet=FleetSpec(uavs),
        gcs_position=Vec3(cx, box.lo.y - 6.0 * v, 0.0),
        mission_budget_s=spec.mission_budget_s,
        rng_seed=spec.seed,
    )
    validate_scenario(sc)
    return sc
