"""Shared world belief: the map each agent accumulates from its own lidar and
from teammates' map broadcasts, plus navigation helpers that run on it.

The belief lattice is index-aligned with the ground-truth grid (same anchor,
same voxel size) but covers the whole operating envelope, so voxel identities
agree across agents and map chunks splice in with pure integer offsets. The
world is static, hence merging is monotone: cells only ever go from unknown
to known.
"""

from __future__ import annotations

import heapq
import math
from typing import Iterable, Optional, Sequence

from ..comms import pack_cells, unpack_cells
from ..geometry import Vec3, VoxelIndex, traverse_segment, voxel_raycast
from ..mtsp import Waypoint
from ..world import FREE, OCCUPIED, UNKNOWN, OccupancyGrid
from ..engine.types import LidarScan, PlannerBrief

_FACE_DIRS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


class BeliefMap:
    """Monotone occupancy belief over the operating envelope."""

    def __init__(self, origin: Sequence[float], voxel_size: float, dims: tuple[int, int, int]) -> None:
        self.grid = OccupancyGrid(origin, voxel_size, dims, fill=UNKNOWN)
        self.version = 0  # bumps once per changed cell
        self._dirty_lo: Optional[list[int]] = None
        self._dirty_hi: Optional[list[int]] = None

    # -- read access ------------------------------------------------------
    @property
    def origin(self) -> Vec3:
        return self.grid.origin

    @property
    def voxel_size(self) -> float:
        return self.grid.voxel_size

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.grid.dims

    def state(self, idx: Sequence[int]) -> int:
        return self.grid.state(idx)

    def in_bounds(self, idx: Sequence[int]) -> bool:
        return self.grid.in_bounds(idx)

    def is_free(self, idx: Sequence[int]) -> bool:
        return self.grid.in_bounds(idx) and self.grid.state(idx) == FREE

    def is_occupied(self, idx: Sequence[int]) -> bool:
        return self.grid.in_bounds(idx) and self.grid.state(idx) == OCCUPIED

    def world_to_voxel(self, p: Sequence[float]) -> Optional[VoxelIndex]:
        return self.grid.world_to_voxel(p)

    def voxel_center(self, idx: Sequence[int]) -> Vec3:
        return self.grid.voxel_center(idx)

    def known_fraction(self) -> float:
        n = self.dims[0] * self.dims[1] * self.dims[2]
        unknown = bytes(self.grid.states).count(bytes([UNKNOWN]))
        return 1.0 - unknown / n

    def occupied_cells(self) -> list[VoxelIndex]:
        return self.grid.occupied_indices()

    def sight_clear(self, a: Sequence[float], b: Sequence[float]) -> bool:
        """Line of sight through the belief; unknown counts as clear."""
        blocked, _ = voxel_raycast(
            self.origin, self.voxel_size, self.dims, self.grid.occ, a, b
        )
        return not blocked

    # -- mutation ----------------------------------------------------------
    def set_cell(self, idx: Sequence[int], state: int) -> bool:
        """Monotone merge: unknown cells learn, known cells keep their value."""
        if not self.grid.in_bounds(idx):
            return False
        if self.grid.state(idx) != UNKNOWN or state == UNKNOWN:
            return False
        self.grid.set_state(idx, state)
        self.version += 1
        if self._dirty_lo is None:
            self._dirty_lo = list(idx)
            self._dirty_hi = list(idx)
        else:
            for ax in range(3):
                self._dirty_lo[ax] = min(self._dirty_lo[ax], idx[ax])
                self._dirty_hi[ax] = max(self._dirty_hi[ax], idx[ax])
        return True

    def integrate_scan(self, scan: LidarScan, hit_cells: Sequence[Optional[VoxelIndex]]) -> int:
        """Carve one lidar revolution into the belief.

        hit_cells pairs with scan.endpoints, already in belief lattice
        indices (None for a max-range miss). Each ray frees the cells it
        crossed strictly before its blocking voxel, then marks that voxel
        occupied. When the scan carries its range, the walk re-derives the
        ray's full segment so it enumerates the same cells the sensor
        checked; tracing only up to the reported endpoint would end exactly
        on the obstacle's boundary, where rounding can spill the free-space
        trace into cells the ray never cleared.
        """
        changed = 0
        if scan.max_range_m > 0.0:
            from ..engine.lidar import scan_directions

            dirs = scan_directions(len(scan.endpoints), scan.scan_index)
        else:
            dirs = None
        o = scan.origin
        for i, (endpoint, hit_cell) in enumerate(zip(scan.endpoints, hit_cells)):
            if dirs is not None:
                d = dirs[i]
                far = Vec3(
                    o.x + d.x * scan.max_range_m,
                    o.y + d.y * scan.max_range_m,
                    o.z + d.z * scan.max_range_m,
                )
            else:
                far = endpoint
            for cell in traverse_segment(self.origin, self.voxel_size, self.dims, o, far):
                if cell == hit_cell:
                    break
                if self.set_cell(cell, FREE):
                    changed += 1
            if hit_cell is not None and self.set_cell(hit_cell, OCCUPIED):
                changed += 1
        return changed

    # -- map exchange -------------------------------------------------------
    def snapshot_dirty(self) -> Optional[tuple[tuple[int, int, int], tuple[int, int, int]]]:
        """Bounding box of cells changed since the last snapshot, then reset."""
        if self._dirty_lo is None:
            return None
        lo = tuple(self._dirty_lo)
        hi = tuple(self._dirty_hi)
        self._dirty_lo = None
        self._dirty_hi = None
        return lo, hi

    def chunk_payload(self, lo: Sequence[int], hi: Sequence[int]) -> dict:
        """Encode the inclusive [lo, hi] block for a map message."""
        arr = self.grid.as_array()
        block = arr[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1]
        return {
            "origin_voxel": [int(lo[0]), int(lo[1]), int(lo[2])],
            "dims": [int(d) for d in block.shape],
            "cells": pack_cells(block.tobytes()),
        }

    def full_payloads(self) -> list[dict]:
        """The whole map as chunk payloads (one per z-slab batch to stay small)."""
        nx, ny, nz = self.dims
        step = max(1, (1 << 18) // max(1, ny * nz))  # ~256k raw cells per slab
        out = []
        for i0 in range(0, nx, step):
            i1 = min(nx, i0 + step) - 1
            out.append(self.chunk_payload((i0, 0, 0), (i1, ny - 1, nz - 1)))
        return out

    def apply_chunk(self, payload: dict) -> int:
        """Merge a received map chunk; returns how many cells were learned."""
        lo = payload["origin_voxel"]
        bdims = payload["dims"]
        raw = unpack_cells(payload["cells"])
        if len(raw) != bdims[0] * bdims[1] * bdims[2]:
            raise ValueError("map chunk size mismatch")
        changed = 0
        pos = 0
        for i in range(bdims[0]):
            for j in range(bdims[1]):
                for k in range(bdims[2]):
                    s = raw[pos]
                    pos += 1
                    if s != UNKNOWN and self.set_cell((lo[0] + i, lo[1] + j, lo[2] + k), s):
                        changed += 1
        return changed


# ------------------------------------------------------------------
# navigation on a belief
# ------------------------------------------------------------------

def grid_shortest_path(
    belief: BeliefMap,
    start: VoxelIndex,
    goal: VoxelIndex,
    extra_blocked: frozenset = frozenset(),
    unknown_cost: float = 3.0,
    allow_unknown: bool = True,
) -> Optional[list[VoxelIndex]]:
    """A* over the belief lattice, 6-connected.

    Free cells cost 1 per step, unknown cells cost `unknown_cost` (planners
    prefer routes through mapped space), occupied cells are walls. Ties break
    on flat cell index so paths are reproducible.
    """
    nx, ny, nz = belief.dims
    if not belief.in_bounds(start) or not belief.in_bounds(goal):
        return None
    if belief.is_occupied(goal) or goal in extra_blocked:
        return None
    states = belief.grid.states
    plane = ny * nz

    def flat(c):
        return c[0] * plane + c[1] * nz + c[2]

    def h(c):
        return abs(c[0] - goal[0]) + abs(c[1] - goal[1]) + abs(c[2] - goal[2])

    start_f = flat(start)
    g_cost = {start_f: 0.0}
    parent: dict[int, int] = {}
    heap = [(float(h(start)), start_f, start)]
    closed = set()
    while heap:
        f, sf, cell = heapq.heappop(heap)
        if sf in closed:
            continue
        closed.add(sf)
        if cell == goal:
            order = [cell]
            cur = sf
            while cur in parent:
                cur = parent[cur]
                order.append((cur // plane, (cur % plane) // nz, cur % nz))
            order.reverse()
            return order
        base = g_cost[sf]
        for d in _FACE_DIRS:
            n = (cell[0] + d[0], cell[1] + d[1], cell[2] + d[2])
            if not (0 <= n[0] < nx and 0 <= n[1] < ny and 0 <= n[2] < nz):
                continue
            if n in extra_blocked:
                continue
            s = states[n[0] * plane + n[1] * nz + n[2]]
            if s == OCCUPIED:
                continue
            if s == UNKNOWN:
                if not allow_unknown:
                    continue
                step = unknown_cost
            else:
                step = 1.0
            nf = n[0] * plane + n[1] * nz + n[2]
            ng = base + step
            if ng < g_cost.get(nf, math.inf) - 1e-12:
                g_cost[nf] = ng
                parent[nf] = sf
                heapq.heappush(heap, (ng + h(n), nf, n))
    return None


def frontier_cells(belief: BeliefMap) -> list[VoxelIndex]:
    """Free cells bordering unknown space — where exploring pays off."""
    nx, ny, nz = belief.dims
    states = belief.grid.states
    plane = ny * nz
    out = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if states[i * plane + j * nz + k] != FREE:
                    continue
                for d in _FACE_DIRS:
                    a, b, c = i + d[0], j + d[1], k + d[2]
                    if 0 <= a < nx and 0 <= b < ny and 0 <= c < nz:
                        if states[a * plane + b * nz + c] == UNKNOWN:
                            out.append((i, j, k))
                            break
    return out


def believed_faces(belief: BeliefMap) -> list[tuple[VoxelIndex, tuple[int, int, int]]]:
    """Faces of believed-occupied voxels whose neighbor is known free."""
    out = []
    for cell in belief.occupied_cells():
        for d in _FACE_DIRS:
            n = (cell[0] + d[0], cell[1] + d[1], cell[2] + d[2])
            if belief.is_free(n):
                out.append((cell, d))
    out.sort()
    return out


# ------------------------------------------------------------------
# inspection waypoint synthesis
# ------------------------------------------------------------------

def resolution_standoff(focal_px: float, desired_mmpp: float, margin: float = 0.8) -> float:
    """Camera distance at which one pixel covers `margin * desired_mmpp` on a
    squarely-faced surface."""
    return margin * focal_px * desired_mmpp / 1000.0


_UNDERSIDE_TILT_RAD = math.radians(25.0)  # gimbal can only look up 30 degrees
_LATERAL_DIRS = ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0))


def _viewpoints_for_face(face_center: Vec3, d: tuple[int, int, int], standoff: float):
    """Candidate camera positions for one face, best first.

    Side and top faces take the square-on view. Downward faces cannot (the
    gimbal pitch ceiling is +30 degrees), so offer four tilted views from
    below, with the standoff shortened to keep the oblique footprint at the
    desired resolution.
    """
    if d != (0, 0, -1):
        yield Vec3(
            face_center.x + d[0] * standoff,
            face_center.y + d[1] * standoff,
            face_center.z + d[2] * standoff,
        )
        return
    sin_t = math.sin(_UNDERSIDE_TILT_RAD)
    cos_t = math.cos(_UNDERSIDE_TILT_RAD)
    dist = standoff * sin_t  # incidence cosine equals sin(tilt)
    for hx, hy in _LATERAL_DIRS:
        yield Vec3(
            face_center.x + hx * cos_t * dist,
            face_center.y + hy * cos_t * dist,
            face_center.z - sin_t * dist,
        )


def generate_inspection_waypoints(belief: BeliefMap, brief: PlannerBrief) -> list[Waypoint]:
    """One camera pose per believed-exposed face, deduplicated.

    Each waypoint carries (face point, outward normal) in `data` so coverage
    planners can deduplicate against what a pose actually sees.
    """
    standoff = resolution_standoff(brief.camera_focal_px, brief.camera_desired_mmpp)
    v = belief.voxel_size
    half = 0.5 * v
    out: list[Waypoint] = []
    kept_positions: list[Vec3] = []
    min_gap2 = (0.5 * v) ** 2

    for cell, d in believed_faces(belief):
        center = belief.voxel_center(cell)
        face_center = Vec3(center.x + d[0] * half, center.y + d[1] * half, center.z + d[2] * half)
        for pos in _viewpoints_for_face(face_center, d, standoff):
            cell_at = belief.world_to_voxel(pos)
            if cell_at is None or belief.state(cell_at) != FREE:
                continue
            dx = face_center.x - pos.x
            dy = face_center.y - pos.y
            dz = face_center.z - pos.z
            az = math.atan2(dy, dx)
            el = math.atan2(dz, math.hypot(dx, dy))
            dup = False
            for kp in kept_positions:
                if (kp.x - pos.x) ** 2 + (kp.y - pos.y) ** 2 + (kp.z - pos.z) ** 2 < min_gap2:
                    dup = True
                    break
            if dup:
                break
            out.append(
                Waypoint(
                    position=pos,
                    yaw=az,
                    pitch=el,
                    data=(face_center, Vec3(float(d[0]), float(d[1]), float(d[2]))),
                )
            )
            kept_positions.append(pos)
            break
    return out
