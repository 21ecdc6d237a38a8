"""Spinning lidar model: evenly spread rays over the sphere, with the whole
pattern twisting a golden angle between revolutions so repeated scans from a
hovering vehicle still sweep new directions.
"""

from __future__ import annotations

import math
from functools import lru_cache

from ..geometry import Vec3, raycast_first_hit, vadd, vscale
from ..world import OccupancyGrid
from .types import LidarScan

GOLDEN_ANGLE_RAD = math.pi * (3.0 - math.sqrt(5.0))


@lru_cache(maxsize=8)
def fibonacci_directions(n: int) -> tuple[Vec3, ...]:
    """n unit vectors spread near-uniformly over the full sphere."""
    out = []
    for i in range(n):
        z = 1.0 - (2.0 * i + 1.0) / n
        r = math.sqrt(max(0.0, 1.0 - z * z))
        phi = i * GOLDEN_ANGLE_RAD
        out.append(Vec3(r * math.cos(phi), r * math.sin(phi), z))
    return tuple(out)


def scan_directions(n: int, scan_index: int) -> list[Vec3]:
    """Base pattern rotated about +z by the golden angle per revolution."""
    theta = (scan_index * GOLDEN_ANGLE_RAD) % (2.0 * math.pi)
    c, s = math.cos(theta), math.sin(theta)
    return [Vec3(d.x * c - d.y * s, d.x * s + d.y * c, d.z) for d in fibonacci_directions(n)]


def scan(
    grid: OccupancyGrid,
    origin: Vec3,
    max_range_m: float,
    rays_per_scan: int,
    scan_index: int,
) -> LidarScan:
    """Cast one revolution against the ground-truth grid.

    Each ray reports either the entry point on the first occupied voxel it
    meets or the free endpoint at max range.
    """
    endpoints = []
    hits = []
    cells = []
    for d in scan_directions(rays_per_scan, scan_index):
        far = vadd(origin, vscale(d, max_range_m))
        cell, t = raycast_first_hit(
            grid.origin, grid.voxel_size, grid.dims, grid.occ, origin, far
        )
        cells.append(cell)
        if cell is None:
            endpoints.append(Vec3(*far))
            hits.append(False)
        else:
            endpoints.append(vadd(origin, vscale(d, t * max_range_m)))
            hits.append(True)
    return LidarScan(
        origin=Vec3(*origin),
        endpoints=tuple(endpoints),
        hits=tuple(hits),
        scan_index=scan_index,
        hit_cells=tuple(cells),
        max_range_m=max_range_m,
    )
