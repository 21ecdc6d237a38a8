"""Sweep-then-inspect strategy.

Phase 1 — the explorer flies straight mapping lanes over the structure's top
and a low perimeter ring around it, streaming map chunks the whole way;
photographers climb to perch columns above their pads and listen.

Phase 2 — once its sweep ends, the explorer synthesizes camera views that
tile every believed surface plane, splits them across the fleet with the
route solver, and broadcasts the assignments; everyone then flies their
route, stopping to aim and shoot at each view (stop-and-scan), and finally
drains any undelivered capture reports near the ground station.

A continuous-capture variant skips the stop-and-aim discipline and fires the
shutter on a fixed cadence while moving — faster and blurrier by design.
A frontier variant replaces the fixed lanes with nearest-frontier chasing.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Optional

from ..comms import KIND_PLANNER_DATA
from ..geometry import Aabb, Vec3, vdist
from ..mtsp import Waypoint, solve_mtsp
from ..engine.types import Command, PlannerBrief
from .base import BasePlanner, Observation, register
from .belief import BeliefMap, believed_faces, resolution_standoff
from .executor import Leg, WaypointExecutor, aim_at, clamp_into, flush_leg, station_keep

VIEW_SPACING_M = 4.5  # lattice pitch when tiling a surface plane with views
LANE_SPACING_FRACTION = 0.8  # of lidar range, between mapping lanes
RING_TOP_CLEARANCE_M = 0.8  # how far above the structure the lanes fly
UNDERSIDE_TILT_RAD = math.radians(25.0)
TOPSIDE_VIEW_DIST_M = 1.8  # tilted stand-in when there is no headroom above
ROUTE_REBROADCAST_TICKS = 20
_EDGE_MARGIN_M = 0.15  # keep setpoints strictly inside the envelope
_SHRINKS = (1.0, 0.7, 0.45, 0.25)  # standoff fractions tried per view
_LATERALS = ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0))


def _union_box(boxes) -> Aabb:
    lo = Vec3(
        min(b.lo.x for b in boxes), min(b.lo.y for b in boxes), min(b.lo.z for b in boxes)
    )
    hi = Vec3(
        max(b.hi.x for b in boxes), max(b.hi.y for b in boxes), max(b.hi.z for b in boxes)
    )
    return Aabb(lo, hi)


def plan_coverage_views(belief: BeliefMap, brief: PlannerBrief) -> list[dict]:
    """Tile every believed surface plane with aimed camera views.

    Faces are bucketed by (normal, plane); each bucket's extent is cut into
    lattice cells about VIEW_SPACING across, and each non-empty cell gets one
    view at resolution standoff over its face centroid. Spacing and standoff
    together keep the worst-case obliquity inside the resolution budget, so
    a point anywhere on a tiled plane photographs at full quality.
    """
    standoff = resolution_standoff(brief.camera_focal_px, brief.camera_desired_mmpp)
    v = belief.voxel_size
    half = 0.5 * v
    vol_lo, vol_hi = brief.volume_lo, brief.volume_hi
    box = _union_box(brief.boxes) if brief.boxes else None

    buckets: dict[tuple, list[Vec3]] = {}
    for cell, d in believed_faces(belief):
        center = belief.voxel_center(cell)
        face = Vec3(center.x + d[0] * half, center.y + d[1] * half, center.z + d[2] * half)
        if d == (0, 0, -1) and box is not None and face.z <= box.lo.z + 0.1:
            continue  # ground-level undersides: unreachable and never sampled
        axis = 0 if d[0] else (1 if d[1] else 2)
        plane = round(face[axis] / v)
        buckets.setdefault((d, plane), []).append(face)

    views: list[dict] = []
    for (d, _plane), faces in sorted(buckets.items()):
        axis = 0 if d[0] else (1 if d[1] else 2)
        t0, t1 = [ax for ax in range(3) if ax != axis]
        u_lo = min(f[t0] for f in faces)
        u_hi = max(f[t0] for f in faces)
        w_lo = min(f[t1] for f in faces)
        w_hi = max(f[t1] for f in faces)
        nu = max(1, math.ceil((u_hi - u_lo) / VIEW_SPACING_M))
        nw = max(1, math.ceil((w_hi - w_lo) / VIEW_SPACING_M))
        du = (u_hi - u_lo) / nu or 1.0
        dw = (w_hi - w_lo) / nw or 1.0
        cells: dict[tuple[int, int], list[Vec3]] = {}
        for f in faces:
            iu = min(nu - 1, int((f[t0] - u_lo) / du))
            iw = min(nw - 1, int((f[t1] - w_lo) / dw))
            cells.setdefault((iu, iw), []).append(f)
        for _key, group in sorted(cells.items()):
            n = len(group)
            cen = Vec3(
                sum(f.x for f in group) / n,
                sum(f.y for f in group) / n,
                sum(f.z for f in group) / n,
            )
            pos = _place_view(belief, cen, d, standoff, vol_lo, vol_hi)
            if pos is None:
                continue
            yaw, pitch = aim_at(pos, cen)
            views.append(
                {
                    "p": [pos.x, pos.y, pos.z],
                    "yaw": yaw,
                    "pitch": pitch,
                    "face": [cen.x, cen.y, cen.z],
                }
            )
    return views


def _place_view(
    belief: BeliefMap, face: Vec3, d, standoff: float, vol_lo: Vec3, vol_hi: Vec3
) -> Optional[Vec3]:
    """Pick a believed-free, in-envelope camera position for one face group."""

    def usable(p: Vec3) -> Optional[Vec3]:
        q = clamp_into(p, vol_lo, vol_hi)
        if vdist(p, q) > 0.3:  # clamping moved it off its geometry; reject
            return None
        cell = belief.world_to_voxel(q)
        if cell is not None and belief.state(cell) == 1:  # FREE
            return q
        return None

    if d == (0, 0, -1):
        # underside: the gimbal cannot look that far up, so approach from
        # below at a tilt that keeps the oblique footprint at full quality
        dist = standoff * math.sin(UNDERSIDE_TILT_RAD)
        lat = dist * math.cos(UNDERSIDE_TILT_RAD)
        drop = dist * math.sin(UNDERSIDE_TILT_RAD)
        for hx, hy in _LATERALS:
            got = usable(Vec3(face.x + hx * lat, face.y + hy * lat, face.z - drop))
            if got is not None:
                return got
        return None

    if d == (0, 0, 1):
        straight = Vec3(face.x, face.y, face.z + standoff)
        if straight.z <= vol_hi.z - _EDGE_MARGIN_M:
            got = usable(straight)
            if got is not None:
                return got
        # no headroom: shoot from a short tilted offset under the ceiling
        height = max(0.4, vol_hi.z - _EDGE_MARGIN_M - face.z)
        height = min(height, 0.8 * TOPSIDE_VIEW_DIST_M)
        lat = math.sqrt(max(0.05, TOPSIDE_VIEW_DIST_M**2 - height**2))
        for hx, hy in _LATERALS:
            got = usable(Vec3(face.x + hx * lat, face.y + hy * lat, face.z + height))
            if got is not None:
                return got
        return None

    for frac in _SHRINKS:
        got = usable(
            Vec3(
                face.x + d[0] * standoff * frac,
                face.y + d[1] * standoff * frac,
                face.z + d[2] * standoff * frac,
            )
        )
        if got is not None:
            return got
    return None


@register("grid-sweep")
class GridSweepPlanner(BasePlanner):
    """Stop-and-scan sweep-then-inspect (see module docstring)."""

    continuous_capture = False
    capture_period_ticks = 3
    frontier_mode = False

    def __init__(self, brief: PlannerBrief) -> None:
        super().__init__(brief)
        self.executor = WaypointExecutor(brief)
        self.box = _union_box(brief.boxes)
        self.vol_lo, self.vol_hi = brief.volume_lo, brief.volume_hi
        self.lane_z = min(self.box.hi.z + RING_TOP_CLEARANCE_M, self.vol_hi.z - 0.2)
        self.routes_payload: Optional[dict] = None
        self.my_views: list[dict] = []
        self._started = False
        self._routes_built = False
        self._last_broadcast = -(10**9)
        self._frontier_rounds = 0
        self._hold_anchor: Optional[Vec3] = None

    # -- phase 1 geometry ---------------------------------------------------
    def _perch(self, name: str) -> Vec3:
        s = self.brief.start_positions[name]
        return Vec3(s.x, s.y, self.lane_z)

    def _exploration_legs(self) -> list[Leg]:
        start = self.brief.start_positions[self.brief.agent]
        box, lo, hi = self.box, self.vol_lo, self.vol_hi
        legs = [Leg("transit", Vec3(start.x, start.y, self.lane_z), direct=True)]

        long_axis = 0 if (box.hi.x - box.lo.x) >= (box.hi.y - box.lo.y) else 1
        short_axis = 1 - long_axis
        spacing = max(4.0, LANE_SPACING_FRACTION * self.brief.lidar_range_m)
        s_lo = max(box.lo[short_axis] - 1.0, lo[short_axis] + _EDGE_MARGIN_M)
        s_hi = min(box.hi[short_axis] + 1.0, hi[short_axis] - _EDGE_MARGIN_M)
        n_lanes = max(2, math.ceil((s_hi - s_lo) / spacing))
        l_lo = max(box.lo[long_axis] - 1.0, lo[long_axis] + _EDGE_MARGIN_M)
        l_hi = min(box.hi[long_axis] + 1.0, hi[long_axis] - _EDGE_MARGIN_M)

        def lane_point(along: float, across: float) -> Vec3:
            c = [0.0, 0.0, self.lane_z]
            c[long_axis] = along
            c[short_axis] = across
            return Vec3(*c)

        forward = True
        for i in range(n_lanes):
            across = s_lo + (i + 0.5) * (s_hi - s_lo) / n_lanes
            a, b = (l_lo, l_hi) if forward else (l_hi, l_lo)
            legs.append(Leg("transit", lane_point(a, across), direct=True))
            legs.append(Leg("transit", lane_point(b, across), direct=True))
            forward = not forward

        # low perimeter ring to map the outer walls bottom-to-top
        off = 0.9
        ring_z = min(max(0.45 * (box.lo.z + box.hi.z), box.lo.z + 1.5), box.hi.z - 1.0)
        ring_z = max(ring_z, lo.z + 0.5)
        corners = [
            Vec3(box.lo.x - off, box.lo.y - off, ring_z),
            Vec3(box.hi.x + off, box.lo.y - off, ring_z),
            Vec3(box.hi.x + off, box.hi.y + off, ring_z),
            Vec3(box.lo.x - off, box.hi.y + off, ring_z),
        ]
        end = legs[-1].position
        first = min(range(4), key=lambda i: vdist(end, corners[i]))
        above = Vec3(corners[first].x, corners[first].y, self.lane_z)
        legs.append(Leg("transit", above, direct=True))
        loop = [corners[(first + k) % 4] for k in range(4)] + [corners[first]]
        legs.extend(Leg("transit", c, direct=True) for c in loop)
        legs.append(Leg("transit", above, direct=True))
        return legs

    # -- phase 2 ------------------------------------------------------------
    def _route_distance(self, belief: BeliefMap, n_views: int):
        if n_views > 220:
            return None  # plain euclidean in the solver

        def dist(a: Vec3, b: Vec3) -> float:
            d = vdist(a, b)
            if d > 1e-9 and not belief.sight_clear(a, b):
                d += 12.0  # wall between: someone has to fly around it
            return d

        return dist

    def _build_routes(self, obs: Observation) -> None:
        views = plan_coverage_views(obs.belief, self.brief)
        inspectors = [name for name, _role in self.brief.roster]
        starts = []
        for name in inspectors:
            if name == self.brief.agent:
                starts.append(obs.state.position)
            else:
                starts.append(self._perch(name))
        wps = [
            Waypoint(position=Vec3(*v["p"]), yaw=v["yaw"], pitch=v["pitch"], data=i)
            for i, v in enumerate(views)
        ]
        plan = solve_mtsp(
            starts,
            wps,
            distance=self._route_distance(obs.belief, len(views)),
            objective="makespan",
            improve_rounds=60 if len(views) <= 150 else 25,
        )
        assign = {
            name: [views[j] for j in plan.routes[i]] for i, name in enumerate(inspectors)
        }
        self.routes_payload = {"type": "routes", "assign": assign}
        self.my_views = assign.get(self.brief.agent, [])
        self._queue_views(self.my_views)
        self._routes_built = True

    def _queue_views(self, views: list[dict]) -> None:
        kind = "transit" if self.continuous_capture else "view"
        for v in views:
            self.executor.push(
                Leg(
                    kind,
                    Vec3(*v["p"]),
                    yaw=v["yaw"],
                    pitch=v["pitch"],
                    dwell_ticks=4,
                    data=Vec3(*v["face"]),
                )
            )
        self.executor.push(self._flush_leg())

    def _flush_leg(self) -> Leg:
        # each agent drains its backlog at its own spot near the ground
        # station; staggered so nobody camps inside a teammate's hold radius
        names = [n for n, _r in self.brief.roster]
        idx = names.index(self.brief.agent) if self.brief.agent in names else 0
        dx = 3.0 * (idx - 0.5 * (len(names) - 1))
        g = self.brief.gcs_position
        spot = clamp_into(Vec3(g.x + dx, g.y, g.z + 2.0), self.vol_lo, self.vol_hi, 0.3)
        return Leg("flush", spot, yaw=-math.pi / 2.0, arrive_tol_m=1.2)

    def _station_keep(self, obs: Observation) -> Command:
        """Slow vertical bob while waiting out the clock: keeps the vehicle
        visibly alive without wandering anywhere."""
        if self._hold_anchor is None:
            self._hold_anchor = obs.state.position
        a = self._hold_anchor
        lift = 0.35 if (obs.tick // 25) % 2 == 0 else 0.0
        return Command.goto(
            clamp_into(Vec3(a.x, a.y, a.z + lift), self.vol_lo, self.vol_hi)
        )

    # -- frontier variant ---------------------------------------------------
    def _queue_frontier_target(self, obs: Observation) -> bool:
        from .belief import frontier_cells

        cand = frontier_cells(obs.belief)
        if not cand:
            return False
        me = obs.belief.world_to_voxel(obs.state.position)
        if me is None:
            return False
        cand.sort(key=lambda c: (abs(c[0] - me[0]) + abs(c[1] - me[1]) + abs(c[2] - me[2]), c))
        target = obs.belief.voxel_center(cand[0])
        self.executor.push(Leg("transit", target))
        self._frontier_rounds += 1
        return self._frontier_rounds < 400

    # -- tick ----------------------------------------------------------------
    def tick(self, obs: Observation) -> Command:
        if not self._started:
            self._started = True
            if self.brief.role == "explorer":
                if self.frontier_mode:
                    self.executor.push(
                        Leg("transit", self._perch(self.brief.agent), direct=True)
                    )
                else:
                    self.executor.extend(self._exploration_legs())
            else:
                self.executor.push(Leg("transit", self._perch(self.brief.agent), direct=True))

        if self.brief.role == "photographer" and not self._routes_built:
            for msg in obs.inbox:
                if msg.kind == KIND_PLANNER_DATA and msg.payload.get("type") == "routes":
                    self.my_views = msg.payload["assign"].get(self.brief.agent, [])
                    self._queue_views(self.my_views)
                    self._routes_built = True
                    break

        cmd = self.executor.step(obs)

        if cmd is None:
            if self.brief.role == "explorer":
                if self.frontier_mode and not self._routes_built:
                    if self._queue_frontier_target(obs):
                        cmd = self.executor.step(obs)
                if not self._routes_built and cmd is None:
                    self._build_routes(obs)
                    self._last_broadcast = obs.tick
                    self.broadcast(KIND_PLANNER_DATA, self.routes_payload)
                    cmd = self.executor.step(obs)
            if cmd is None:
                if self._routes_built and obs.pending_reports == 0:
                    self.done = True
                cmd = self._station_keep(obs)

        if (
            self.brief.role == "explorer"
            and self.routes_payload is not None
            and obs.tick - self._last_broadcast >= ROUTE_REBROADCAST_TICKS
            and not self.done
        ):
            self.broadcast(KIND_PLANNER_DATA, self.routes_payload)
            self._last_broadcast = obs.tick

        if self.continuous_capture and self._routes_built:
            leg = self.executor.current
            if leg is not None and isinstance(leg.data, Vec3):
                yaw, pitch = aim_at(obs.state.position, leg.data)
                pitch = min(math.pi / 6.0, max(-2.0 * math.pi / 3.0, pitch))
                cmd = replace(cmd, yaw=yaw, gimbal_pitch=pitch, gimbal_yaw=0.0)
            if obs.tick % self.capture_period_ticks == 0 and obs.state.airborne:
                cmd = replace(cmd, capture=True)

        return cmd


@register("grid-sweep-continuous")
class GridSweepContinuousPlanner(GridSweepPlanner):
    """Same routes, but captures on a cadence while moving instead of
    stopping to aim — trades per-shot quality for shot count."""

    continuous_capture = True


@register("grid-sweep-frontier")
class GridSweepFrontierPlanner(GridSweepPlanner):
    """Exploration by chasing the nearest frontier voxel instead of flying
    fixed lanes; inspection is unchanged."""

    frontier_mode = True
