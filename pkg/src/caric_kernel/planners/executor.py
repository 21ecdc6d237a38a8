"""Leg-by-leg flight execution shared by the planner strategies.

A strategy queues legs (fly here / inspect this face / sit until reports
drain); the executor turns them into per-tick commands: belief-safe routing,
corner-aware waypoint switching, stop-aim-shoot sequencing, peer separation,
and stuck recovery. Keeping this machinery in one place means every strategy
inherits the same collision discipline.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..geometry import Vec3, traverse_segment, vdist, vnorm, yaw_wrap
from ..world import FREE, OCCUPIED
from ..engine.types import Command, PeerInfo, PlannerBrief
from .base import Observation
from .belief import BeliefMap, grid_shortest_path

# separation discipline: the lower-priority craft gives way
HOLD_RADIUS_M = 2.0  # freeze while a priority peer is this close ahead
CLEAR_RADIUS_M = 2.6  # resume once the peer has left this bubble
BLOCKED_REPLAN_TICKS = 25  # held this long -> route around the peer
NAV_RETRY_TICKS = 15  # pathfinding failed -> try again after this many ticks
NAV_SKIP_AFTER = 4  # consecutive failures before the leg is abandoned
_PIVOT_TOL_M = 0.35  # waypoint switch distance mid-path (inside corner cut)
_FINAL_TOL_M = 0.22
_AIM_TOL_RAD = 0.06
_SETTLE_SPEED_MPS = 0.15


def yields_to(my_name: str, my_role: str, peer: PeerInfo) -> bool:
    """Right-of-way: photographers give way to explorers; within a role the
    lexicographically smaller name yields."""
    if my_role != peer.role:
        return my_role == "photographer"
    return my_name < peer.name


@dataclass
class Leg:
    """One queued objective.

    kind: "transit" (get there), "view" (get there, stop, aim, shoot),
    "flush" (get there, wait for the report backlog to drain).
    direct=True promises the straight segment is safe by construction
    (strategies use it for corridors outside the boxes), skipping the router.
    """

    kind: str
    position: Vec3
    yaw: Optional[float] = None
    pitch: float = 0.0
    direct: bool = False
    dwell_ticks: int = 4
    data: object = None
    arrive_tol_m: Optional[float] = None  # widen the final arrival check


class WaypointExecutor:
    def __init__(self, brief: PlannerBrief, belief: Optional[BeliefMap] = None) -> None:
        self.brief = brief
        self.queue: deque[Leg] = deque()
        self.current: Optional[Leg] = None
        self._phase = "nav"
        self._pivots: list[Vec3] = []
        self._pivot_i = 0
        self._nav_fail_streak = 0
        self._nav_wait = 0
        self._held_ticks = 0
        self._dwell_left = 0
        self._flush_wait = 0
        self._bob_up = True
        self._bumper_trips = 0
        self.legs_completed = 0
        self.captured_this_tick = False

    # -- queue management ---------------------------------------------------
    def push(self, leg: Leg) -> None:
        self.queue.append(leg)

    def extend(self, legs) -> None:
        self.queue.extend(legs)

    def clear(self) -> None:
        self.queue.clear()
        self.current = None

    def idle(self) -> bool:
        return self.current is None and not self.queue

    def remaining(self) -> int:
        return len(self.queue) + (1 if self.current is not None else 0)

    # -- separation -----------------------------------------------------------
    def _priority_peer_near(self, obs: Observation) -> Optional[PeerInfo]:
        me = obs.state.position
        radius = CLEAR_RADIUS_M if self._held_ticks > 0 else HOLD_RADIUS_M
        worst = None
        for peer in obs.peers.values():
            if not yields_to(self.brief.agent, self.brief.role, peer):
                continue
            gap = vdist(me, peer.position)
            if gap > radius:
                continue
            # only give way when the peer is actually in the way: ahead of me,
            # or close enough that any move could clip it
            ahead = True
            if gap > 1.2 and vnorm(obs.state.velocity) > 0.1:
                v = obs.state.velocity
                rel = (peer.position.x - me.x, peer.position.y - me.y, peer.position.z - me.z)
                ahead = (rel[0] * v.x + rel[1] * v.y + rel[2] * v.z) > 0.0
            if ahead and (worst is None or gap < vdist(me, worst.position)):
                worst = peer
        return worst

    def _peer_blocked_cells(self, obs: Observation) -> frozenset:
        cells = set()
        belief = obs.belief
        for peer in obs.peers.values():
            base = belief.world_to_voxel(peer.position)
            if base is None:
                continue
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for dz in (-1, 0, 1):
                        cells.add((base[0] + dx, base[1] + dy, base[2] + dz))
        start = belief.world_to_voxel(obs.state.position)
        cells.discard(start)
        return frozenset(cells)

    # -- routing --------------------------------------------------------------
    def _free_sight(self, belief: BeliefMap, a: Vec3, b: Vec3) -> bool:
        """Straight corridor check: every voxel under the segment is known free."""
        for cell in traverse_segment(belief.origin, belief.voxel_size, belief.dims, a, b):
            if belief.state(cell) != FREE:
                return False
        return True

    def _plan_route(self, obs: Observation, leg: Leg, avoid_peers: bool) -> bool:
        belief = obs.belief
        pos = obs.state.position
        if leg.direct or self._free_sight(belief, pos, leg.position):
            self._pivots = [leg.position]
            self._pivot_i = 0
            return True
        start = belief.world_to_voxel(pos)
        goal = belief.world_to_voxel(leg.position)
        if start is None or goal is None:
            return False
        extra = self._peer_blocked_cells(obs) if avoid_peers else frozenset()
        path = grid_shortest_path(belief, start, goal, extra_blocked=extra)
        if path is None and avoid_peers:
            path = grid_shortest_path(belief, start, goal)
        if path is None:
            return False
        centers = [belief.voxel_center(c) for c in path]
        pivots = self._straighten(belief, pos, centers)
        pivots.append(leg.position)
        self._pivots = pivots
        self._pivot_i = 0
        return True

    def _straighten(self, belief: BeliefMap, pos: Vec3, centers: list[Vec3]) -> list[Vec3]:
        """Greedy shortcutting over the voxel path, restricted to known-free
        corridors so a straightened segment can never graze unmapped space."""
        pivots: list[Vec3] = []
        anchor = pos
        i = 0
        n = len(centers)
        while i < n:
            j = min(n - 1, i + 24)  # bounded lookahead keeps this linear-ish
            best = i
            while j > i:
                if self._free_sight(belief, anchor, centers[j]):
                    best = j
                    break
                j -= 1
            pivots.append(centers[best])
            anchor = centers[best]
            if best == n - 1:
                break
            i = best + 1
        return pivots

    # -- per-tick step --------------------------------------------------------
    def step(self, obs: Observation) -> Optional[Command]:
        """One command per tick; None once the queue is empty."""
        self.captured_this_tick = False
        if self.current is None:
            if not self.queue:
                return None
            self.current = self.queue.popleft()
            self._phase = "nav"
            self._pivots = []
            self._nav_fail_streak = 0
            self._nav_wait = 0
            self._dwell_left = 0
            self._flush_wait = 0
        leg = self.current
        pos = obs.state.position

        peer = self._priority_peer_near(obs)
        if peer is not None:
            self._held_ticks += 1
            if self._held_ticks >= BLOCKED_REPLAN_TICKS and self._phase == "nav":
                if self._plan_route(obs, leg, avoid_peers=True):
                    self._held_ticks = 0
            return Command.goto(pos)  # brake and give way
        self._held_ticks = 0

        # virtual bumper: momentum carries the vehicle off the sight-checked
        # line on turns, so brake whenever the stopping corridor ahead of the
        # current velocity leaves known-free space (direct legs are safe by
        # construction and fly over unmapped ground)
        if not leg.direct:
            speed = vnorm(obs.state.velocity)
            if speed > 0.8:
                v = obs.state.velocity
                horizon = 0.1 * speed + speed * speed / (
                    1.7 * self.brief.max_accel_mps2
                ) + 0.25
                ahead = Vec3(
                    pos.x + v.x / speed * horizon,
                    pos.y + v.y / speed * horizon,
                    pos.z + v.z / speed * horizon,
                )
                if not self._free_sight(obs.belief, pos, ahead):
                    self._bumper_trips += 1
                    if self._bumper_trips >= 60 and self._phase == "nav":
                        # stuck braking against the same obstacle: reroute
                        self._pivots = []
                        self._nav_fail_streak += 1
                        self._bumper_trips = 0
                    return Command.goto(pos)  # emergency brake
        self._bumper_trips = 0

        if self._phase == "nav":
            return self._step_nav(obs, leg)
        if self._phase == "settle":
            return self._step_settle(obs, leg)
        if self._phase == "aim":
            return self._step_aim(obs, leg)
        if self._phase == "dwell":
            return self._step_dwell(obs, leg)
        if self._phase == "flush":
            return self._step_flush(obs, leg)
        raise AssertionError(f"unknown phase {self._phase}")

    def _advance(self) -> None:
        self.current = None
        self.legs_completed += 1

    def _segment_hits_obstacle(self, obs: Observation, target: Vec3) -> bool:
        """Does the line from here to the active pivot cross a known-occupied
        voxel soon? Braking arcs and giveway drift carry the vehicle off the
        corridor the route was checked on, so the check must follow the
        vehicle, not the plan."""
        pos = obs.state.position
        gap = vdist(pos, target)
        if gap < 1e-9:
            return False
        reach = min(gap, 3.0)
        probe = Vec3(
            pos.x + (target.x - pos.x) / gap * reach,
            pos.y + (target.y - pos.y) / gap * reach,
            pos.z + (target.z - pos.z) / gap * reach,
        )
        belief = obs.belief
        for cell in traverse_segment(belief.origin, belief.voxel_size, belief.dims, pos, probe):
            if belief.state(cell) == OCCUPIED:
                return True
        return False

    def _step_nav(self, obs: Observation, leg: Leg) -> Command:
        pos = obs.state.position
        if self._pivots and not leg.direct:
            if self._segment_hits_obstacle(obs, self._pivots[self._pivot_i]):
                self._pivots = []  # line fouled since planning: reroute now
        if not self._pivots:
            if self._nav_wait > 0:
                self._nav_wait -= 1
                # anti-idle bob: stay visibly alive while the route is blocked
                bob = 0.4 if self._bob_up else -0.4
                self._bob_up = not self._bob_up
                return Command.goto(Vec3(pos.x, pos.y, pos.z + bob))
            if self._plan_route(obs, leg, avoid_peers=False):
                self._nav_fail_streak = 0
            else:
                self._nav_fail_streak += 1
                if self._nav_fail_streak >= NAV_SKIP_AFTER:
                    self._advance()  # abandon an unreachable objective
                    return Command.goto(pos)
                self._nav_wait = NAV_RETRY_TICKS
                return Command.goto(pos)

        target = self._pivots[self._pivot_i]
        last = self._pivot_i == len(self._pivots) - 1
        tol = (leg.arrive_tol_m or _FINAL_TOL_M) if last else _PIVOT_TOL_M
        if vdist(pos, target) <= tol:
            if not last:
                self._pivot_i += 1
            else:
                if leg.kind == "view":
                    self._phase = "settle"
                elif leg.kind == "flush":
                    self._phase = "flush"
                else:
                    self._advance()
                return self._hold_at(leg)
        # aim the body early on the final approach so the camera is ready
        want_yaw = leg.yaw if (last and leg.yaw is not None) else None
        return Command.goto(target, yaw=want_yaw)

    def _hold_at(self, leg: Leg) -> Command:
        return Command.goto(leg.position, yaw=leg.yaw, gimbal_pitch=leg.pitch, gimbal_yaw=0.0)

    def _step_settle(self, obs: Observation, leg: Leg) -> Command:
        if obs.state.speed() <= _SETTLE_SPEED_MPS:
            self._phase = "aim"
        return self._hold_at(leg)

    def _step_aim(self, obs: Observation, leg: Leg) -> Command:
        st = obs.state
        yaw_err = abs(yaw_wrap((leg.yaw or 0.0) - st.yaw))
        pitch_err = abs(leg.pitch - st.gimbal_pitch)
        gy_err = abs(yaw_wrap(0.0 - st.gimbal_yaw))
        if (
            yaw_err <= _AIM_TOL_RAD
            and pitch_err <= _AIM_TOL_RAD
            and gy_err <= _AIM_TOL_RAD
            and st.speed() <= _SETTLE_SPEED_MPS
        ):
            self._phase = "dwell"
            self._dwell_left = max(1, leg.dwell_ticks)
            self.captured_this_tick = True
            return Command(
                move_to=leg.position, yaw=leg.yaw, gimbal_pitch=leg.pitch,
                gimbal_yaw=0.0, capture=True,
            )
        return self._hold_at(leg)

    def _step_dwell(self, obs: Observation, leg: Leg) -> Command:
        self._dwell_left -= 1
        if self._dwell_left <= 0:
            self._advance()
        return self._hold_at(leg)

    def _step_flush(self, obs: Observation, leg: Leg) -> Command:
        self._flush_wait += 1
        if obs.pending_reports == 0 or self._flush_wait > 300:
            self._advance()
        return self._hold_at(leg)


def aim_at(from_pos: Vec3, target: Vec3) -> tuple[float, float]:
    """(yaw, pitch) that points the camera from a position at a target."""
    dx = target.x - from_pos.x
    dy = target.y - from_pos.y
    dz = target.z - from_pos.z
    yaw = math.atan2(dy, dx)
    pitch = math.atan2(dz, math.hypot(dx, dy))
    return yaw, pitch


def clamp_into(p: Vec3, lo: Vec3, hi: Vec3, margin: float = 0.15) -> Vec3:
    """Pull a point strictly inside the [lo, hi] box (setpoint hygiene: the
    engine rejects commands that leave the operational envelope)."""
    return Vec3(
        min(max(p.x, lo.x + margin), hi.x - margin),
        min(max(p.y, lo.y + margin), hi.y - margin),
        min(max(p.z, lo.z + margin), hi.z - margin),
    )


def flush_leg(brief: PlannerBrief, vol_lo: Vec3, vol_hi: Vec3) -> Leg:
    """A per-agent report-draining stop near the ground station, staggered
    sideways so teammates don't camp inside each other's hold radius."""
    names = [n for n, _r in brief.roster]
    idx = names.index(brief.agent) if brief.agent in names else 0
    dx = 3.0 * (idx - 0.5 * (len(names) - 1))
    g = brief.gcs_position
    spot = clamp_into(Vec3(g.x + dx, g.y, g.z + 2.0), vol_lo, vol_hi, 0.3)
    return Leg("flush", spot, yaw=-math.pi / 2.0, arrive_tol_m=1.2)


def station_keep(anchor: Vec3, tick: int, vol_lo: Vec3, vol_hi: Vec3) -> Command:
    """Slow vertical bob around an anchor while waiting out the clock — keeps
    a finished vehicle visibly alive without wandering anywhere."""
    lift = 0.35 if (tick // 25) % 2 == 0 else 0.0
    return Command.goto(clamp_into(Vec3(anchor.x, anchor.y, anchor.z + lift), vol_lo, vol_hi))
