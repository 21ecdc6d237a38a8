"""Mission runner: the deterministic tick loop that flies a scenario.

Tick pipeline, in order:

 1. deliver last tick's routed traffic — the engine folds map chunks into the
    recipient's belief, updates peer tables from odometry, and books
    capture-report receipts at the ground station; planners also get the raw
    inbox
 2. query each live planner with a fresh observation
 3. validate commands and latch the valid parts; the first accepted movement
    is takeoff
 4. integrate flight dynamics for airborne craft
 5. detect collisions (structure voxels, pairwise proximity) and freeze the
    wrecks where they stopped
 6. spin lidars and fold the returns into each explorer's own belief
 7. resolve captures at the post-step state against ground truth
 8. queue automatic feeds — odometry every tick, explorer map-sync windows
    every MAP_SYNC_INTERVAL_TICKS, capture-report retries toward the ground
    station — plus planner traffic, and route everything by line of sight
    for delivery next tick
 9. advance the mission clock (only while somebody is flying), track
    progress, append the tick log

Nothing in the loop reads wall-clock time, so identical inputs give
identical missions, byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

from ..comms import (
    BROADCAST,
    GCS_NAME,
    KIND_CAPTURE_REPORT,
    KIND_MAP_CHUNK,
    KIND_ODOMETRY,
    Message,
    route,
)
from ..geometry import Aabb, Vec3, camera_matrix, rotation_rate_between, vdist
from ..scoring import CaptureRecord, CaptureView, ScoreBoard, score_capture, tally
from ..world import OCCUPIED, Scenario, aligned_grid_params, operational_volume, validate_scenario
from ..planners.belief import BeliefMap
from . import lidar as lidar_model
from .dynamics import apply_command, clamp_into_volume, step_uav
from .types import (
    GROUNDED_TICK_LIMIT,
    MAP_SYNC_INTERVAL_TICKS,
    TICK_S,
    Command,
    ControlState,
    PeerInfo,
    PlannerBrief,
    SimEvent,
    UavState,
)

_PROGRESS_MOVE_EPS_M = 1e-3
_REPORT_SENDS_PER_TICK = 4


@dataclass
class MissionResult:
    scenario_name: str
    planner_name: str
    rng_seed: int
    ticks: int
    clock_s: float
    end_reason: str
    states: dict[str, UavState]
    records: list[CaptureRecord]
    board: ScoreBoard
    events: list[SimEvent]
    stats: dict
    max_idle_window_ticks: int
    interest_point_count: int
    log_rows: list[dict] = field(default_factory=list)

    def report(self) -> dict:
        """Canonical run summary; stable across identical reruns."""
        return {
            "format": "caric-kernel-score@1",
            "scenario": self.scenario_name,
            "rng_seed": self.rng_seed,
            "planner": self.planner_name,
            "ticks": self.ticks,
            "sim_clock_s": round(self.clock_s, 9),
            "end_reason": self.end_reason,
            "interest_point_count": self.interest_point_count,
            "total_quality": round(self.board.total, 9),
            "detected_points": self.board.detected,
            "mean_quality": round(self.board.mean_quality(), 9),
            "per_point_quality": {
                str(pid): round(q, 9) for pid, q in sorted(self.board.best.items())
            },
            "captures": len(self.records),
            "reports_delivered": self.stats.get("reports-delivered", 0),
            "collisions": self.stats.get("collisions", 0),
            "commands_rejected": self.stats.get("commands-rejected", 0),
            "message_drops": dict(sorted(self.stats.get("message-drops", {}).items())),
            "max_idle_window_ticks": self.max_idle_window_ticks,
            "uavs": {
                name: {
                    "final_position": [round(c, 9) for c in st.position],
                    "collided": st.collided,
                    "collided_tick": st.collided_tick,
                    "captures": sum(1 for r in self.records if r.agent == name),
                }
                for name, st in sorted(self.states.items())
            },
        }

    def report_hash(self) -> str:
        body = json.dumps(self.report(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(body.encode()).hexdigest()


class MissionRunner:
    """Owns all mutable world state for one mission and steps it to the end."""

    def __init__(
        self,
        scenario: Scenario,
        planner: Union[str, Callable],
        record_log: bool = True,
        grounded_tick_limit: int = GROUNDED_TICK_LIMIT,
    ) -> None:
        validate_scenario(scenario)
        self.scenario = scenario
        self.record_log = record_log
        self.grounded_tick_limit = grounded_tick_limit

        if isinstance(planner, str):
            from ..planners import make_planner  # late import: planners import engine.types

            self.planner_name = planner
            factory = lambda brief: make_planner(planner, brief)
        else:
            factory = planner
            self.planner_name = getattr(planner, "strategy_name", getattr(planner, "__name__", "custom"))

        self.volume: Aabb = operational_volume(
            scenario.boxes, [u.start for u in scenario.fleet], scenario.voxel_size
        )
        self.belief_origin, self.belief_dims = aligned_grid_params(
            self.volume, scenario.grid.origin, scenario.voxel_size
        )
        g = scenario.grid
        self._truth_offset = (
            int(round((g.origin.x - self.belief_origin.x) / g.voxel_size)),
            int(round((g.origin.y - self.belief_origin.y) / g.voxel_size)),
            int(round((g.origin.z - self.belief_origin.z) / g.voxel_size)),
        )

        self.states: dict[str, UavState] = {}
        self.controls: dict[str, ControlState] = {}
        self.specs = {u.name: u for u in scenario.fleet}
        self.order = [u.name for u in scenario.fleet]
        self.beliefs: dict[str, BeliefMap] = {}
        self.planners: dict[str, object] = {}
        roster = tuple((u.name, u.role) for u in scenario.fleet)
        starts = {u.name: u.start for u in scenario.fleet}
        for u in scenario.fleet:
            self.states[u.name] = UavState(name=u.name, role=u.role, position=u.start)
            self.controls[u.name] = ControlState(target=u.start)
            self.beliefs[u.name] = BeliefMap(self.belief_origin, scenario.voxel_size, self.belief_dims)
            brief = PlannerBrief(
                agent=u.name,
                role=u.role,
                boxes=tuple(scenario.boxes),
                volume_lo=self.volume.lo,
                volume_hi=self.volume.hi,
                grid_origin=self.belief_origin,
                grid_dims=self.belief_dims,
                voxel_size=scenario.voxel_size,
                roster=roster,
                start_positions=dict(starts),
                gcs_position=scenario.gcs_position,
                mission_budget_s=scenario.mission_budget_s,
                camera_focal_px=u.camera.focal_length_px,
                camera_image_w=u.camera.image_width_px,
                camera_image_h=u.camera.image_height_px,
                camera_desired_mmpp=u.camera.desired_mmpp,
                max_speed_mps=u.max_speed_mps,
                max_accel_mps2=u.max_accel_mps2,
                lidar_range_m=u.lidar.max_range_m if u.lidar else 0.0,
            )
            self.planners[u.name] = factory(brief)

        self.tick = 0
        self.clock_s = 0.0
        self.grounded_ticks = 0
        self.events: list[SimEvent] = []
        self.records: list[CaptureRecord] = []
        self.report_queues: dict[str, deque[int]] = {n: deque() for n in self.order}
        self.pending_inboxes: dict[str, list[Message]] = {n: [] for n in self.order}
        self.pending_inboxes[GCS_NAME] = []
        self.peer_tables: dict[str, dict[str, PeerInfo]] = {n: {} for n in self.order}
        self.last_scans: dict[str, object] = {n: None for n in self.order}
        self.last_capture_points: dict[str, Optional[int]] = {n: None for n in self.order}
        self.scan_counters: dict[str, int] = {n: 0 for n in self.order}
        self.dirty_windows: dict[str, deque] = {n: deque(maxlen=3) for n in self.order}
        self.stats = {
            "collisions": 0,
            "commands-rejected": 0,
            "reports-delivered": 0,
            "message-drops": {},
        }
        self.log_rows: list[dict] = []
        self.last_progress_tick = 0
        self.max_idle_window = 0
        budget_ticks = int(scenario.mission_budget_s / TICK_S + 0.5)
        self.max_ticks = grounded_tick_limit + budget_ticks + 32
        self.end_reason: Optional[str] = None

    # ------------------------------------------------------------------
    def _event(self, agent: str, kind: str, detail: str = "") -> None:
        self.events.append(SimEvent(tick=self.tick, agent=agent, kind=kind, detail=detail))

    def _alive(self, name: str) -> bool:
        return not self.states[name].collided

    def _deliver_pending(self) -> tuple[dict[str, list[Message]], list[int]]:
        """Stage 1: apply engine-side effects of last tick's traffic."""
        inboxes = self.pending_inboxes
        self.pending_inboxes = {n: [] for n in self.order}
        self.pending_inboxes[GCS_NAME] = []
        delivered_records: list[int] = []

        for msg in inboxes.get(GCS_NAME, ()):
            if msg.kind != KIND_CAPTURE_REPORT:
                continue
            rid = int(msg.payload["record"])
            if 0 <= rid < len(self.records) and not self.records[rid].delivered:
                self.records[rid] = replace(self.records[rid], delivered=True)
                self.stats["reports-delivered"] += 1
                delivered_records.append(rid)
                q = self.report_queues.get(msg.sender)
                if q and rid in q:
                    q.remove(rid)
                self._event(msg.sender, "report-delivered", f"record={rid}")

        for name in self.order:
            if not self._alive(name):
                continue
            for msg in inboxes.get(name, ()):
                if msg.kind == KIND_MAP_CHUNK:
                    self.beliefs[name].apply_chunk(msg.payload)
                elif msg.kind == KIND_ODOMETRY:
                    p = msg.payload
                    self.peer_tables[name][msg.sender] = PeerInfo(
                        name=msg.sender,
                        role=p["role"],
                        position=Vec3(*p["position"]),
                        velocity=Vec3(*p["velocity"]),
                        tick=msg.tick,
                    )
        return inboxes, delivered_records

    def _observation(self, name: str, inbox: list[Message]):
        from ..planners.base import Observation  # late import, avoids a cycle

        return Observation(
            tick=self.tick,
            clock_s=self.clock_s,
            state=self.states[name].copy(),
            inbox=inbox,
            scan=self.last_scans[name],
            belief=self.beliefs[name],
            peers=dict(self.peer_tables[name]),
            pending_reports=len(self.report_queues[name]),
            last_capture_points=self.last_capture_points[name],
        )

    def _check_collisions(self) -> None:
        """Stage 5: structure hits and pairwise proximity, post-step."""
        g = self.scenario.grid
        newly = []
        for name in self.order:
            st = self.states[name]
            if st.collided or not st.airborne:
                continue
            cell = g.world_to_voxel(st.position)
            if cell is not None and g.state(cell) == OCCUPIED:
                newly.append((name, f"structure voxel {cell}"))
        flying = [n for n in self.order if self.states[n].airborne and not self.states[n].collided]
        for a_i in range(len(flying)):
            for b_i in range(a_i + 1, len(flying)):
                a, b = flying[a_i], flying[b_i]
                ra = self.specs[a].collision_radius_m
                rb = self.specs[b].collision_radius_m
                if vdist(self.states[a].position, self.states[b].position) <= ra + rb:
                    newly.append((a, f"midair with {b}"))
                    newly.append((b, f"midair with {a}"))
        for name, detail in newly:
            st = self.states[name]
            if st.collided:
                continue
            st.collided = True
            st.collided_tick = self.tick
            st.velocity = Vec3(0.0, 0.0, 0.0)
            self.stats["collisions"] += 1
            self._event(name, "collision", detail)

    def _truth_to_belief(self, cell) -> tuple[int, int, int]:
        off = self._truth_offset
        return (cell[0] + off[0], cell[1] + off[1], cell[2] + off[2])

    def _run_lidar(self) -> None:
        g = self.scenario.grid
        for name in self.order:
            spec = self.specs[name]
            st = self.states[name]
            if spec.lidar is None or st.collided or not st.airborne:
                continue
            idx = self.scan_counters[name]
            self.scan_counters[name] += 1
            scan = lidar_model.scan(
                g, st.position, spec.lidar.max_range_m, spec.lidar.rays_per_scan, idx
            )
            hit_cells = [
                self._truth_to_belief(cell) if cell is not None else None
                for cell in scan.hit_cells
            ]
            self.beliefs[name].integrate_scan(scan, hit_cells)
            self.last_scans[name] = scan

    def _capture(self, name: str, pre_cam_mat) -> Optional[int]:
        st = self.states[name]
        spec = self.specs[name]
        post_mat = camera_matrix(st.yaw, st.gimbal_pitch, st.gimbal_yaw)
        omega = rotation_rate_between(pre_cam_mat, post_mat, TICK_S)
        view = CaptureView(
            pose=st.camera_pose(),
            velocity_mps=st.velocity,
            angular_rate=omega,
            intrinsics=spec.camera,
        )
        qualities = score_capture(view, self.scenario.grid, self.scenario.interest_points)
        rid = len(self.records)
        self.records.append(
            CaptureRecord(agent=name, tick=self.tick, qualities=tuple(qualities))
        )
        if qualities:
            self.report_queues[name].append(rid)
        self._event(name, "capture", f"record={rid} points={len(qualities)}")
        self.last_capture_points[name] = len(qualities)
        return rid

    def _auto_feeds(self) -> list[Message]:
        out: list[Message] = []
        for name in self.order:
            st = self.states[name]
            if st.collided:
                continue
            out.append(
                Message(
                    sender=name,
                    recipient=BROADCAST,
                    kind=KIND_ODOMETRY,
                    payload={
                        "role": st.role,
                        "position": [st.position.x, st.position.y, st.position.z],
                        "velocity": [st.velocity.x, st.velocity.y, st.velocity.z],
                        "airborne": st.airborne,
                    },
                    tick=self.tick,
                )
            )
        if (self.tick + 1) % MAP_SYNC_INTERVAL_TICKS == 0:
            for name in self.order:
                st = self.states[name]
                if st.collided or not st.airborne or self.specs[name].lidar is None:
                    continue
                window = self.beliefs[name].snapshot_dirty()
                windows = self.dirty_windows[name]
                windows.append(window)
                merged = None
                for w in windows:
                    if w is None:
                        continue
                    if merged is None:
                        merged = [list(w[0]), list(w[1])]
                    else:
                        for ax in range(3):
                            merged[0][ax] = min(merged[0][ax], w[0][ax])
                            merged[1][ax] = max(merged[1][ax], w[1][ax])
                if merged is None:
                    continue
                payload = self.beliefs[name].chunk_payload(merged[0], merged[1])
                out.append(
                    Message(
                        sender=name, recipient=BROADCAST, kind=KIND_MAP_CHUNK,
                        payload=payload, tick=self.tick,
                    )
                )
        for name in self.order:
            st = self.states[name]
            if st.collided:
                continue
            for rid in list(self.report_queues[name])[:_REPORT_SENDS_PER_TICK]:
                rec = self.records[rid]
                out.append(
                    Message(
                        sender=name,
                        recipient=GCS_NAME,
                        kind=KIND_CAPTURE_REPORT,
                        payload={
                            "record": rid,
                            "tick": rec.tick,
                            "qualities": [[pid, round(q, 9)] for pid, q in rec.qualities],
                        },
                        tick=self.tick,
                    )
                )
        return out

    # ------------------------------------------------------------------
    def step_tick(self) -> None:
        inboxes, delivered_records = self._deliver_pending()

        # stage 2-3: planners think, engine latches what is valid
        traffic: list[Message] = []
        capture_requests: list[str] = []
        pre_mats = {}
        belief_versions = sum(b.version for b in self.beliefs.values())
        for name in self.order:
            if not self._alive(name):
                continue
            st = self.states[name]
            planner = self.planners[name]
            obs = self._observation(name, inboxes.get(name, []))
            cmd = planner.tick(obs)
            if cmd is None:
                cmd = Command()
            for msg in planner.outbox:
                traffic.append(replace(msg, sender=name, tick=self.tick))
            planner.outbox.clear()

            reasons, moved = apply_command(self.controls[name], cmd, self.volume)
            for reason in reasons:
                self.stats["commands-rejected"] += 1
                self._event(name, "command-rejected", reason)
            if moved and not st.airborne:
                st.airborne = True
                self._event(name, "takeoff")
            if cmd.capture and st.airborne:
                capture_requests.append(name)
            pre_mats[name] = camera_matrix(st.yaw, st.gimbal_pitch, st.gimbal_yaw)

        # stage 4: physics
        moved_dist = 0.0
        for name in self.order:
            st = self.states[name]
            if st.collided or not st.airborne:
                continue
            before = st.position
            step_uav(st, self.controls[name], self.specs[name], TICK_S)
            if clamp_into_volume(st, self.volume):
                self._event(name, "volume-clamped")
            moved_dist = max(moved_dist, vdist(before, st.position))

        # stage 5-7
        self._check_collisions()
        self._run_lidar()
        captured = []
        for name in capture_requests:
            if self._alive(name):
                captured.append(self._capture(name, pre_mats[name]))

        # stage 8: feeds + routing for next tick
        traffic.extend(self._auto_feeds())
        positions = {
            name: self.states[name].position
            for name in self.order
            if not self.states[name].collided
        }
        positions[GCS_NAME] = self.scenario.gcs_position
        routed, dropped = route(traffic, positions, self.scenario.grid)
        for _, reason in dropped:
            drops = self.stats["message-drops"]
            drops[reason] = drops.get(reason, 0) + 1
        for name, msgs in routed.items():
            self.pending_inboxes[name] = msgs

        # stage 9: clock, progress, logging
        flying = any(st.airborne and not st.collided for st in self.states.values())
        if flying:
            self.clock_s += TICK_S
        else:
            self.grounded_ticks += 1

        belief_changed = sum(b.version for b in self.beliefs.values()) != belief_versions
        if belief_changed or delivered_records or captured or moved_dist > _PROGRESS_MOVE_EPS_M:
            self.last_progress_tick = self.tick
        self.max_idle_window = max(self.max_idle_window, self.tick - self.last_progress_tick)

        if self.record_log:
            row = {
                "tick": self.tick,
                "clock_s": round(self.clock_s, 9),
                "uavs": {
                    name: {
                        "position": [round(c, 9) for c in self.states[name].position],
                        "velocity": [round(c, 9) for c in self.states[name].velocity],
                        "yaw": round(self.states[name].yaw, 9),
                        "airborne": self.states[name].airborne,
                        "collided": self.states[name].collided,
                    }
                    for name in self.order
                },
            }
            if captured:
                row["captures"] = [
                    {
                        "record": rid,
                        "agent": self.records[rid].agent,
                        "qualities": [[pid, round(q, 9)] for pid, q in self.records[rid].qualities],
                    }
                    for rid in captured
                ]
            if delivered_records:
                row["delivered"] = delivered_records
            tick_events = [e for e in self.events if e.tick == self.tick]
            if tick_events:
                row["events"] = [
                    {"agent": e.agent, "kind": e.kind, "detail": e.detail} for e in tick_events
                ]
            self.log_rows.append(row)

        self.tick += 1

        # termination
        if self.clock_s >= self.scenario.mission_budget_s - 1e-9:
            self.end_reason = "budget-exhausted"
        elif all(st.collided for st in self.states.values()):
            self.end_reason = "all-collided"
        elif not flying and self.grounded_ticks > self.grounded_tick_limit:
            self.end_reason = "never-took-off"
        elif self.tick >= self.max_ticks:
            self.end_reason = "tick-limit"
        else:
            live = [n for n in self.order if self._alive(n)]
            if live and all(self.planners[n].done for n in live):
                if all(len(self.report_queues[n]) == 0 for n in live):
                    self.end_reason = "complete"

    def run(self) -> MissionResult:
        while self.end_reason is None:
            self.step_tick()
        board = tally(self.records)
        return MissionResult(
            scenario_name=self.scenario.name,
            planner_name=self.planner_name,
            rng_seed=self.scenario.rng_seed,
            ticks=self.tick,
            clock_s=self.clock_s,
            end_reason=self.end_reason,
            states={n: st.copy() for n, st in self.states.items()},
            records=list(self.records),
            board=board,
            events=list(self.events),
            stats=self.stats,
            max_idle_window_ticks=self.max_idle_window,
            interest_point_count=len(self.scenario.interest_points),
            log_rows=self.log_rows,
        )


def run_mission(
    scenario: Scenario,
    planner: Union[str, Callable],
    record_log: bool = True,
) -> MissionResult:
    return MissionRunner(scenario, planner, record_log=record_log).run()
