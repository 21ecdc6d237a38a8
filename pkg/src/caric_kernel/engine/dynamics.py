"""Airframe control laws: command validation and the per-tick integrator.

Each UAV is a double integrator with hard speed and acceleration clamps.
Position setpoints use a braking law so the vehicle arrives without
overshoot; velocity setpoints are tracked directly. The body yaw and the
camera gimbal slew at fixed angular rates toward their latched targets.
"""

from __future__ import annotations

import math
from typing import Optional

from ..geometry import Aabb, Vec3, visfinite, vnorm, vsub, yaw_wrap
from ..world import UavSpec
from .types import (
    BODY_YAW_RATE_RAD_S,
    BRAKING_FACTOR,
    GIMBAL_PITCH_MAX_RAD,
    GIMBAL_PITCH_MIN_RAD,
    GIMBAL_RATE_RAD_S,
    Command,
    ControlState,
    UavState,
)

_ARRIVAL_EPS_M = 1e-6


def apply_command(
    control: ControlState, cmd: Command, volume: Aabb
) -> tuple[list[str], bool]:
    """Latch the valid parts of a command into the control state.

    Returns (rejection reasons, movement_accepted). Invalid parts are ignored
    — the airframe keeps flying on its previous setpoints.
    """
    reasons: list[str] = []
    moved = False

    if cmd.move_to is not None and cmd.velocity is not None:
        reasons.append("conflicting-setpoint")
    elif cmd.move_to is not None:
        if not visfinite(cmd.move_to):
            reasons.append("non-finite-position")
        elif not volume.contains(cmd.move_to, slack=1e-9):
            reasons.append("setpoint-outside-volume")
        else:
            control.mode = "position"
            control.target = Vec3(*cmd.move_to)
            moved = True
    elif cmd.velocity is not None:
        if not visfinite(cmd.velocity):
            reasons.append("non-finite-velocity")
        else:
            control.mode = "velocity"
            control.target = Vec3(*cmd.velocity)
            moved = True

    if cmd.yaw is not None:
        if math.isfinite(cmd.yaw):
            control.yaw_target = yaw_wrap(cmd.yaw)
        else:
            reasons.append("non-finite-yaw")

    if cmd.gimbal_pitch is not None:
        if math.isfinite(cmd.gimbal_pitch):
            control.gimbal_pitch_target = min(
                GIMBAL_PITCH_MAX_RAD, max(GIMBAL_PITCH_MIN_RAD, cmd.gimbal_pitch)
            )
        else:
            reasons.append("non-finite-gimbal-pitch")
    if cmd.gimbal_yaw is not None:
        if math.isfinite(cmd.gimbal_yaw):
            control.gimbal_yaw_target = yaw_wrap(cmd.gimbal_yaw)
        else:
            reasons.append("non-finite-gimbal-yaw")

    return reasons, moved


def desired_velocity(
    control: ControlState, state: UavState, spec: UavSpec, dt: float = 0.1
) -> Vec3:
    """Velocity the controller asks for this tick, before the accel clamp."""
    if control.mode == "velocity":
        v = control.target
        speed = vnorm(v)
        if speed <= spec.max_speed_mps or speed < 1e-12:
            return v
        s = spec.max_speed_mps / speed
        return Vec3(v.x * s, v.y * s, v.z * s)
    if control.mode == "position":
        d = vsub(control.target, state.position)
        dist = vnorm(d)
        if dist < _ARRIVAL_EPS_M:
            return Vec3(0.0, 0.0, 0.0)
        # approach speed limited so the vehicle can stop at the target using a
        # conservative fraction of its braking authority; the dist/dt cap lets
        # the last step land on the target instead of chattering across it
        speed = min(
            spec.max_speed_mps,
            math.sqrt(2.0 * BRAKING_FACTOR * spec.max_accel_mps2 * dist),
            dist / dt,
        )
        return Vec3(d.x / dist * speed, d.y / dist * speed, d.z / dist * speed)
    return Vec3(0.0, 0.0, 0.0)


def _slew(current: float, target: float, max_step: float) -> float:
    err = yaw_wrap(target - current)
    if abs(err) <= max_step:
        return target
    return current + math.copysign(max_step, err)


def step_uav(state: UavState, control: ControlState, spec: UavSpec, dt: float) -> None:
    """Advance one airframe one tick in place (semi-implicit Euler)."""
    v_des = desired_velocity(control, state, spec, dt)
    ax = (v_des.x - state.velocity.x) / dt
    ay = (v_des.y - state.velocity.y) / dt
    az = (v_des.z - state.velocity.z) / dt
    a = math.sqrt(ax * ax + ay * ay + az * az)
    if a > spec.max_accel_mps2:
        s = spec.max_accel_mps2 / a
        ax, ay, az = ax * s, ay * s, az * s
    vx = state.velocity.x + ax * dt
    vy = state.velocity.y + ay * dt
    vz = state.velocity.z + az * dt
    speed = math.sqrt(vx * vx + vy * vy + vz * vz)
    if speed > spec.max_speed_mps:
        s = spec.max_speed_mps / speed
        vx, vy, vz = vx * s, vy * s, vz * s
    state.velocity = Vec3(vx, vy, vz)
    state.position = Vec3(
        state.position.x + vx * dt,
        state.position.y + vy * dt,
        state.position.z + vz * dt,
    )

    if control.yaw_target is not None:
        state.yaw = yaw_wrap(_slew(state.yaw, control.yaw_target, BODY_YAW_RATE_RAD_S * dt))
    state.gimbal_pitch = _slew(state.gimbal_pitch, control.gimbal_pitch_target, GIMBAL_RATE_RAD_S * dt)
    state.gimbal_yaw = yaw_wrap(_slew(state.gimbal_yaw, control.gimbal_yaw_target, GIMBAL_RATE_RAD_S * dt))


def clamp_into_volume(state: UavState, volume: Aabb) -> bool:
    """Keep the airframe inside the operating envelope; kill the velocity
    component that pushed it out. Returns True when a clamp happened."""
    x, y, z = state.position
    vx, vy, vz = state.velocity
    clamped = False
    if x < volume.lo.x:
        x, vx, clamped = volume.lo.x, max(vx, 0.0), True
    elif x > volume.hi.x:
        x, vx, clamped = volume.hi.x, min(vx, 0.0), True
    if y < volume.lo.y:
        y, vy, clamped = volume.lo.y, max(vy, 0.0), True
    elif y > volume.hi.y:
        y, vy, clamped = volume.hi.y, min(vy, 0.0), True
    if z < volume.lo.z:
        z, vz, clamped = volume.lo.z, max(vz, 0.0), True
    elif z > volume.hi.z:
        z, vz, clamped = volume.hi.z, min(vz, 0.0), True
    if clamped:
        state.position = Vec3(x, y, z)
        state.velocity = Vec3(vx, vy, vz)
    return clamped
