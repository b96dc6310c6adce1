"""Mecanum omnidirectional base: wheel kinematics, lagged twist tracking,
odometry and the wrist-recentering PD controller.

The base is a velocity-commanded kinematic body.  The commanded chassis
twist is rate-limited by a first-order lag; wheel encoder speeds follow the
lagged twist, while the ground-truth motion additionally passes through an
optional per-wheel slip gain.  Odometry integrates the encoder-side
kinematics, so slip makes the estimate drift from truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class BaseParams:
    wheel_radius: float = 0.075       # m
    half_length: float = 0.25         # l_x, m
    half_width: float = 0.20          # l_y, m
    twist_time_constant: float = 0.15  # s
    v_max: float = 1.0                # m/s, planar speed limit
    w_max: float = 1.5                # rad/s, yaw rate limit
    kp_xy: float = 8.0
    kd_xy: float = 2.0
    kp_yaw: float = 6.0
    kd_yaw: float = 1.5

    def __post_init__(self):
        for name in ("wheel_radius", "half_length", "half_width",
                     "twist_time_constant", "v_max", "w_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class BaseState:
    """World pose (x, y, yaw), chassis twist and the odometry estimate."""

    pose: np.ndarray = field(default_factory=lambda: np.zeros(3))
    twist: np.ndarray = field(default_factory=lambda: np.zeros(3))
    odom_pose: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=float).reshape(3).copy()
        self.twist = np.asarray(self.twist, dtype=float).reshape(3).copy()
        self.odom_pose = np.asarray(self.odom_pose, dtype=float).reshape(3).copy()

    def mean_accel(self, V_com, dt: float, params: "BaseParams") -> np.ndarray:
        """Exact mean chassis acceleration over one step of the lag filter."""
        V_lim = limit_twist(V_com, params)
        return (V_lim - self.twist) * (
            -math.expm1(-dt / params.twist_time_constant) / dt)


def limit_twist(V, params: BaseParams) -> np.ndarray:
    """Clamp planar speed to v_max (direction preserved) and |w| to w_max."""
    V = np.asarray(V, dtype=float).reshape(3).copy()
    speed = math.hypot(V[0], V[1])
    if speed > params.v_max:
        V[:2] *= params.v_max / speed
    V[2] = min(max(V[2], -params.w_max), params.w_max)
    return V


def recentering_twist(wrist_xy, alpha_z, rates, params: BaseParams) -> np.ndarray:
    """Chassis twist command driving (wrist x, wrist y, gimbal yaw) to zero.

    wrist_xy is the wrist position in the chassis frame, alpha_z the gimbal
    yaw, rates their measured time derivatives (relative to the chassis).
    The base chases the wrist, so a +x wrist offset commands +x velocity.
    """
    wrist_xy = np.asarray(wrist_xy, dtype=float).reshape(2)
    rates = np.asarray(rates, dtype=float).reshape(3)
    V = np.array(
        [
            params.kp_xy * wrist_xy[0] + params.kd_xy * rates[0],
            params.kp_xy * wrist_xy[1] + params.kd_xy * rates[1],
            params.kp_yaw * alpha_z + params.kd_yaw * rates[2],
        ]
    )
    return limit_twist(V, params)


def wheel_speeds(V, params: BaseParams) -> np.ndarray:
    """Wheel angular velocities (FL, FR, RL, RR) for a chassis twist."""
    vx, vy, w = np.asarray(V, dtype=float).reshape(3)
    L = params.half_length + params.half_width
    r = params.wheel_radius
    return np.array(
        [
            (vx - vy - L * w) / r,
            (vx + vy + L * w) / r,
            (vx + vy - L * w) / r,
            (vx - vy + L * w) / r,
        ]
    )


def twist_from_wheels(omega, params: BaseParams) -> np.ndarray:
    """Least-squares chassis twist from four wheel speeds (pseudo-inverse)."""
    o = np.asarray(omega, dtype=float).reshape(4)
    r = params.wheel_radius
    L = params.half_length + params.half_width
    vx = r * (o[0] + o[1] + o[2] + o[3]) / 4.0
    vy = r * (-o[0] + o[1] + o[2] - o[3]) / 4.0
    w = r * (-o[0] + o[1] - o[2] + o[3]) / (4.0 * L)
    return np.array([vx, vy, w])


def _integrate_planar(pose: np.ndarray, V: np.ndarray, dt: float) -> np.ndarray:
    """Midpoint-rule planar pose update for a chassis-frame twist."""
    phi_mid = pose[2] + 0.5 * V[2] * dt
    c, s = math.cos(phi_mid), math.sin(phi_mid)
    return np.array(
        [
            pose[0] + dt * (c * V[0] - s * V[1]),
            pose[1] + dt * (s * V[0] + c * V[1]),
            pose[2] + dt * V[2],
        ]
    )


def step_base(
    state: BaseState,
    V_com,
    dt: float,
    params: BaseParams,
    slip_gains=None,
) -> BaseState:
    """Advance the base one step under a commanded chassis twist.

    The wheel-side twist relaxes toward the limited command with the
    configured time constant (exact exponential update).  Ground truth is
    integrated from the slip-adjusted wheel speeds; odometry from the
    encoder-side speeds.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    V_lim = limit_twist(V_com, params)
    decay = math.exp(-dt / params.twist_time_constant)
    twist = V_lim + (state.twist - V_lim) * decay
    if slip_gains is None:
        true_twist = twist
    else:
        enc = wheel_speeds(twist, params)
        true_twist = twist_from_wheels(
            np.asarray(slip_gains, dtype=float).reshape(4) * enc, params
        )
    pose = _integrate_planar(state.pose, true_twist, dt)
    odom = _integrate_planar(state.odom_pose, twist, dt)
    out = BaseState(pose, twist, odom)
    return out


def base_rotation(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
