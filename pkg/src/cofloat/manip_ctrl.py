"""Per-robot manipulator controller: arm gravity compensation, payload share
statics, workspace boundary repulsion, float and approximate-float modes.

All controller math happens in the manipulator frame (base frame yawed with
the chassis; z is vertical in both).  Payload statics are solved in the
world frame and rotated in.

Sampled spring-like terms (the height spring of approximate float mode and
the boundary repulsion) are evaluated at a velocity-extrapolated position
z + zdot * lead_s rather than the raw sample.  The 100 Hz command hold plus
the torque-loop lag otherwise acts as negative damping on those springs;
the lead restores a small positive margin.  The continuous-time laws are
unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import delta as _delta
from .delta import DeltaParams, jacobian


class Mode(Enum):
    FLOAT = "float"
    APPROX_FLOAT = "approx_float"
    GRAVITY_COMP = "gravity_comp"   # arm-only support, no payload share


@dataclass
class ManipModel:
    """Joint-space inertia model and gravity constant for one manipulator.

    The joint-space mass matrix is D + m_w J^T J: a constant diagonal part
    (rotor/link inertia referred to the joints, gravity-neutral) plus a
    point mass at the wrist.  Presets use D = 0 so the model the controller
    inverts is exactly the simulated plant.
    """

    delta: DeltaParams
    joint_inertia: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wrist_mass: float = 0.6
    g: float = 9.81

    def __post_init__(self):
        self.joint_inertia = np.asarray(self.joint_inertia, dtype=float).reshape(3)
        if np.any(self.joint_inertia < 0) or self.wrist_mass <= 0:
            raise ValueError("joint-space inertia must be positive definite")

    def mass_matrix(self, theta) -> np.ndarray:
        J = jacobian(theta, self.delta)
        return np.diag(self.joint_inertia) + self.wrist_mass * (J.T @ J)


@dataclass
class TeamGeometry:
    """Shared startup knowledge for the payload statics program.

    offsets: per-robot attachment point minus payload COM, payload frame;
    f0: per-robot startup force shares, world frame; weight: total supported
    weight vector (the sum of the startup shares).
    """

    offsets: np.ndarray
    f0: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1, 3)
        self.f0 = np.asarray(self.f0, dtype=float).reshape(-1, 3)
        self.weight = np.asarray(self.weight, dtype=float).reshape(3)

    @property
    def n(self) -> int:
        return len(self.offsets)


@dataclass
class FloatState:
    """Mode and startup-measured quantities for one robot's controller."""

    mode: Mode = Mode.GRAVITY_COMP
    f_pay_nominal: np.ndarray = field(default_factory=lambda: np.zeros(3))
    z0: float = 0.0
    grasp_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    payload_mass: float = 0.0
    c_spring: float = 300.0     # N/m, height spring of approximate float
    eps: float = 0.03           # m, drag threshold
    k_rest: float = 2000.0      # N/m, boundary repulsion
    band: float = 0.02          # m, repulsion band inside the sphere
    b_rest: float = 80.0        # N*s/m, boundary contact damping
    lead_s: float = 0.025       # s, velocity lead on sampled spring terms
    active_damping: float = 3.0  # N*s/m wrist damping, gravity-comp mode only

    def __post_init__(self):
        self.f_pay_nominal = np.asarray(self.f_pay_nominal, dtype=float).reshape(3)
        self.grasp_offset = np.asarray(self.grasp_offset, dtype=float).reshape(3)
        if self.eps <= 0 or self.c_spring <= 0:
            raise ValueError("eps and c_spring must be positive")


def gravity_comp_force(theta, alpha, model: ManipModel):
    """Wrist force canceling gravity on the manipulator itself.

    Returns Lambda(theta) applied to the upward unit gravity reaction,
    i.e. the force supporting the task-space apparent inertia against the
    gravity vector (0, 0, -g).  On a singular Jacobian returns None so the
    caller can hold its last value and flag the fault.  alpha is accepted
    for interface parity; the wrist point-mass model does not depend on it.
    """
    try:
        J = jacobian(theta, model.delta)
    except ValueError:
        return None
    Jinv = np.linalg.inv(J)
    lam = Jinv.T @ np.diag(model.joint_inertia) @ Jinv + model.wrist_mass * np.eye(3)
    return lam @ np.array([0.0, 0.0, model.g])


def payload_share_statics(team: TeamGeometry, payload_rotation) -> tuple[np.ndarray, bool]:
    """Solve the team force-distribution statics in the world frame.

    minimize sum ||f_i - f0_i||^2
    s.t.     sum f_i = weight,   sum r_i x f_i = 0

    with r_i the current world-frame attachment offsets from the COM.
    Returns (forces (n,3), degenerate_flag).  On degenerate moment
    constraints (rank-deficient grasp geometry) falls back to equal
    vertical shares and sets the flag.
    """
    R = np.asarray(payload_rotation, dtype=float).reshape(3, 3)
    n = team.n
    r = team.offsets @ R.T                      # world-frame moment arms
    G = np.zeros((6, 3 * n))
    for i in range(n):
        G[:3, 3 * i : 3 * i + 3] = np.eye(3)
        x, y, z = r[i]
        G[3:, 3 * i : 3 * i + 3] = np.array(
            [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]]
        )
    b = np.concatenate((team.weight, np.zeros(3)))
    f0 = team.f0.reshape(-1)
    W = G @ G.T
    sv = np.linalg.svd(W, compute_uv=False)
    if sv[-1] < 1e-9 * max(sv[0], 1.0):
        shares = np.tile(team.weight / n, (n, 1))
        return shares, True
    nu = np.linalg.solve(W, G @ f0 - b)
    f = f0 - G.T @ nu
    return f.reshape(n, 3), False


def payload_share_force(state: FloatState, payload_rotation, team: TeamGeometry,
                        index: int) -> np.ndarray:
    """This robot's current payload share, world frame (float mode)."""
    forces, degenerate = payload_share_statics(team, payload_rotation)
    return forces[index]


def boundary_restoring(x, state: FloatState, params: DeltaParams,
                       x_rate=None) -> np.ndarray:
    """Restoring force toward the workspace center inside the repulsion band.

    Zero when the (velocity-extrapolated) clearance exceeds the band;
    otherwise a spring k_rest * (band - clearance) toward home plus contact
    damping on the outward radial velocity.  The damping is ramped in with
    penetration and never pulls inward-moving wrists back out, so the force
    stays continuous at activation.  The spring alone, sampled and held
    while the base chases the wrist, pumps energy into boundary contact;
    the damping makes the contact dissipative again.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    x_eff = x
    rate = None
    if x_rate is not None:
        rate = np.asarray(x_rate, dtype=float).reshape(3)
        x_eff = x + state.lead_s * rate
    home = params.home_position
    offset = x_eff - home
    dist = float(np.linalg.norm(offset))
    clearance = params.workspace_radius - dist
    if clearance >= state.band or dist < 1e-12:
        return np.zeros(3)
    direction = offset / dist
    pen = state.band - clearance
    mag = state.k_rest * pen
    if rate is not None and state.b_rest > 0.0:
        v_out = float(direction @ rate)
        if v_out > 0.0:
            mag += state.b_rest * v_out * min(1.0, 2.0 * pen / state.band)
    return -mag * direction


def clamp_torques(tau, tau_max: float) -> tuple[np.ndarray, bool]:
    """Scale the whole torque vector into the +-tau_max box (direction kept)."""
    tau = np.asarray(tau, dtype=float).reshape(3)
    peak = np.abs(tau).max()
    if peak <= tau_max or peak == 0.0:
        return tau, False
    return tau * (tau_max / peak), True


@dataclass
class CommandLog:
    """Per-tick controller outputs for telemetry."""

    f_com: np.ndarray
    tau: np.ndarray
    clamped: bool
    singular: bool
    reanchored: bool = False


class FloatController:
    """One robot's 100 Hz manipulator controller.

    Works in the manipulator frame.  Float mode recomputes the payload
    share from the statics program each tick; approximate float mode holds
    the startup share and adds the height spring with drag re-anchoring.
    """

    def __init__(self, model: ManipModel, sea_tau_max: float,
                 state: FloatState | None = None):
        self.model = model
        self.tau_max = sea_tau_max
        self.state = state if state is not None else FloatState()
        self.team: TeamGeometry | None = None
        self.index = 0
        self._last_f_manip = np.zeros(3)
        self.drag_active = False

    def set_mode(self, mode: Mode, wrist_z: float | None = None):
        """Switch control mode; entering approximate float re-anchors z0."""
        self.state.mode = mode
        if mode is Mode.APPROX_FLOAT and wrist_z is not None:
            self.state.z0 = wrist_z
        self.drag_active = False

    def command(self, theta, theta_dot, payload_rotation, base_yaw: float,
                base_twist=None, base_accel=None, kin=None) -> CommandLog:
        """Compute (f_com, tau) for the current sample.

        payload_rotation is the world-frame payload orientation
        reconstructed from the gimbal angles (None when no payload is
        attached); base_yaw rotates world-frame shares into the
        manipulator frame.  base_twist (odometry chassis twist) feeds the
        absolute-velocity damping of gravity-comp mode: without a payload
        there is no dissipation path, and a released wrist would glide
        forever where the hardware's unmodeled friction stops it.
        base_accel is the odometry estimate of the chassis twist rate
        (ax, ay, wdot); the controller feeds the resulting wrist transport
        force forward so base motion does not load the payload through the
        arm's inertia.  Hardware masks that term under its friction
        deadband; a frictionless model must cancel it or the chase lag
        pumps the payload's unconstrained modes.
        """
        st = self.state
        singular = False
        if kin is not None:
            # batched kinematics precomputed by the world for this tick:
            # (J, wrist position, wrist velocity, lead-predicted J)
            J, x, x_rate, J_lead = kin
            if abs(np.linalg.det(J)) < 1e-9:
                return CommandLog(np.zeros(3), np.zeros(3), False, True)
            Jinv = np.linalg.inv(J)
            lam = Jinv.T @ np.diag(self.model.joint_inertia) @ Jinv + (
                self.model.wrist_mass * np.eye(3))
            f_manip = lam @ np.array([0.0, 0.0, self.model.g])
            self._last_f_manip = f_manip
        else:
            J_lead = None
            f_manip = gravity_comp_force(theta, None, self.model)
            if f_manip is None:
                f_manip = self._last_f_manip
                singular = True
            try:
                J = jacobian(theta, self.model.delta)
            except ValueError:
                tau = np.zeros(3)
                return CommandLog(np.zeros(3), tau, False, True)
            x = _delta.fk(theta, self.model.delta, check_limits=False)
            x_rate = J @ np.asarray(theta_dot, dtype=float)
            if not singular:
                self._last_f_manip = f_manip

        c, s = math.cos(base_yaw), math.sin(base_yaw)
        Ryt = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])

        reanchored = False
        if st.mode is Mode.FLOAT and self.team is not None:
            f_pay_w = payload_share_force(st, payload_rotation, self.team, self.index)
            f_pay = Ryt @ f_pay_w
        elif st.mode is Mode.APPROX_FLOAT:
            f_pay = Ryt @ st.f_pay_nominal
            z = x[2]
            if abs(st.z0 - z) > st.eps:
                st.z0 = z + math.copysign(st.eps, st.z0 - z)
                if not self.drag_active:
                    reanchored = True
                self.drag_active = True
            elif abs(st.z0 - z) < 0.5 * st.eps:
                # wide hysteresis so settling ripple after a drag does not
                # count as a fresh episode
                self.drag_active = False
            z_led = z + st.lead_s * x_rate[2]
            f_pay = f_pay + np.array([0.0, 0.0, st.c_spring * (st.z0 - z_led)])
        else:
            f_pay = np.zeros(3)
            if st.active_damping > 0.0 and base_twist is not None:
                v_abs = x_rate + np.array(
                    [base_twist[0] - base_twist[2] * x[1],
                     base_twist[1] + base_twist[2] * x[0], 0.0])
                f_pay = -st.active_damping * v_abs

        f_rest = boundary_restoring(x, st, self.model.delta, x_rate)

        f_trans = np.zeros(3)
        if base_twist is not None and base_accel is not None:
            wb = base_twist[2]
            a_w = np.array([
                base_accel[0] - base_accel[2] * x[1]
                - wb * (base_twist[1] + wb * x[0] + 2.0 * x_rate[1]),
                base_accel[1] + base_accel[2] * x[0]
                + wb * (base_twist[0] - wb * x[1] + 2.0 * x_rate[0]),
                0.0,
            ])
            f_trans = self.model.wrist_mass * a_w

        f_com = f_manip + f_pay + f_rest + f_trans
        # Map to joint torques through the Jacobian at the lead-predicted
        # joint angles: a zero-order-held J under a large static preload
        # otherwise acts as negative damping on wrist motion.
        J_cmd = J
        if st.lead_s > 0.0:
            if J_lead is not None:
                J_cmd = J_lead
            else:
                try:
                    J_cmd = jacobian(
                        np.asarray(theta) + st.lead_s * np.asarray(theta_dot),
                        self.model.delta)
                except ValueError:
                    pass
        tau, clamped = clamp_torques(J_cmd.T @ f_com, self.tau_max)
        return CommandLog(f_com, tau, clamped, singular, reanchored)


def float_command(theta, alpha, state: FloatState, model: ManipModel,
                  team: TeamGeometry, index: int, payload_rotation,
                  sea_tau_max: float = 9.0, theta_dot=None):
    """One-shot float-mode command: f_com and clamped joint torques."""
    ctl = FloatController(model, sea_tau_max, state)
    ctl.team = team
    ctl.index = index
    td = np.zeros(3) if theta_dot is None else theta_dot
    log = ctl.command(theta, td, payload_rotation, 0.0)
    return log.f_com, log.tau


def approx_float_command(theta, alpha, state: FloatState, model: ManipModel,
                         sea_tau_max: float = 9.0, theta_dot=None):
    """One-shot approximate-float command; returns (f_com, tau, state')."""
    st = replace(state, mode=Mode.APPROX_FLOAT,
                 f_pay_nominal=state.f_pay_nominal.copy())
    ctl = FloatController(model, sea_tau_max, st)
    td = np.zeros(3) if theta_dot is None else theta_dot
    log = ctl.command(theta, td, None, 0.0)
    return log.f_com, log.tau, st


def startup_calibration(snapshot, robot_index: int, model: ManipModel,
                        spring_k: float, quiescence_s: float = 0.5) -> FloatState:
    """Measure the startup payload share and set height for one robot.

    snapshot must provide quiet_time (s), per-robot theta, beta and
    base_yaw.  The supported share is the wrist force implied by the spring
    torques minus the arm's own gravity-compensation force.
    """
    if snapshot.quiet_time < quiescence_s:
        raise ValueError("calibration requires quiescence")
    theta = snapshot.theta[robot_index]
    beta = snapshot.beta[robot_index]
    yaw = snapshot.base_yaw[robot_index]
    tau_est = spring_k * (beta - theta)
    J = jacobian(theta, model.delta)
    f_wrist = np.linalg.solve(J.T, tau_est)     # manip frame, applied by arm
    f_manip = gravity_comp_force(theta, None, model)
    c, s = math.cos(yaw), math.sin(yaw)
    Ry = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    f_pay0 = Ry @ (f_wrist - f_manip)
    x = _delta.fk(theta, model.delta, check_limits=False)
    return FloatState(
        mode=Mode.FLOAT,
        f_pay_nominal=f_pay0,
        z0=float(x[2]),
        payload_mass=float(f_pay0[2] / model.g) if model.g else 0.0,
    )
