"""Constrained team-plus-payload dynamics.

Dynamic coordinates of a world are the payload bodies' velocities (body
angular, world linear) and each robot's proximal joint angles theta.  SEA
motor angles beta are integrated alongside but are unconstrained, and the
mobile bases are velocity-commanded kinematic bodies whose motion enters
the constraint geometry as a rheonomic term.  Grasps are ideal ball joints
at the gimbal center (3 holonomic rows each, written as attachment minus
wrist so the multiplier is the force the robot applies to the payload); a
hinged payload adds 3 pivot rows and 2 axis-alignment rows.

Acceleration-level constraints are stabilized with Baumgarte feedback
(2*zeta*omega on the velocity residual, omega^2 on the position residual)
and the linear system is solved by Schur complement on the block-diagonal
mass matrix.  Rigid-body rotation is integrated by rotating the world
angular momentum, so an isolated body conserves momentum exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import manip_ctrl as _mc
from .delta import DeltaParams, LEG_U, ZHAT, fk as _fk, ik as _ik, jacobian as _jac
from .manip_ctrl import FloatController, ManipModel
from .mobase import (BaseParams, BaseState, base_rotation, limit_twist,
                     recentering_twist)
from .sea import SeaParams
from .spatial import Pose, gram_schmidt, rot_x, rot_y, rot_z, skew

try:
    from numba import njit as _njit
except ImportError:                      # pragma: no cover
    _njit = None

_EYE3 = np.eye(3)

BAUMGARTE_ZETA = 1.0
BAUMGARTE_OMEGA = 50.0       # rad/s
POS_RESIDUAL_FAULT = 1e-3    # m
RANK_TOL = 1e-8
GIMBAL_LOCK_DEG = 89.0


class SimulationFault(RuntimeError):
    """Raised when the world leaves its validity envelope."""


def _c3(a, b):
    """Cross product of two 3-vectors without numpy dispatch overhead."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _zc(w, v):
    """Cross product of (0, 0, w) with a 3-vector."""
    return np.array([-w * v[1], w * v[0], 0.0])


def _rodrigues(w, dt):
    """Rotation matrix exp([w dt]x) for a small incremental body rotation."""
    ang = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) * dt
    K = skew(w * dt)
    if ang < 1e-12:
        return np.eye(3) + K
    a = math.sin(ang) / ang
    b = (1.0 - math.cos(ang)) / (ang * ang)
    return np.eye(3) + a * K + b * (K @ K)



@dataclass
class PayloadBody:
    mass: float
    inertia: np.ndarray                  # 3x3 about the COM, body axes
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        self.com_offset = np.asarray(self.com_offset, dtype=float).reshape(3)
        if self.mass <= 0:
            raise ValueError("body mass must be positive")
        if not np.allclose(self.inertia, self.inertia.T) or np.any(
            np.linalg.eigvalsh(self.inertia) <= 0
        ):
            raise ValueError("body inertia must be symmetric positive definite")


@dataclass
class Hinge:
    body_a: int
    body_b: int
    pivot: np.ndarray                    # in body_a frame
    axis: np.ndarray                     # unit vector, body_a frame
    damping: float = 0.2                 # N*m*s/rad viscous

    def __post_init__(self):
        self.pivot = np.asarray(self.pivot, dtype=float).reshape(3)
        self.axis = np.asarray(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-9:
            raise ValueError("hinge axis must be a unit vector")


@dataclass
class PayloadModel:
    """Rigid or hinged two-body payload with grasp and grip points."""

    bodies: list
    hinge: Hinge | None = None
    attachments: list = field(default_factory=list)   # (robot, body, point)
    grips: dict = field(default_factory=dict)         # name -> (body, point)

    @property
    def kind(self) -> str:
        return "hinged" if self.hinge is not None else "rigid"

    @property
    def internal_dofs(self) -> int:
        return 0 if self.hinge is None else 1

    @property
    def n_p(self) -> int:
        """Payload degrees of freedom: 6 plus internal articulation."""
        return 6 + self.internal_dofs

    @property
    def total_mass(self) -> float:
        return sum(b.mass for b in self.bodies)


@dataclass
class BodyState:
    R: np.ndarray
    pos: np.ndarray                      # COM, world
    omega: np.ndarray                    # body frame
    vel: np.ndarray                      # world frame

    def pose(self, com_offset) -> Pose:
        """User body-frame pose (origin at the declared body origin)."""
        return Pose(self.R.copy(), self.pos - self.R @ com_offset)


def gimbal_angles(rel_rotation) -> tuple[np.ndarray, bool]:
    """Decompose a relative rotation as intrinsic x-y-z angles.

    Returns (alpha, locked).  Near the middle-angle singularity
    (|alpha_y| > 89 deg) the angles are unreliable; the caller should hold
    its previous values when locked is set.
    """
    R = np.asarray(rel_rotation, dtype=float)
    sy = min(1.0, max(-1.0, R[0, 2]))
    ay = math.asin(sy)
    if abs(ay) > math.radians(GIMBAL_LOCK_DEG):
        return np.array([0.0, ay, 0.0]), True
    ax = math.atan2(-R[1, 2], R[2, 2])
    az = math.atan2(-R[0, 1], R[0, 0])
    return np.array([ax, ay, az]), False


def compose_gimbal(alpha) -> np.ndarray:
    """Inverse of gimbal_angles: Rx(ax) @ Ry(ay) @ Rz(az)."""
    ax, ay, az = alpha
    return rot_x(ax) @ rot_y(ay) @ rot_z(az)


@dataclass
class RobotSpec:
    """Static description of one robot for world construction."""

    delta: DeltaParams
    sea: SeaParams
    manip: ManipModel
    base: BaseParams
    base_pose: np.ndarray = field(default_factory=lambda: np.zeros(3))
    slip_gains: np.ndarray | None = None
    recenter: bool = True


class RobotUnit:
    """Mutable per-robot state inside a world."""

    def __init__(self, spec: RobotSpec, controller: FloatController):
        self.spec = spec
        self.controller = controller
        self.base = BaseState(pose=np.asarray(spec.base_pose, dtype=float))
        self.theta = np.zeros(3)
        self.theta_dot = np.zeros(3)
        self.beta = np.zeros(3)
        self.beta_dot = np.zeros(3)
        self.pid_integ = np.zeros(3)
        self.pid_prev = np.zeros(3)
        self.tau_motor = np.zeros(3)
        self.tau_cmd = np.zeros(3)
        self.V_com = np.zeros(3)
        self.V_lim = np.zeros(3)
        self.hold_tau: np.ndarray | None = None
        self.attach: tuple[int, np.ndarray] | None = None  # (body, point-COM)
        self.f_com = np.zeros(3)
        self.clamped = False
        self.alpha = np.zeros(3)
        self.gimbal_locked = False


@dataclass
class SystemState:
    """Structured snapshot of the generalized coordinates and velocities."""

    payload_poses: list
    payload_omega: list
    payload_vel: list
    hinge_angle: float | None
    base_poses: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    beta: np.ndarray
    beta_dot: np.ndarray
    t: float
    tick: int
    quiet_time: float

    @property
    def base_yaw(self) -> np.ndarray:
        return self.base_poses[:, 2]


@dataclass
class SystemMatrices:
    """Assembled dynamics of Mq'' + c + p = Su + A^T lambda, Aq' + a_t = 0."""

    M: np.ndarray
    c: np.ndarray
    p: np.ndarray
    S: np.ndarray
    A: np.ndarray
    gamma: np.ndarray          # Adot qdot + rheonomic acceleration terms
    vel_residual: np.ndarray   # A qdot + a_t
    pos_residual: np.ndarray   # f(q)
    lam: np.ndarray | None = None
    rank_deficient: bool = False


class _Lean:
    """Per-step assembly products shared by the stepper and the analyzers."""

    __slots__ = ("th", "thd", "plat", "J", "jdot_qd", "xd", "Ry",
                 "wrist_local", "A", "gamma", "gpos", "at", "f", "qd",
                 "spring", "Mth", "Mth_inv", "humans", "hinge_rate",
                 "wrist_base_vel", "a_fict", "fict_power")


def _batch_kinematics_py(th, thd, L1, L2, dr, zoff, U):
    """Per-robot delta kinematics: platform point, J, Jdot*thd, wrist rate.

    Returns (plat, J, jdot_qd, xd, status); status 1 means no sphere
    intersection, 2 a near-coincident branch.  Written with plain loops so
    the JIT below can compile it; the pure-Python fallback runs the same
    code object.
    """
    R = th.shape[0]
    plat = np.zeros((R, 3))
    J = np.zeros((R, 3, 3))
    jdot = np.zeros((R, 3))
    xd = np.zeros((R, 3))
    status = 0
    for r in range(R):
        c = np.zeros((3, 3))
        tang = np.zeros((3, 3))
        for i in range(3):
            ct = math.cos(th[r, i])
            st = math.sin(th[r, i])
            radial = dr[r] + L1[r] * ct
            for k in range(3):
                c[i, k] = radial * U[i, k]
                tang[i, k] = -L1[r] * st * U[i, k]
            c[i, 2] += L1[r] * st
            tang[i, 2] += L1[r] * ct
        d21 = c[1] - c[0]
        d31 = c[2] - c[0]
        d = math.sqrt(d21[0] ** 2 + d21[1] ** 2 + d21[2] ** 2)
        if d < 1e-12:
            return plat, J, jdot, xd, 2
        ex = d21 / d
        i1 = ex[0] * d31[0] + ex[1] * d31[1] + ex[2] * d31[2]
        eyr = d31 - i1 * ex
        ny = math.sqrt(eyr[0] ** 2 + eyr[1] ** 2 + eyr[2] ** 2)
        if ny < 1e-12:
            return plat, J, jdot, xd, 2
        ey = eyr / ny
        ez = np.array([ex[1] * ey[2] - ex[2] * ey[1],
                       ex[2] * ey[0] - ex[0] * ey[2],
                       ex[0] * ey[1] - ex[1] * ey[0]])
        px = 0.5 * d
        j1 = ey[0] * d31[0] + ey[1] * d31[1] + ey[2] * d31[2]
        py = ((i1 * i1 + j1 * j1) * 0.5 - i1 * px) / j1
        disc = L2[r] * L2[r] - px * px - py * py
        if disc < 0.0:
            return plat, J, jdot, xd, 1
        if disc < 1e-10:
            return plat, J, jdot, xd, 2
        pz = math.sqrt(disc)
        sgn = 1.0 if ez[2] >= 0.0 else -1.0
        p = c[0] + px * ex + py * ey + sgn * pz * ez
        plat[r] = p
        G = np.zeros((3, 3))
        rhs = np.zeros((3, 3))
        for i in range(3):
            for k in range(3):
                G[i, k] = p[k] - c[i, k]
            dnum = (G[i, 0] * tang[i, 0] + G[i, 1] * tang[i, 1]
                    + G[i, 2] * tang[i, 2])
            rhs[i, i] = dnum
        Jr = np.linalg.solve(G, rhs)
        J[r] = Jr
        v = Jr @ thd[r]
        xd[r] = v
        rv = np.zeros(3)
        for i in range(3):
            cddx = -(c[i, 0] - dr[r] * U[i, 0])
            cddy = -(c[i, 1] - dr[r] * U[i, 1])
            cddz = -c[i, 2]
            relx = v[0] - tang[i, 0] * thd[r, i]
            rely = v[1] - tang[i, 1] * thd[r, i]
            relz = v[2] - tang[i, 2] * thd[r, i]
            rv[i] = ((G[i, 0] * cddx + G[i, 1] * cddy + G[i, 2] * cddz)
                     * thd[r, i] * thd[r, i]
                     - (relx * relx + rely * rely + relz * relz))
        jdot[r] = np.linalg.solve(G, rv)
    return plat, J, jdot, xd, status


if _njit is not None:
    _batch_kinematics = _njit(cache=True)(_batch_kinematics_py)
else:                                    # pragma: no cover
    _batch_kinematics = _batch_kinematics_py


class World:
    """One simulation world: payload bodies, robots, constraints, time."""

    def __init__(
        self,
        robots: list[RobotSpec],
        payload: PayloadModel | None = None,
        payload_poses: list[Pose] | None = None,
        physics_hz: float = 4000.0,
        sea_hz: float = 800.0,
        control_hz: float = 100.0,
        gravity: float = 9.81,
        seed: int = 0,
    ):
        if physics_hz % sea_hz != 0 or physics_hz % control_hz != 0:
            raise ValueError("control rates must divide the physics rate")
        self.physics_hz = float(physics_hz)
        self.sea_hz = float(sea_hz)
        self.control_hz = float(control_hz)
        self.dt = 1.0 / physics_hz
        self._sea_every = int(round(physics_hz / sea_hz))
        self._ctrl_every = int(round(physics_hz / control_hz))
        self.gravity = float(gravity)
        self.seed = seed
        self.rng = np.random.default_rng(seed)

        self.payload = payload
        self.bodies: list[BodyState] = []
        if payload is not None:
            poses = payload_poses or [Pose() for _ in payload.bodies]
            for body, pose in zip(payload.bodies, poses):
                R = np.asarray(pose.rotation, dtype=float).copy()
                com_w = pose.apply(body.com_offset)
                self.bodies.append(BodyState(R, com_w, np.zeros(3), np.zeros(3)))
        self.robots = [
            RobotUnit(spec, FloatController(spec.manip, spec.sea.tau_max))
            for spec in robots
        ]
        self.hinge_ref = None
        self.human_loads: list = []      # (target, point, fn, name)
        self.extra_joint_torque: np.ndarray | None = None  # (R, 3) test hook
        self.events: list = []
        self.t = 0.0
        self.tick = 0
        self.quiet_time = 0.0
        self.fault: str | None = None
        self.max_pos_residual = 0.0
        self.max_vel_residual = 0.0
        self.clamp_count = 0
        self.lam = np.zeros(0)
        # energy bookkeeping (accumulated work, J)
        self.work_motor = 0.0
        self.work_human = 0.0
        self.work_base = 0.0
        self.work_damping = 0.0

        self._bind_attachments()
        self._init_hinge()
        self._alloc_workspace()
        self._init_static_equilibrium()

    # -- construction -----------------------------------------------------

    def _bind_attachments(self):
        if self.payload is None:
            return
        for robot_idx, body_idx, point in self.payload.attachments:
            if robot_idx >= len(self.robots):
                raise ValueError(f"attachment references missing robot {robot_idx}")
            body = self.payload.bodies[body_idx]
            rel = np.asarray(point, dtype=float) - body.com_offset
            self.robots[robot_idx].attach = (body_idx, rel)

    def _init_hinge(self):
        h = self.payload.hinge if self.payload is not None else None
        if h is None:
            return
        a, b = self.bodies[h.body_a], self.bodies[h.body_b]
        body_a = self.payload.bodies[h.body_a]
        pivot_rel_a = h.pivot - body_a.com_offset
        pivot_w = a.pos + a.R @ pivot_rel_a
        axis_w = a.R @ h.axis
        tmp = np.array([1.0, 0.0, 0.0])
        if abs(h.axis @ tmp) > 0.9:
            tmp = np.array([0.0, 1.0, 0.0])
        n1_a = np.cross(h.axis, tmp)
        n1_a /= np.linalg.norm(n1_a)
        n2_a = np.cross(h.axis, n1_a)
        self.hinge_ref = {
            "pa": pivot_rel_a,
            "pb": b.R.T @ (pivot_w - b.pos),
            "ea": h.axis.copy(),
            "na": n1_a,
            "n1b": b.R.T @ (a.R @ n1_a),
            "n2b": b.R.T @ (a.R @ n2_a),
            "damping": h.damping,
        }

    def _alloc_workspace(self):
        R = len(self.robots)
        nb = len(self.bodies)
        self.n_dyn = 6 * nb + 3 * R
        self._grasps = [(i, r.attach[0], r.attach[1])
                        for i, r in enumerate(self.robots)
                        if r.attach is not None]
        self._grasp_skew = [skew(rel) for _, _, rel in self._grasps]
        self._base_decay = np.array([
            math.exp(-self.dt / r.spec.base.twist_time_constant)
            for r in self.robots])
        self.m_rows = 3 * len(self._grasps) + (
            5 if self.hinge_ref is not None else 0)
        self._L1 = np.array([r.spec.delta.L1 for r in self.robots])
        self._L2 = np.array([r.spec.delta.L2 for r in self.robots])
        self._dr = np.array([r.spec.delta.dr for r in self.robots])
        self._zoff = np.array([r.spec.delta.z_off for r in self.robots])
        self._mw = np.array([r.spec.manip.wrist_mass for r in self.robots])
        self._D = (np.stack([np.diag(r.spec.manip.joint_inertia)
                             for r in self.robots])
                   if R else np.zeros((0, 3, 3)))
        self._spring_k = np.array([r.spec.sea.k for r in self.robots])
        self._lag_f = np.array([
            -math.expm1(-self.dt / r.spec.base.twist_time_constant) / self.dt
            for r in self.robots])
        self._Iinv = [np.linalg.inv(b.inertia) for b in (
            self.payload.bodies if self.payload else [])]

    def _init_static_equilibrium(self):
        """Place joints on the attachments and preload the SEA springs."""
        for r in self.robots:
            if r.attach is not None:
                body_idx, rel = r.attach
                bs = self.bodies[body_idx]
                target_w = bs.pos + bs.R @ rel
                Ry = base_rotation(r.base.pose[2])
                local = Ry.T @ (target_w - np.array(
                    [r.base.pose[0], r.base.pose[1], 0.0]))
                try:
                    r.theta = _ik(local, r.spec.delta)
                except ValueError as e:
                    raise ValueError("initial grasp unreachable") from e
            else:
                r.theta = np.full(3, r.spec.delta.home_theta)

        shares = self._static_grasp_forces()
        for i, r in enumerate(self.robots):
            J = _jac(r.theta, r.spec.delta)
            Ry = base_rotation(r.base.pose[2])
            f_arm = _mc.gravity_comp_force(r.theta, None, r.spec.manip)
            tau0 = J.T @ (Ry.T @ shares.get(i, np.zeros(3)) + f_arm)
            r.beta = r.theta + tau0 / r.spec.sea.k
            r.tau_cmd = tau0.copy()
            r.tau_motor = tau0.copy()
            r.pid_prev = tau0.copy()
            if r.spec.sea.ki > 0:
                r.pid_integ = tau0 / r.spec.sea.ki
            r.hold_tau = tau0.copy()
            r.controller.index = i

    def _static_grasp_forces(self) -> dict:
        """Minimum-norm constraint forces supporting the payload at rest."""
        if self.payload is None or not self._grasps:
            return {}
        lean = self._assemble_lean()
        A_pay = lean.A[:, : 6 * len(self.bodies)]
        f_grav = np.zeros(6 * len(self.bodies))
        for bi, body in enumerate(self.payload.bodies):
            f_grav[6 * bi + 5] = -body.mass * self.gravity
        lam, *_ = np.linalg.lstsq(A_pay.T, -f_grav, rcond=None)
        return {ri: lam[3 * k : 3 * k + 3]
                for k, (ri, _, _) in enumerate(self._grasps)}

    # -- batched robot kinematics -------------------------------------------

    def _robot_kinematics(self):
        """Platform point, Jacobian and Jdot*thetadot for all robots."""
        R = len(self.robots)
        th = np.empty((R, 3))
        thd = np.empty((R, 3))
        for i, r in enumerate(self.robots):
            th[i] = r.theta
            thd[i] = r.theta_dot
        plat, J, jdot_qd, xd, status = _batch_kinematics(
            th, thd, self._L1, self._L2, self._dr, self._zoff, LEG_U)
        if status == 1:
            raise SimulationFault("unreachable joint configuration")
        if status == 2:
            raise SimulationFault("kinematic singularity")
        return th, thd, plat, J, jdot_qd, xd

    # -- assembly -------------------------------------------------------------

    def _assemble_lean(self) -> _Lean:
        """Constraint rows, generalized forces and velocities (no stepping)."""
        nb = len(self.bodies)
        R = len(self.robots)
        out = _Lean()
        if R:
            (out.th, out.thd, out.plat, out.J, out.jdot_qd,
             out.xd) = self._robot_kinematics()
            yaw = np.array([r.base.pose[2] for r in self.robots])
            cy, sy = np.cos(yaw), np.sin(yaw)
            Ry = np.zeros((R, 3, 3))
            Ry[:, 0, 0] = cy
            Ry[:, 0, 1] = -sy
            Ry[:, 1, 0] = sy
            Ry[:, 1, 1] = cy
            Ry[:, 2, 2] = 1.0
            out.Ry = Ry
            out.wrist_local = out.plat + self._zoff[:, None] * ZHAT

        A = np.zeros((self.m_rows, self.n_dyn))
        gam = np.zeros(self.m_rows)
        gpos = np.zeros(self.m_rows)
        at = np.zeros(self.m_rows)
        f = np.zeros(self.n_dyn)
        wrist_base_vel = {}

        for bi, bs in enumerate(self.bodies):
            body = self.payload.bodies[bi]
            f[6 * bi : 6 * bi + 3] = -_c3(bs.omega, body.inertia @ bs.omega)
            f[6 * bi + 5] = -body.mass * self.gravity

        out.hinge_rate = None
        if self.hinge_ref is not None:
            h = self.hinge_ref
            ia, ib = self.payload.hinge.body_a, self.payload.hinge.body_b
            a, b = self.bodies[ia], self.bodies[ib]
            axis_w = a.R @ h["ea"]
            out.hinge_rate = float(
                (b.R @ b.omega - a.R @ a.omega) @ axis_w)
            if h["damping"] > 0.0:
                m_w = -h["damping"] * out.hinge_rate * axis_w
                f[6 * ib : 6 * ib + 3] += b.R.T @ m_w
                f[6 * ia : 6 * ia + 3] -= a.R.T @ m_w

        out.humans = []
        for target, point, fn, name in self.human_loads:
            if isinstance(target, int):
                bs = self.bodies[target]
                rel = point - self.payload.bodies[target].com_offset
                r_w = bs.R @ rel
                w_w = bs.R @ bs.omega
                grip_p = bs.pos + r_w
                grip_v = bs.vel + _c3(w_w, r_w)
            else:
                ri = target[1]
                r = self.robots[ri]
                wl_w = out.Ry[ri] @ out.wrist_local[ri]
                grip_p = np.array([r.base.pose[0], r.base.pose[1], 0.0]) + wl_w
                grip_v = (out.Ry[ri] @ out.xd[ri]
                          + out.Ry[ri] @ np.array(
                              [r.base.twist[0], r.base.twist[1], 0.0])
                          + _zc(r.base.twist[2], wl_w))
            force, moment = fn(self.t, grip_p, grip_v)
            out.humans.append((target, point, np.asarray(force, dtype=float),
                               np.asarray(moment, dtype=float), grip_v))
            if isinstance(target, int):
                f[6 * target : 6 * target + 3] += bs.R.T @ (
                    _c3(r_w, force) + moment)
                f[6 * target + 3 : 6 * target + 6] += force
            else:
                f[6 * nb + 3 * ri : 6 * nb + 3 * ri + 3] += out.J[ri].T @ (
                    out.Ry[ri].T @ force)

        if R:
            beta = np.stack([r.beta for r in self.robots])
            out.spring = self._spring_k[:, None] * (beta - out.th)
            grav_wrist = np.zeros((R, 3))
            grav_wrist[:, 2] = -self._mw * self.gravity
            tau = out.spring + np.einsum("rji,rj->ri", out.J, grav_wrist) - (
                self._mw[:, None] * np.einsum(
                    "rji,rj->ri", out.J, out.jdot_qd))
            f[6 * nb :] += tau.reshape(-1)
            if self.extra_joint_torque is not None:
                f[6 * nb :] += self.extra_joint_torque.reshape(-1)
            out.Mth = self._D + self._mw[:, None, None] * np.einsum(
                "rji,rjk->rik", out.J, out.J)
            out.Mth_inv = np.linalg.inv(out.Mth)
            # Transport acceleration of each wrist from its moving base
            # (mean chassis acceleration over the step, rotating-frame
            # centripetal and Coriolis terms).  It enters both the wrist
            # point-mass dynamics (fictitious force on theta) and, for
            # grasping robots, the constraint bias gamma.
            out.a_fict = np.zeros((R, 3))
            out.fict_power = 0.0
            for ri, r in enumerate(self.robots):
                wb = r.base.twist[2]
                tw_dot = (r.V_lim - r.base.twist) * self._lag_f[ri]
                if wb == 0.0 and tw_dot[0] == 0.0 and tw_dot[1] == 0.0 and (
                        tw_dot[2] == 0.0):
                    continue
                vb_w = out.Ry[ri] @ np.array(
                    [r.base.twist[0], r.base.twist[1], 0.0])
                wl_w = out.Ry[ri] @ out.wrist_local[ri]
                a_f = (
                    out.Ry[ri] @ np.array([tw_dot[0], tw_dot[1], 0.0])
                    + _zc(wb, vb_w)
                    + _zc(tw_dot[2], wl_w)
                    + _zc(wb, _zc(wb, wl_w))
                    + 2.0 * _zc(wb, out.Ry[ri] @ out.xd[ri])
                )
                out.a_fict[ri] = a_f
                f_fict = -self._mw[ri] * (out.J[ri].T @ (out.Ry[ri].T @ a_f))
                f[6 * nb + 3 * ri : 6 * nb + 3 * ri + 3] += f_fict
                out.fict_power += float(f_fict @ r.theta_dot)

        row = 0
        for gi, (ri, bi, rel) in enumerate(self._grasps):
            r = self.robots[ri]
            bs = self.bodies[bi]
            sl = slice(row, row + 3)
            A[sl, 6 * bi : 6 * bi + 3] = -bs.R @ self._grasp_skew[gi]
            A[sl, 6 * bi + 3 : 6 * bi + 6] = _EYE3
            A[sl, 6 * nb + 3 * ri : 6 * nb + 3 * ri + 3] = -(
                out.Ry[ri] @ out.J[ri])
            attach_w = bs.pos + bs.R @ rel
            base_xy = np.array([r.base.pose[0], r.base.pose[1], 0.0])
            wrist_w = base_xy + out.Ry[ri] @ out.wrist_local[ri]
            gpos[sl] = attach_w - wrist_w
            wb = r.base.twist[2]
            vbase_w = out.Ry[ri] @ np.array(
                [r.base.twist[0], r.base.twist[1], 0.0])
            wl_w = out.Ry[ri] @ out.wrist_local[ri]
            wfb = vbase_w + _zc(wb, wl_w)
            wrist_base_vel[ri] = wfb
            at[sl] = -wfb
            gam[sl] = (
                bs.R @ _c3(bs.omega, _c3(bs.omega, rel))
                - out.a_fict[ri]
                - out.Ry[ri] @ out.jdot_qd[ri]
            )
            row += 3
        if self.hinge_ref is not None:
            h = self.hinge_ref
            ia, ib = self.payload.hinge.body_a, self.payload.hinge.body_b
            a, b = self.bodies[ia], self.bodies[ib]
            sl = slice(row, row + 3)
            A[sl, 6 * ia : 6 * ia + 3] = -a.R @ skew(h["pa"])
            A[sl, 6 * ia + 3 : 6 * ia + 6] = np.eye(3)
            A[sl, 6 * ib : 6 * ib + 3] = b.R @ skew(h["pb"])
            A[sl, 6 * ib + 3 : 6 * ib + 6] = -np.eye(3)
            gpos[sl] = (a.pos + a.R @ h["pa"]) - (b.pos + b.R @ h["pb"])
            gam[sl] = a.R @ _c3(a.omega, _c3(a.omega, h["pa"])) - (
                b.R @ _c3(b.omega, _c3(b.omega, h["pb"])))
            row += 3
            ea_w = a.R @ h["ea"]
            wa = _c3(a.omega, h["ea"])
            for nvec in (h["n1b"], h["n2b"]):
                n_w = b.R @ nvec
                wn = _c3(b.omega, nvec)
                A[row, 6 * ia : 6 * ia + 3] = -(n_w @ a.R) @ skew(h["ea"])
                A[row, 6 * ib : 6 * ib + 3] = -(ea_w @ b.R) @ skew(nvec)
                gpos[row] = ea_w @ n_w
                gam[row] = (
                    (a.R @ _c3(a.omega, wa)) @ n_w
                    + 2.0 * (a.R @ wa) @ (b.R @ wn)
                    + ea_w @ (b.R @ _c3(b.omega, wn))
                )
                row += 1

        qd = np.zeros(self.n_dyn)
        for bi, bs in enumerate(self.bodies):
            qd[6 * bi : 6 * bi + 3] = bs.omega
            qd[6 * bi + 3 : 6 * bi + 6] = bs.vel
        for ri, r in enumerate(self.robots):
            qd[6 * nb + 3 * ri : 6 * nb + 3 * ri + 3] = r.theta_dot

        out.A, out.gamma, out.gpos, out.at, out.f, out.qd = (
            A, gam, gpos, at, f, qd)
        out.wrist_base_vel = wrist_base_vel
        return out

    def _apply_minv(self, lean: _Lean, X: np.ndarray) -> np.ndarray:
        """M^-1 @ X for a vector or a matrix of column vectors."""
        nb = len(self.bodies)
        Y = np.empty_like(X)
        for bi, body in enumerate(self.payload.bodies if self.payload else []):
            Y[6 * bi : 6 * bi + 3] = self._Iinv[bi] @ X[6 * bi : 6 * bi + 3]
            Y[6 * bi + 3 : 6 * bi + 6] = X[6 * bi + 3 : 6 * bi + 6] / body.mass
        for ri in range(len(self.robots)):
            sl = slice(6 * nb + 3 * ri, 6 * nb + 3 * ri + 3)
            Y[sl] = lean.Mth_inv[ri] @ X[sl]
        return Y

    # -- dynamics ----------------------------------------------------------

    def _dynamics_step(self):
        dt = self.dt
        nb = len(self.bodies)
        R = len(self.robots)
        lean = self._assemble_lean()
        A, f = lean.A, lean.f

        if self.m_rows:
            vres = A @ lean.qd + lean.at
            bias = lean.gamma + 2.0 * BAUMGARTE_ZETA * BAUMGARTE_OMEGA * (
                vres) + (BAUMGARTE_OMEGA ** 2) * lean.gpos
            AM = self._apply_minv(lean, A.T).T
            W = AM @ A.T
            rhs = -(bias + AM @ f)
            try:
                lam = np.linalg.solve(W, rhs)
                if not np.all(np.isfinite(lam)):
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                lam = np.linalg.lstsq(
                    W + 1e-9 * np.eye(self.m_rows), rhs, rcond=None)[0]
                self._event("constraint_rank_deficient")
            f_tot = f + A.T @ lam
        else:
            vres = np.zeros(0)
            lam = np.zeros(0)
            f_tot = f
        qdd = self._apply_minv(lean, f_tot)
        self.lam = lam
        self._last_lean = lean

        # work bookkeeping (uses start-of-step velocities and loads)
        if self._grasps:
            wfb_rows = np.concatenate(
                [lean.wrist_base_vel[ri] for ri, _, _ in self._grasps])
            self.work_base += dt * float(
                lam[: 3 * len(self._grasps)] @ wfb_rows)
        if R:
            self.work_base += dt * lean.fict_power
        for target, point, force, moment, gvel in lean.humans:
            if isinstance(target, int):
                bs = self.bodies[target]
                w_w = bs.R @ bs.omega
                self.work_human += dt * float(force @ gvel + moment @ w_w)
            else:
                self.work_human += dt * float(force @ gvel)
        if lean.hinge_rate is not None and self.hinge_ref["damping"] > 0:
            self.work_damping += dt * self.hinge_ref["damping"] * (
                lean.hinge_rate ** 2)

        # integrate: velocities first, then positions (semi-implicit);
        # body rotation via world angular momentum
        for bi, bs in enumerate(self.bodies):
            body = self.payload.bodies[bi]
            wdot = qdd[6 * bi : 6 * bi + 3]
            m_app = body.inertia @ wdot + _c3(
                bs.omega, body.inertia @ bs.omega)
            L_body = body.inertia @ bs.omega + dt * m_app
            w_prov = self._Iinv[bi] @ L_body
            R_new = gram_schmidt(bs.R @ _rodrigues(w_prov, dt))
            bs.omega = self._Iinv[bi] @ (R_new.T @ (bs.R @ L_body))
            bs.R = R_new
            bs.vel = bs.vel + dt * qdd[6 * bi + 3 : 6 * bi + 6]
            bs.pos = bs.pos + dt * bs.vel

        if R:
            tau_m = np.stack([r.tau_motor for r in self.robots])
            bd = np.stack([r.beta_dot for r in self.robots])
            bdamp = np.array([r.spec.sea.motor_damping for r in self.robots])
            binert = np.array([r.spec.sea.motor_inertia for r in self.robots])
            bacc = (tau_m - bdamp[:, None] * bd - lean.spring) / binert[:, None]
            bd_new = bd + dt * bacc
            bd_mid = 0.5 * (bd + bd_new)
            self.work_motor += dt * float(np.sum(tau_m * bd_mid))
            self.work_damping += dt * float(
                np.sum(bdamp[:, None] * bd_mid * bd_mid))
            for ri, r in enumerate(self.robots):
                r.beta_dot = bd_new[ri]
                r.beta = r.beta + dt * r.beta_dot
                r.theta_dot = r.theta_dot + dt * qdd[
                    6 * nb + 3 * ri : 6 * nb + 3 * ri + 3]
                r.theta = r.theta + dt * r.theta_dot
                self._step_base_fast(ri, r, dt)

        if self.m_rows:
            pres = float(np.abs(lean.gpos).max())
            self.max_pos_residual = max(self.max_pos_residual, pres)
            self.max_vel_residual = max(
                self.max_vel_residual, float(np.abs(vres).max()))
            if pres > POS_RESIDUAL_FAULT:
                self.fault = "constraint residual exceeded"
                self._event("fault", detail=self.fault, residual=pres)
                raise SimulationFault(self.fault)

    def _step_base_fast(self, ri: int, r: RobotUnit, dt: float):
        """step_base with the command limiting and lag constants cached."""
        st = r.base
        decay = self._base_decay[ri]
        twist = r.V_lim + (st.twist - r.V_lim) * decay
        if r.spec.slip_gains is None:
            true_twist = twist
        else:
            from .mobase import twist_from_wheels, wheel_speeds
            enc = wheel_speeds(twist, r.spec.base)
            true_twist = twist_from_wheels(
                r.spec.slip_gains * enc, r.spec.base)
        from .mobase import _integrate_planar
        pose = _integrate_planar(st.pose, true_twist, dt)
        odom = _integrate_planar(st.odom_pose, twist, dt)
        st.pose = pose
        st.twist = twist
        st.odom_pose = odom

    # -- control ------------------------------------------------------------

    def payload_rotation_seen_by(self, ri: int):
        """Payload orientation reconstructed through the gimbal encoders.

        The returned rotation is extrapolated ahead by the controller's
        lead constant using the sensed relative rates, for the same reason
        the sampled spring terms are: a zero-order-held orientation in the
        share statics pumps payload rotation instead of leaving it neutral.
        """
        r = self.robots[ri]
        if r.attach is None:
            return None
        bs = self.bodies[r.attach[0]]
        Ry = base_rotation(r.base.pose[2])
        alpha, locked = gimbal_angles(Ry.T @ bs.R)
        if locked:
            alpha = r.alpha
        r.alpha = alpha
        r.gimbal_locked = locked
        R_now = Ry @ compose_gimbal(alpha)
        lead = r.controller.state.lead_s
        if lead > 0.0:
            w_w = bs.R @ bs.omega
            R_now = _rodrigues(w_w, lead) @ R_now
        return R_now

    def _control_tick(self):
        R = len(self.robots)
        kin_rows = None
        if R and any(r.hold_tau is None for r in self.robots):
            th, thd, plat, J, jdot_qd, xd = self._robot_kinematics()
            wrist = plat + self._zoff[:, None] * ZHAT
            # second batch at the lead-predicted angles for the torque map
            lead = np.array([r.controller.state.lead_s for r in self.robots])
            saved = [r.theta for r in self.robots]
            for ri, r in enumerate(self.robots):
                r.theta = saved[ri] + lead[ri] * r.theta_dot
            try:
                _, _, _, J_lead, _, _ = self._robot_kinematics()
            except SimulationFault:
                J_lead = J
            finally:
                for ri, r in enumerate(self.robots):
                    r.theta = saved[ri]
            kin_rows = (J, wrist, xd, J_lead)
        for ri, r in enumerate(self.robots):
            if r.hold_tau is not None:
                r.tau_cmd = r.hold_tau
                r.V_com = np.zeros(3)
                r.V_lim = np.zeros(3)
                continue
            R_pay = self.payload_rotation_seen_by(ri)
            log = r.controller.command(
                r.theta, r.theta_dot, R_pay, r.base.pose[2],
                base_twist=r.base.twist,
                base_accel=(r.V_lim - r.base.twist) * self._lag_f[ri],
                kin=(kin_rows[0][ri], kin_rows[1][ri], kin_rows[2][ri],
                     kin_rows[3][ri]))
            r.tau_cmd = log.tau
            r.f_com = log.f_com
            if log.clamped and not r.clamped:
                self.clamp_count += 1
                self._event("torque_clamped", robot=ri)
            r.clamped = log.clamped
            if log.reanchored:
                self._event("reanchored", robot=ri,
                            z0=float(r.controller.state.z0))
            if r.spec.recenter:
                x = kin_rows[1][ri]
                xr = kin_rows[2][ri]
                if R_pay is not None:
                    w_w = self.bodies[r.attach[0]].R @ self.bodies[
                        r.attach[0]].omega
                    az = r.alpha[2]
                    az_rate = w_w[2] - r.base.twist[2]
                else:
                    az, az_rate = 0.0, 0.0
                V = recentering_twist(
                    x[:2] - r.spec.delta.home_position[:2], az,
                    np.array([xr[0], xr[1], az_rate]), r.spec.base)
                # Yaw about the wrist, not the chassis center: add the
                # translation that cancels the wrist sweep of the commanded
                # yaw rate.  Yawing about an off-axis wrist drags the
                # payload around through the arm springs and turns the yaw
                # chase into positive feedback.
                V[0] += V[2] * x[1]
                V[1] -= V[2] * x[0]
                r.V_com = V
            else:
                r.V_com = np.zeros(3)
            r.V_lim = limit_twist(r.V_com, r.spec.base)

    def _sea_tick(self):
        for r in self.robots:
            p = r.spec.sea
            est = p.k * (r.beta - r.theta)
            tau_cmd = np.clip(r.tau_cmd, -p.tau_max, p.tau_max)
            err = tau_cmd - est
            r.pid_integ = r.pid_integ + err / p.rate
            if p.ki > 0:
                lim = p.motor_tau_max / p.ki
                np.clip(r.pid_integ, -lim, lim, out=r.pid_integ)
            d_meas = (est - r.pid_prev) * p.rate
            r.pid_prev = est
            tau_m = p.kp * err + p.ki * r.pid_integ - p.kd * d_meas
            r.tau_motor = np.clip(tau_m, -p.motor_tau_max, p.motor_tau_max)

    # -- stepping -----------------------------------------------------------

    def step(self, dt: float | None = None):
        """Advance one physics step (multi-rate controllers fire on cadence)."""
        if self.fault:
            raise SimulationFault(self.fault)
        if dt is not None and abs(dt - self.dt) > 1e-15:
            raise ValueError("dt must equal 1/physics_hz")
        if self.tick % self._ctrl_every == 0:
            self._control_tick()
            self._update_quiet()
        if self.tick % self._sea_every == 0:
            self._sea_tick()
        self._dynamics_step()
        self.tick += 1
        self.t = self.tick * self.dt

    def run(self, duration: float, callback=None):
        n = int(round(duration * self.physics_hz))
        for _ in range(n):
            self.step()
            if callback is not None:
                callback(self)

    def _update_quiet(self):
        vmax = 0.0
        for bs in self.bodies:
            vmax = max(vmax, float(np.abs(bs.vel).max()),
                       float(np.abs(bs.omega).max()))
        for r in self.robots:
            vmax = max(vmax, float(np.abs(r.theta_dot).max()))
        if vmax < 1e-4:
            self.quiet_time += 1.0 / self.control_hz
        else:
            self.quiet_time = 0.0

    def _event(self, kind: str, **fields):
        self.events.append({"tick": self.tick, "t": self.t, "kind": kind,
                            **fields})

    # -- queries ------------------------------------------------------------

    def hinge_angle(self) -> float | None:
        if self.hinge_ref is None:
            return None
        h = self.hinge_ref
        ia, ib = self.payload.hinge.body_a, self.payload.hinge.body_b
        a, b = self.bodies[ia], self.bodies[ib]
        u1 = a.R @ h["na"]
        u2 = b.R @ h["n1b"]
        axis_w = a.R @ h["ea"]
        return math.atan2(float(np.cross(u1, u2) @ axis_w), float(u1 @ u2))

    def wrist_positions(self) -> np.ndarray:
        out = np.zeros((len(self.robots), 3))
        for i, r in enumerate(self.robots):
            Ry = base_rotation(r.base.pose[2])
            h = _fk(r.theta, r.spec.delta, check_limits=False)
            out[i] = np.array([r.base.pose[0], r.base.pose[1], 0.0]) + Ry @ h
        return out

    def system_state(self) -> SystemState:
        poses = []
        if self.payload is not None:
            poses = [bs.pose(b.com_offset) for bs, b in
                     zip(self.bodies, self.payload.bodies)]
        stack3 = lambda xs: (np.stack(xs) if xs else np.zeros((0, 3)))
        return SystemState(
            payload_poses=poses,
            payload_omega=[bs.omega.copy() for bs in self.bodies],
            payload_vel=[bs.vel.copy() for bs in self.bodies],
            hinge_angle=self.hinge_angle(),
            base_poses=stack3([r.base.pose for r in self.robots]),
            theta=stack3([r.theta for r in self.robots]),
            theta_dot=stack3([r.theta_dot for r in self.robots]),
            beta=stack3([r.beta for r in self.robots]),
            beta_dot=stack3([r.beta_dot for r in self.robots]),
            t=self.t,
            tick=self.tick,
            quiet_time=self.quiet_time,
        )

    def energy(self) -> dict:
        """Kinetic, gravitational and spring energy of the dynamic system."""
        ke = 0.0
        pe = 0.0
        for bs, body in zip(self.bodies, self.payload.bodies
                            if self.payload else []):
            ke += 0.5 * float(bs.omega @ (body.inertia @ bs.omega))
            ke += 0.5 * body.mass * float(bs.vel @ bs.vel)
            pe += body.mass * self.gravity * bs.pos[2]
        spring = 0.0
        for r in self.robots:
            J = _jac(r.theta, r.spec.delta)
            Mth = np.diag(r.spec.manip.joint_inertia) + (
                r.spec.manip.wrist_mass * J.T @ J)
            ke += 0.5 * float(r.theta_dot @ (Mth @ r.theta_dot))
            ke += 0.5 * r.spec.sea.motor_inertia * float(
                r.beta_dot @ r.beta_dot)
            x = _fk(r.theta, r.spec.delta, check_limits=False)
            pe += r.spec.manip.wrist_mass * self.gravity * x[2]
            d = r.beta - r.theta
            spring += 0.5 * r.spec.sea.k * float(d @ d)
        return {"kinetic": ke, "potential": pe, "spring": spring,
                "total": ke + pe + spring,
                "work_in": self.work_motor + self.work_human + self.work_base,
                "dissipated": self.work_damping}


# -- public matrix-level operations ----------------------------------------


def assemble(world: World) -> SystemMatrices:
    """Full documented matrices over [payload | theta_r | beta_r] coordinates.

    M is block diagonal over bodies and joints; c carries the gyroscopic,
    manipulator Coriolis and viscous damping terms; p the gravity and SEA
    spring potential gradients.  S holds the abstract actuation channels
    (3 SEA joint torques acting on theta, then 3 base twist channels per
    robot).  The base channels are kinematic in this coordinate set so
    their columns are zero here; control_map realizes them with dynamic
    base coordinates for the manipulability analysis.
    """
    nb = len(world.bodies)
    R = len(world.robots)
    n = 6 * nb + 3 * R + 3 * R
    lean = world._assemble_lean()
    M = np.zeros((n, n))
    c = np.zeros(n)
    p = np.zeros(n)
    S = np.zeros((n, 6 * R))
    for bi, bs in enumerate(world.bodies):
        body = world.payload.bodies[bi]
        M[6 * bi : 6 * bi + 3, 6 * bi : 6 * bi + 3] = body.inertia
        M[6 * bi + 3 : 6 * bi + 6, 6 * bi + 3 : 6 * bi + 6] = (
            body.mass * np.eye(3))
        c[6 * bi : 6 * bi + 3] = np.cross(bs.omega, body.inertia @ bs.omega)
        p[6 * bi + 5] = body.mass * world.gravity
        # human loads and hinge damping enter through c with opposite sign
    if world.hinge_ref is not None and lean.hinge_rate is not None:
        h = world.hinge_ref
        ia, ib = world.payload.hinge.body_a, world.payload.hinge.body_b
        a, b = world.bodies[ia], world.bodies[ib]
        axis_w = a.R @ h["ea"]
        m_w = -h["damping"] * lean.hinge_rate * axis_w
        c[6 * ib : 6 * ib + 3] -= b.R.T @ m_w
        c[6 * ia : 6 * ia + 3] += a.R.T @ m_w
    for ri, r in enumerate(world.robots):
        o_t = 6 * nb + 3 * ri
        o_b = 6 * nb + 3 * R + 3 * ri
        M[o_t : o_t + 3, o_t : o_t + 3] = lean.Mth[ri]
        M[o_b : o_b + 3, o_b : o_b + 3] = (
            r.spec.sea.motor_inertia * np.eye(3))
        c[o_t : o_t + 3] = r.spec.manip.wrist_mass * (
            lean.J[ri].T @ lean.jdot_qd[ri])
        c[o_b : o_b + 3] = r.spec.sea.motor_damping * r.beta_dot
        spring = r.spec.sea.k * (r.beta - r.theta)
        p[o_t : o_t + 3] = -spring + lean.J[ri].T @ np.array(
            [0.0, 0.0, r.spec.manip.wrist_mass * world.gravity])
        p[o_b : o_b + 3] = spring
        S[o_t : o_t + 3, 6 * ri : 6 * ri + 3] = np.eye(3)
    m = world.m_rows
    A = np.zeros((m, n))
    A[:, : 6 * nb + 3 * R] = lean.A
    return SystemMatrices(
        M=M, c=c, p=p, S=S, A=A,
        gamma=lean.gamma.copy(),
        vel_residual=lean.A @ lean.qd + lean.at,
        pos_residual=lean.gpos.copy(),
    )


def constrained_accel(mats: SystemMatrices, u=None) -> tuple[np.ndarray, np.ndarray]:
    """Solve the stabilized KKT system for accelerations and multipliers.

    [[M, A^T], [A, 0]] [qdd; -lambda] = [S u - c - p; -(gamma + stabilization)]
    """
    n = mats.M.shape[0]
    m = mats.A.shape[0]
    u = np.zeros(mats.S.shape[1]) if u is None else np.asarray(u, dtype=float)
    rhs_f = mats.S @ u - mats.c - mats.p
    bias = mats.gamma + 2.0 * BAUMGARTE_ZETA * BAUMGARTE_OMEGA * (
        mats.vel_residual) + BAUMGARTE_OMEGA ** 2 * mats.pos_residual
    if m == 0:
        mats.lam = np.zeros(0)
        return np.linalg.solve(mats.M, rhs_f), mats.lam
    K = np.zeros((n + m, n + m))
    K[:n, :n] = mats.M
    K[:n, n:] = mats.A.T
    K[n:, :n] = mats.A
    rhs = np.concatenate((rhs_f, -bias))
    rank_flag = False
    sv = np.linalg.svd(mats.A, compute_uv=False)
    if sv[-1] < 1e-10 * max(sv[0], 1.0):
        rank_flag = True
        K[n:, n:] = -1e-9 * np.eye(m)
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    else:
        sol = np.linalg.solve(K, rhs)
    qdd = sol[:n]
    lam = -sol[n:]
    mats.lam = lam
    mats.rank_deficient = rank_flag
    return qdd, lam


def control_map(world: World, base_mass: float = 60.0,
                base_inertia: float = 2.5, locked_bases: bool = True):
    """Constraint-projected control-to-acceleration map F and its partition.

    F = M^-1 (I - A^T (A M^-1 A^T)^-1 A M^-1) S over the analysis
    coordinates [payload bodies | theta_r | base_r] with 6 actuation
    channels per robot (3 joint torques, then 3 base channels).  Motor
    coordinates are omitted: they are unconstrained and carry no actuation
    columns in this abstraction, so they cannot affect payload rows.

    With locked_bases (the default) the bases are the velocity sources the
    simulator implements: infinite impedance against the joint-torque
    channels, zero force-response columns for the base channels.  This is
    the map that matches brute-force finite differences of the stepper.
    The manipulability analysis instead gives the bases nominal planar
    dynamics (base_mass, base_inertia) so the base twist channels
    genuinely enter the actuation set; the rank of F_p is the same either
    way and invariant to the nominal values.

    Returns (F, F_p, F_r) with F_p the payload rows.
    """
    if locked_bases:
        base_mass = math.inf
        base_inertia = math.inf
    nb = len(world.bodies)
    R = len(world.robots)
    n = 6 * nb + 3 * R + 3 * R
    n_a = 6 * R
    lean = world._assemble_lean() if (R or nb) else None
    Minv = np.zeros((n, n))
    for bi, body in enumerate(world.payload.bodies if world.payload else []):
        Minv[6 * bi : 6 * bi + 3, 6 * bi : 6 * bi + 3] = world._Iinv[bi]
        Minv[6 * bi + 3 : 6 * bi + 6, 6 * bi + 3 : 6 * bi + 6] = (
            np.eye(3) / body.mass)
    S = np.zeros((n, n_a))
    for ri, r in enumerate(world.robots):
        o_t = 6 * nb + 3 * ri
        o_b = 6 * nb + 3 * R + 3 * ri
        Minv[o_t : o_t + 3, o_t : o_t + 3] = lean.Mth_inv[ri]
        if not locked_bases:
            Minv[o_b : o_b + 3, o_b : o_b + 3] = np.diag(
                [1.0 / base_mass, 1.0 / base_mass, 1.0 / base_inertia])
        S[o_t : o_t + 3, 6 * ri : 6 * ri + 3] = np.eye(3)
        S[o_b : o_b + 3, 6 * ri + 3 : 6 * ri + 6] = np.eye(3)
    m = world.m_rows
    A = np.zeros((m, n))
    if m:
        A[:, : 6 * nb + 3 * R] = lean.A
        row = 0
        for ri, bi, rel in world._grasps:
            Ry = lean.Ry[ri]
            o_b = 6 * nb + 3 * R + 3 * ri
            A[row : row + 3, o_b] = -Ry[:, 0]
            A[row : row + 3, o_b + 1] = -Ry[:, 1]
            A[row : row + 3, o_b + 2] = -np.cross(
                ZHAT, Ry @ lean.wrist_local[ri])
            row += 3
        AM = A @ Minv
        W = AM @ A.T
        try:
            X = np.linalg.solve(W, AM @ S)
        except np.linalg.LinAlgError:
            X = np.linalg.lstsq(W, AM @ S, rcond=None)[0]
        F = Minv @ (S - A.T @ X)
    else:
        F = Minv @ S
    F_p = F[: 6 * nb]
    F_r = F[6 * nb :]
    return F, F_p, F_r


def manipulability(world: World, tol: float = RANK_TOL) -> int:
    """Numerical rank of the payload rows of the control map."""
    _, F_p, _ = control_map(world, locked_bases=False)
    s = np.linalg.svd(F_p, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def step(world: World, dt: float | None = None) -> World:
    """Advance the world one physics step (spec-level entry point)."""
    world.step(dt)
    return world
