"""Delta parallel manipulator kinematics and wrist stiffness.

Geometry is reduced to an effective radius offset dr (base joint circle
minus platform circle), which is all a parallelogram-leg delta needs: the
wrist center sits at the intersection of three spheres of radius L2 whose
centers are the (virtually contracted) elbow points

    c_i = (dr + L1 cos(theta_i)) u_i + L1 sin(theta_i) z,   i = 0, 1, 2

with u_i the leg azimuth directions at 0, 120 and 240 degrees.  theta is
measured from the horizontal base plane, positive raising the elbow.  A
constant vertical offset z_off from the platform sphere-intersection point
to the gimbal center is added on top.

The numbers in `default_params` come from `calibrate`, which fits dr to the
vertical end-effector stiffness at home and z_off to the home height; see
that function for the procedure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Leg azimuth unit vectors (rows) and their 120 degree spacing.
LEG_AZIMUTH = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
LEG_U = np.column_stack((np.cos(LEG_AZIMUTH), np.sin(LEG_AZIMUTH), np.zeros(3)))
ZHAT = np.array([0.0, 0.0, 1.0])

SPHERE_DISC_TOL = 1e-10  # m^2, near-coincident intersection branches
DET_J_TOL = 1e-9


@dataclass
class DeltaParams:
    """Geometry and limits of one delta manipulator (SI units)."""

    L1: float = 0.200                  # proximal link length, m
    L2: float = 0.368                  # distal parallelogram length, m
    dr: float = 0.0                    # base circle minus platform circle, m
    z_off: float = 0.0                 # platform center to gimbal center, m
    theta_min: float = math.radians(-15.0)
    theta_max: float = math.radians(100.0)
    workspace_radius: float = 0.15     # inscribed sphere about home, m
    home_theta: float = math.radians(36.6)

    def __post_init__(self):
        if self.L1 <= 0 or self.L2 <= 0:
            raise ValueError("link lengths must be positive")
        if self.L2 <= abs(self.dr):
            raise ValueError("distal length must exceed |dr|")
        if not (self.theta_min < self.home_theta < self.theta_max):
            raise ValueError("home angle must lie inside the joint limits")

    @property
    def home_position(self) -> np.ndarray:
        th = np.full(3, self.home_theta)
        return fk(th, self, check_limits=False)


def elbow_points(theta: np.ndarray, params: DeltaParams) -> np.ndarray:
    """Effective sphere centers c_i, one row per leg."""
    theta = np.asarray(theta, dtype=float)
    radial = params.dr + params.L1 * np.cos(theta)
    return radial[:, None] * LEG_U + (params.L1 * np.sin(theta))[:, None] * ZHAT


def elbow_tangents(theta: np.ndarray, params: DeltaParams) -> np.ndarray:
    """d c_i / d theta_i, one row per leg."""
    theta = np.asarray(theta, dtype=float)
    return (
        (-params.L1 * np.sin(theta))[:, None] * LEG_U
        + (params.L1 * np.cos(theta))[:, None] * ZHAT
    )


def _check_limits(theta: np.ndarray, params: DeltaParams):
    if np.any(theta < params.theta_min - 1e-12) or np.any(
        theta > params.theta_max + 1e-12
    ):
        raise ValueError("joint limit violation")


def fk(theta, params: DeltaParams, check_limits: bool = True) -> np.ndarray:
    """Wrist/gimbal center position for proximal joint angles theta.

    Intersects the three leg spheres and keeps the upper (larger z)
    solution, then adds the platform-to-gimbal offset z_off.
    """
    theta = np.asarray(theta, dtype=float).reshape(3)
    if check_limits:
        _check_limits(theta, params)
    c = elbow_points(theta, params)

    # Trilateration in an orthonormal frame spanned by the center triangle.
    d21 = c[1] - c[0]
    d31 = c[2] - c[0]
    d = math.sqrt(d21 @ d21)
    if d < 1e-12:
        raise ValueError("kinematic singularity")
    ex = d21 / d
    i = ex @ d31
    ey_raw = d31 - i * ex
    ny = math.sqrt(ey_raw @ ey_raw)
    if ny < 1e-12:
        raise ValueError("kinematic singularity")
    ey = ey_raw / ny
    ez = np.array([ex[1] * ey[2] - ex[2] * ey[1],
                   ex[2] * ey[0] - ex[0] * ey[2],
                   ex[0] * ey[1] - ex[1] * ey[0]])

    # Equal radii L2: sphere pair differences give in-plane coordinates.
    px = 0.5 * d
    j = ey @ d31
    py = ((i * i + j * j) * 0.5 - i * px) / j
    disc = params.L2 ** 2 - px * px - py * py
    if disc < 0.0:
        raise ValueError("unreachable joint configuration")
    if disc < SPHERE_DISC_TOL:
        raise ValueError("kinematic singularity")
    pz = math.sqrt(disc)
    base = c[0] + px * ex + py * ey
    # Upper solution: pick the sign of the out-of-plane step with larger z.
    step = pz * ez if ez[2] >= 0.0 else -pz * ez
    x = base + step
    x[2] += params.z_off
    return x


def ik(x, params: DeltaParams, check_limits: bool = True) -> np.ndarray:
    """Joint angles for a wrist position, closed form per leg.

    Each leg yields two elbow solutions; the branch containing the home
    angle is kept, which is the operating branch everywhere inside the
    workspace sphere.
    """
    q = np.asarray(x, dtype=float).reshape(3).copy()
    q[2] -= params.z_off
    theta = np.empty(3)
    for leg in range(3):
        ca, sa = math.cos(LEG_AZIMUTH[leg]), math.sin(LEG_AZIMUTH[leg])
        a = ca * q[0] + sa * q[1] - params.dr   # radial offset from base joint
        t = -sa * q[0] + ca * q[1]              # out-of-plane component
        zz = q[2]
        rho = math.hypot(a, zz)
        rhs = (a * a + t * t + zz * zz + params.L1 ** 2 - params.L2 ** 2) / (
            2.0 * params.L1
        )
        if rho < 1e-12 or abs(rhs) > rho:
            raise ValueError("unreachable")
        phi0 = math.atan2(zz, a)
        dphi = math.acos(max(-1.0, min(1.0, rhs / rho)))
        cand = (phi0 - dphi, phi0 + dphi)
        # wrap both candidates near home before comparing
        best = min(
            cand,
            key=lambda th: abs(
                math.remainder(th - params.home_theta, 2.0 * math.pi)
            ),
        )
        theta[leg] = params.home_theta + math.remainder(
            best - params.home_theta, 2.0 * math.pi
        )
    if check_limits:
        _check_limits(theta, params)
    return theta


def jacobian(theta, params: DeltaParams) -> np.ndarray:
    """J = d fk / d theta via implicit differentiation of the leg spheres."""
    theta = np.asarray(theta, dtype=float).reshape(3)
    x = fk(theta, params, check_limits=False)
    x_plat = x - params.z_off * ZHAT
    c = elbow_points(theta, params)
    G = x_plat - c                       # rows: (x - c_i)
    dnum = np.einsum("ij,ij->i", G, elbow_tangents(theta, params))
    J = np.linalg.solve(G, np.diag(dnum))
    if abs(np.linalg.det(J)) < DET_J_TOL:
        raise ValueError("jacobian singular")
    return J


def wrist_stiffness(theta, k_joint: float, params: DeltaParams) -> np.ndarray:
    """Translational stiffness at the gimbal center: J^-T diag(k) J^-1."""
    J = jacobian(theta, params)
    Jinv = np.linalg.inv(J)
    K = Jinv.T @ (k_joint * np.eye(3)) @ Jinv
    return 0.5 * (K + K.T)


def workspace_clearance(x, params: DeltaParams) -> float:
    """Signed distance to the workspace-inscribed sphere about home (m).

    Positive inside the sphere, zero on it, negative outside.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    return params.workspace_radius - float(
        np.linalg.norm(x - params.home_position)
    )


def _kzz_home(dr: float, L1: float, L2: float, home_theta: float, k_joint: float):
    """Vertical wrist stiffness at the symmetric home configuration.

    At home the wrist sits on the axis: radial elbow distance
    rho = dr + L1 cos(th), vertical half-chord w = sqrt(L2^2 - rho^2), and
    each joint moves dtheta/dz = w / (L1 (rho sin th + w cos th)) for a pure
    vertical wrist displacement, giving K_zz = 3 k (dtheta/dz)^2.
    """
    c, s = math.cos(home_theta), math.sin(home_theta)
    rho = dr + L1 * c
    under = L2 * L2 - rho * rho
    if under <= 0.0:
        return None
    w = math.sqrt(under)
    denom = L1 * (rho * s + w * c)
    if abs(denom) < 1e-12:
        return None
    dth_dz = w / denom
    return 3.0 * k_joint * dth_dz * dth_dz


def calibrate(
    L1: float,
    L2: float,
    home_theta: float,
    home_z: float,
    K_zz_target: float,
    k_joint: float,
) -> tuple[float, float]:
    """Fit (dr, z_off) so the home stiffness and home height are matched.

    dr is found by bisection on K_zz(home; dr) = K_zz_target; z_off then
    absorbs whatever vertical offset is needed for fk(home) to land on
    home_z.  Raises if no root exists in the physically meaningful range.
    """
    lo, hi = -(L2 - L1) + 1e-6, (L2 - L1) - 1e-6

    def f(dr):
        kzz = _kzz_home(dr, L1, L2, home_theta, k_joint)
        return None if kzz is None else kzz - K_zz_target

    # Scan for a sign change, then bisect.
    n_scan = 256
    grid = np.linspace(lo, hi, n_scan)
    vals = [f(g) for g in grid]
    bracket = None
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa is None or fb is None:
            continue
        if fa == 0.0:
            bracket = (a, a)
            break
        if fa * fb < 0.0:
            bracket = (a, b)
            break
    if bracket is None:
        raise ValueError("calibration infeasible")
    a, b = bracket
    for _ in range(100):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm is None:
            raise ValueError("calibration infeasible")
        if f(a) * fm <= 0.0:
            b = mid
        else:
            a = mid
    dr = float(0.5 * (a + b))

    c, s = math.cos(home_theta), math.sin(home_theta)
    rho = dr + L1 * c
    z_plat = L1 * s + math.sqrt(L2 * L2 - rho * rho)
    z_off = float(home_z - z_plat)
    if not (math.isfinite(dr) and math.isfinite(z_off)):
        raise ValueError("calibration infeasible")
    return dr, z_off


# Frozen output of calibrate(0.200, 0.368, 36.6 deg, 0.420, 2000.0, 60.1);
# regenerated by tests to guard against drift.
CAL_DR = 0.11932376047743096
CAL_Z_OFF = 0.061825905392052405


def default_params() -> DeltaParams:
    """Calibrated manipulator geometry used by all shipped presets."""
    return DeltaParams(dr=CAL_DR, z_off=CAL_Z_OFF)
