"""Rigid-body transforms, twists/wrenches, adjoint maps and grasp stiffness.

6-vectors are ordered angular-above-linear: twists are (omega, v), wrenches
are (moment, force).  The adjoint of a pose T = (R, p) is

    Ad(T) = [[R,       0],
             [[p]x R,  R]]

so that twists transform as V_a = Ad(T_ab) V_b and stiffness matrices as
K_a = Ad(T_ab)^T K_b Ad(T_ab).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9


def skew(v) -> np.ndarray:
    """3x3 cross-product matrix: skew(v) @ u == cross(v, u)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def gram_schmidt(R: np.ndarray) -> np.ndarray:
    """Re-orthonormalize a drifting rotation matrix, column by column."""
    c0 = R[:, 0] / math.sqrt(R[0, 0] ** 2 + R[1, 0] ** 2 + R[2, 0] ** 2)
    c1 = R[:, 1] - (c0 @ R[:, 1]) * c0
    c1 /= math.sqrt(c1 @ c1)
    c2 = np.array([c0[1] * c1[2] - c0[2] * c1[1],
                   c0[2] * c1[0] - c0[0] * c1[2],
                   c0[0] * c1[1] - c0[1] * c1[0]])
    out = np.empty((3, 3))
    out[:, 0] = c0
    out[:, 1] = c1
    out[:, 2] = c2
    return out


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass
class Pose:
    """Rigid-body configuration: rotation matrix plus translation (m)."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise ValueError("Pose needs a 3x3 rotation and a 3-vector translation")

    def is_valid(self, tol: float = ORTHO_TOL) -> bool:
        R = self.rotation
        return (
            np.allclose(R.T @ R, np.eye(3), atol=tol)
            and abs(np.linalg.det(R) - 1.0) < 10 * tol
        )

    def renormalized(self) -> "Pose":
        return Pose(gram_schmidt(self.rotation), self.translation.copy())

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    @staticmethod
    def identity() -> "Pose":
        return Pose()


@dataclass
class Wrench:
    """Moment (N*m) and force (N) expressed in a named frame."""

    moment: np.ndarray
    force: np.ndarray
    frame: str = "world"

    def __post_init__(self):
        self.moment = np.asarray(self.moment, dtype=float).reshape(3)
        self.force = np.asarray(self.force, dtype=float).reshape(3)

    def __add__(self, other: "Wrench") -> "Wrench":
        if self.frame != other.frame:
            raise ValueError(
                f"wrench frames differ: {self.frame!r} vs {other.frame!r}"
            )
        return Wrench(self.moment + other.moment, self.force + other.force, self.frame)

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.moment, self.force))

    @staticmethod
    def zero(frame: str = "world") -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3), frame)


def adjoint(T: Pose) -> np.ndarray:
    """6x6 adjoint of a pose, angular block above linear."""
    ad = np.zeros((6, 6))
    R = T.rotation
    ad[:3, :3] = R
    ad[3:, 3:] = R
    ad[3:, :3] = skew(T.translation) @ R
    return ad


def check_stiffness(K: np.ndarray, tol_scale: float = 1e-8) -> np.ndarray:
    """Validate a 6x6 stiffness matrix: symmetric and PSD up to tolerance."""
    K = np.asarray(K, dtype=float)
    if K.shape != (6, 6):
        raise ValueError("stiffness matrix must be 6x6")
    if not np.allclose(K, K.T, atol=1e-9 * max(1.0, np.abs(K).max())):
        raise ValueError("stiffness matrix must be symmetric")
    w = np.linalg.eigvalsh(0.5 * (K + K.T))
    if w.min() < -tol_scale * max(w.max(), 1.0):
        raise ValueError("stiffness matrix must be positive semidefinite")
    return 0.5 * (K + K.T)


def linear_stiffness(K3: np.ndarray) -> np.ndarray:
    """Embed a 3x3 translational stiffness as a 6x6 with zero rotational block.

    This is the natural model for a wrist that transmits forces but no
    torques about its center: only the force/translation block is populated.
    """
    K = np.zeros((6, 6))
    K[3:, 3:] = np.asarray(K3, dtype=float)
    return K


def transform_stiffness(K_i: np.ndarray, T_ip: Pose) -> np.ndarray:
    """Express an end-effector stiffness in the payload frame.

    Returns Ad(T_ip)^T K_i Ad(T_ip), where T_ip is the payload pose relative
    to the end-effector frame carrying K_i.  Congruence preserves symmetry
    and semidefiniteness.
    """
    K_i = check_stiffness(K_i)
    ad = adjoint(T_ip)
    out = ad.T @ K_i @ ad
    return 0.5 * (out + out.T)


def aggregate_stiffness(grasps) -> np.ndarray:
    """Total payload-frame stiffness of a multi-grasp hold.

    grasps: iterable of (K_i, T_ip) pairs with a common payload frame.
    The result is the sum of the transformed per-grasp stiffnesses.
    """
    grasps = list(grasps)
    if not grasps:
        raise ValueError("no grasps")
    K = np.zeros((6, 6))
    for K_i, T_ip in grasps:
        K += transform_stiffness(K_i, T_ip)
    return 0.5 * (K + K.T)
