"""Rigid-body transforms: unit quaternions, rotation vectors, SE(3) poses.

Conventions used across the package:
  - quaternions are (w, x, y, z), unit norm, float64
  - PoseSE3 maps local points into the parent frame: x_parent = R @ x_local + t
  - camera poses are camera-to-world with x right, y down, z forward
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise ValueError("zero quaternion")
    q = q / n
    # canonical sign keeps serialization deterministic
    if q[0] < 0.0:
        q = -q
    return q


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_premul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a composed with each row of b, for a batch b of shape (N, 4)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=1,
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rot_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (Shepperd's method, numerically safe)."""
    R = np.asarray(R, dtype=np.float64)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    return quat_normalize(q)


def quat_from_yaw(yaw: float) -> np.ndarray:
    return np.array([np.cos(yaw / 2.0), 0.0, 0.0, np.sin(yaw / 2.0)])


def yaw_from_quat(q: np.ndarray) -> float:
    R = quat_to_rot(q)
    return float(np.arctan2(R[1, 0], R[0, 0]))


def rotvec_to_quat(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    angle = float(np.linalg.norm(v))
    if angle < 1e-12:
        # first-order expansion keeps exp/log invertible near identity
        return quat_normalize(np.array([1.0, v[0] / 2.0, v[1] / 2.0, v[2] / 2.0]))
    axis = v / angle
    return np.concatenate([[np.cos(angle / 2.0)], np.sin(angle / 2.0) * axis])


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    q = quat_normalize(q)
    w = min(1.0, max(-1.0, float(q[0])))
    s = float(np.linalg.norm(q[1:]))
    if s < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(s, w)
    return (angle / s) * q[1:]


@dataclass
class PoseSE3:
    """Rigid transform; composition is `a @ b` with (a @ b)(x) == a(b(x))."""

    q: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        self.q = quat_normalize(np.asarray(self.q, dtype=np.float64))
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3).copy()

    @staticmethod
    def identity() -> "PoseSE3":
        return PoseSE3()

    @staticmethod
    def from_matrix(T: np.ndarray) -> "PoseSE3":
        T = np.asarray(T, dtype=np.float64)
        return PoseSE3(rot_to_quat(T[:3, :3]), T[:3, 3])

    @staticmethod
    def from_rt(R: np.ndarray, t: np.ndarray) -> "PoseSE3":
        return PoseSE3(rot_to_quat(R), t)

    @staticmethod
    def from_twist(xi: np.ndarray) -> "PoseSE3":
        """6-vector (rotation-vector, translation) -> pose. Not the screw exponential:
        translation is applied directly, which is what the pose optimizer perturbs."""
        xi = np.asarray(xi, dtype=np.float64).reshape(6)
        return PoseSE3(rotvec_to_quat(xi[:3]), xi[3:])

    def to_twist(self) -> np.ndarray:
        return np.concatenate([quat_to_rotvec(self.q), self.t])

    @property
    def R(self) -> np.ndarray:
        return quat_to_rot(self.q)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.t
        return T

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.R.T + self.t

    def rotate(self, vecs: np.ndarray) -> np.ndarray:
        return np.asarray(vecs, dtype=np.float64) @ self.R.T

    def inverse(self) -> "PoseSE3":
        qc = quat_conj(self.q)
        return PoseSE3(qc, -(quat_to_rot(qc) @ self.t))

    def __matmul__(self, other: "PoseSE3") -> "PoseSE3":
        return PoseSE3(quat_mul(self.q, other.q), self.R @ other.t + self.t)

    def rotation_angle_to(self, other: "PoseSE3") -> float:
        """Geodesic rotation distance in radians."""
        dq = quat_mul(quat_conj(self.q), other.q)
        return float(np.linalg.norm(quat_to_rotvec(dq)))

    def translation_distance_to(self, other: "PoseSE3") -> float:
        return float(np.linalg.norm(self.t - other.t))


def camera_pose(x: float, y: float, z: float, yaw: float) -> PoseSE3:
    """Camera-to-world pose for an upright camera at (x, y, z) looking along yaw.

    World z is up. Camera axes: x right, y down, z forward; image up is world up.
    """
    fwd = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    down = np.array([0.0, 0.0, -1.0])
    right = np.cross(down, fwd)
    R = np.stack([right, down, fwd], axis=1)
    return PoseSE3.from_rt(R, np.array([x, y, z]))
