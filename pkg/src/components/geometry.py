"""
Lie-group and matrix primitives shared by every component.

Canonical frame: world z is up, azimuth is the yaw of a z-y-x
(yaw-pitch-roll) decomposition. Dataset loaders convert at the boundary.
Functions accept a single 3-vector / 3x3 matrix or a leading batch axis.
"""
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from src.utils.errors import AngleNearPi, GimbalDegenerate, NotPSD

# KITTI camera axes (x right, y down, z forward) -> canonical (x forward, y left, z up)
KITTI_TO_CANONICAL = np.array([
    [0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
])

_LOG_TRACE_LIMIT = -1.0 + 1e-9
_GIMBAL_LIMIT = 1.0 - 1e-9


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector (batched over leading axes)."""
    v = np.asarray(v, dtype=float)
    h = np.zeros(v.shape[:-1] + (3, 3))
    h[..., 0, 1] = -v[..., 2]
    h[..., 0, 2] = v[..., 1]
    h[..., 1, 0] = v[..., 2]
    h[..., 1, 2] = -v[..., 0]
    h[..., 2, 0] = -v[..., 1]
    h[..., 2, 1] = v[..., 0]
    return h


def vee(h: np.ndarray) -> np.ndarray:
    """Inverse of hat."""
    h = np.asarray(h, dtype=float)
    return np.stack((h[..., 2, 1], h[..., 0, 2], h[..., 1, 0]), axis=-1)


def so3_exp(omega: np.ndarray) -> np.ndarray:
    """
    Exponential map so(3) -> SO(3) (Rodrigues).

    Args:
        omega: Rotation vector(s) in radians, shape (3,) or (N, 3)

    Returns:
        Rotation matrix, shape (3, 3) or (N, 3, 3)
    """
    return Rotation.from_rotvec(np.asarray(omega, dtype=float)).as_matrix()


def so3_log(R: np.ndarray) -> np.ndarray:
    """
    Logarithm map SO(3) -> so(3), returned as a rotation vector.

    Args:
        R: Rotation matrix, shape (3, 3) or (N, 3, 3)

    Returns:
        Rotation vector(s) in radians

    Raises:
        AngleNearPi: if any rotation angle is within 1e-9 (in trace) of pi
    """
    R = np.asarray(R, dtype=float)
    trace = np.trace(R, axis1=-2, axis2=-1)
    if np.any(trace <= _LOG_TRACE_LIMIT):
        raise AngleNearPi("Rotation logarithm is ill-conditioned for angles near pi")
    return Rotation.from_matrix(R).as_rotvec()


def so3_left_jacobian_inverse(phi: np.ndarray) -> np.ndarray:
    """
    Inverse left Jacobian of SO(3): log(exp(d) exp(phi)) ~ phi + Jl^-1(phi) d.

    Args:
        phi: Rotation vector(s), shape (3,) or (N, 3)

    Returns:
        Matrix/matrices of shape (3, 3) or (N, 3, 3)
    """
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi, axis=-1)
    K = hat(phi)
    small = theta < 1e-6
    safe = np.where(small, 1.0, theta)
    coeff = np.where(
        small,
        1.0 / 12.0 + theta ** 2 / 720.0,
        1.0 / safe ** 2 - (1.0 + np.cos(safe)) / (2.0 * safe * np.sin(safe)),
    )
    return np.eye(3) - 0.5 * K + coeff[..., None, None] * (K @ K)


def rot_z(theta: float) -> np.ndarray:
    """Rotation about the world z axis."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot2(theta: float) -> np.ndarray:
    """Planar 2x2 rotation."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _wrap_azimuth(angle):
    # atan2 can return -pi; the azimuth range is (-pi, pi]
    return np.where(angle <= -math.pi, math.pi, angle)


def azimuth(R: np.ndarray) -> float:
    """
    Yaw of the z-y-x decomposition of R.

    Args:
        R: Rotation matrix

    Returns:
        float: Azimuth in (-pi, pi]

    Raises:
        GimbalDegenerate: when pitch is within 1e-9 of +-90 degrees
    """
    R = np.asarray(R, dtype=float)
    if abs(R[2, 0]) > _GIMBAL_LIMIT:
        raise GimbalDegenerate("Azimuth undefined for pitch of +-90 degrees")
    return float(_wrap_azimuth(math.atan2(R[1, 0], R[0, 0])))


def azimuths(R: np.ndarray) -> np.ndarray:
    """Batched azimuth over an (N, 3, 3) stack."""
    R = np.asarray(R, dtype=float)
    if np.any(np.abs(R[:, 2, 0]) > _GIMBAL_LIMIT):
        raise GimbalDegenerate("Azimuth undefined for pitch of +-90 degrees")
    return _wrap_azimuth(np.arctan2(R[:, 1, 0], R[:, 0, 0]))


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """
    Principal square root of a symmetric positive semidefinite matrix.

    Args:
        M: Symmetric PSD matrix (typically 2x2 marginal covariance)

    Returns:
        Symmetric PSD matrix S with S @ S = M

    Raises:
        NotPSD: when M is not symmetric or has an eigenvalue below -1e-8
    """
    M = np.asarray(M, dtype=float)
    if np.max(np.abs(M - M.T)) > 1e-10:
        raise NotPSD("Matrix is not symmetric")
    eigvals, eigvecs = np.linalg.eigh(M)
    if eigvals.min() < -1e-8:
        raise NotPSD(f"Matrix has negative eigenvalue {eigvals.min():.3e}")
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def rotation_deviation(R: np.ndarray) -> float:
    """Largest elementwise deviation of R^T R from the identity."""
    R = np.asarray(R, dtype=float)
    return float(np.max(np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3))))


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Polar projection of a 3x3 matrix onto SO(3)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt))
    return U @ D @ Vt


def _frozen_array(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pose:
    """
    Rigid-body transform T = [R, t; 0, 1].
    """
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen_array(self.rotation, (3, 3)))
        object.__setattr__(self, "translation", _frozen_array(self.translation, (3,)))

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_xy_theta(cls, x: float, y: float, theta: float, z: float = 0.0) -> "Pose":
        return cls(rot_z(theta), [x, y, z])

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def __repr__(self) -> str:
        x, y, theta = project_3dof(self)
        return f"Pose(x={x:.3f}, y={y:.3f}, z={self.translation[2]:.3f}, azimuth={math.degrees(theta):.3f}deg)"


def pose_compose(A: Pose, B: Pose) -> Pose:
    """Homogeneous product A * B."""
    return A.compose(B)


def pose_inverse(A: Pose) -> Pose:
    """Homogeneous inverse of A."""
    return A.inverse()


def project_3dof(T: Pose) -> Tuple[float, float, float]:
    """
    Planar part of a pose: (x, y, azimuth); z, roll and pitch are dropped.
    """
    return float(T.translation[0]), float(T.translation[1]), azimuth(T.rotation)


def kitti_to_canonical(R: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Conjugate a camera-convention pose (or stack of poses) into the canonical frame."""
    P = KITTI_TO_CANONICAL
    return P @ R @ P.T, t @ P.T


def canonical_to_kitti(R: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of kitti_to_canonical."""
    P = KITTI_TO_CANONICAL
    return P.T @ R @ P, t @ P
