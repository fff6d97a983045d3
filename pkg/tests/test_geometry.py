"""
Tests for the Lie-group and matrix primitives.
"""
import os
import sys
import math
import unittest

import numpy as np
from scipy.spatial.transform import Rotation

# Add the project root to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.components.geometry import (
    Pose,
    azimuth,
    azimuths,
    canonical_to_kitti,
    hat,
    kitti_to_canonical,
    pose_compose,
    pose_inverse,
    project_3dof,
    psd_sqrt,
    rot_z,
    so3_exp,
    so3_left_jacobian_inverse,
    so3_log,
    vee,
)
from src.components.trajectory import relative_pose
from src.utils.errors import AngleNearPi, GimbalDegenerate, NotPSD


class TestSO3(unittest.TestCase):
    """Exponential and logarithm maps."""

    def setUp(self):
        """Set up a seeded generator."""
        self.rng = np.random.default_rng(7)

    def test_exp_log_roundtrip(self):
        """log(exp(w)) returns w for angles away from pi."""
        axes = self.rng.normal(size=(1000, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        omegas = axes * self.rng.uniform(0.0, 3.0, size=(1000, 1))
        recovered = so3_log(so3_exp(omegas))
        np.testing.assert_allclose(recovered, omegas, atol=1e-9)

    def test_exp_is_rotation(self):
        """Exponentials are orthonormal with unit determinant."""
        R = so3_exp(self.rng.normal(size=(100, 3)))
        np.testing.assert_allclose(np.swapaxes(R, 1, 2) @ R, np.broadcast_to(np.eye(3), R.shape), atol=1e-9)
        np.testing.assert_allclose(np.linalg.det(R), 1.0, atol=1e-9)

    def test_log_near_pi_raises(self):
        """A half-turn has no well-conditioned logarithm."""
        with self.assertRaises(AngleNearPi):
            so3_log(rot_z(math.pi))

    def test_hat_vee(self):
        """hat gives the cross-product matrix and vee inverts it."""
        a, b = self.rng.normal(size=3), self.rng.normal(size=3)
        np.testing.assert_allclose(hat(a) @ b, np.cross(a, b), atol=1e-12)
        np.testing.assert_allclose(vee(hat(a)), a, atol=1e-15)

    def test_left_jacobian_inverse(self):
        """log(exp(d) exp(phi)) is phi + Jl^-1(phi) d to first order."""
        for _ in range(20):
            phi = self.rng.normal(size=3)
            phi *= self.rng.uniform(0.0, 2.5) / np.linalg.norm(phi)
            d = 1e-6 * self.rng.normal(size=3)
            lhs = so3_log(so3_exp(d) @ so3_exp(phi))
            np.testing.assert_allclose(lhs, phi + so3_left_jacobian_inverse(phi) @ d, atol=1e-10)

    def test_left_jacobian_inverse_small_angle(self):
        """Near zero the inverse Jacobian tends to I - hat(phi) / 2."""
        phi = np.array([1e-8, -2e-8, 3e-8])
        np.testing.assert_allclose(so3_left_jacobian_inverse(phi), np.eye(3) - 0.5 * hat(phi), atol=1e-15)


class TestAzimuth(unittest.TestCase):
    """Azimuth extraction."""

    def setUp(self):
        """Set up a seeded generator."""
        self.rng = np.random.default_rng(11)

    def test_recovers_yaw(self):
        """Yaw of a z-y-x composition is returned regardless of pitch and roll."""
        yaw = self.rng.uniform(-math.pi + 1e-6, math.pi, 1000)
        pitch = self.rng.uniform(-1.4, 1.4, 1000)
        roll = self.rng.uniform(-math.pi, math.pi, 1000)
        R = Rotation.from_euler("ZYX", np.column_stack((yaw, pitch, roll))).as_matrix()
        np.testing.assert_allclose(azimuths(R), yaw, atol=1e-9)
        self.assertAlmostEqual(azimuth(R[0]), yaw[0], delta=1e-9)

    def test_range_upper_end(self):
        """Both +pi and -pi map to +pi."""
        self.assertAlmostEqual(azimuth(rot_z(math.pi)), math.pi, delta=1e-12)
        self.assertAlmostEqual(azimuth(rot_z(-math.pi)), math.pi, delta=1e-12)

    def test_gimbal_degenerate(self):
        """Pitch of 90 degrees leaves azimuth undefined."""
        R = Rotation.from_euler("ZYX", [0.3, math.pi / 2, 0.0]).as_matrix()
        with self.assertRaises(GimbalDegenerate):
            azimuth(R)


class TestPSDSqrt(unittest.TestCase):
    """Principal square root of PSD matrices."""

    def test_reconstruction(self):
        """S @ S reproduces random PSD matrices."""
        rng = np.random.default_rng(3)
        for _ in range(1000):
            A = rng.normal(size=(2, 2))
            M = A @ A.T
            S = psd_sqrt(M)
            np.testing.assert_allclose(S @ S, M, atol=1e-9)
            np.testing.assert_allclose(S, S.T, atol=1e-12)

    def test_singular_input(self):
        """Rank-deficient PSD input is accepted."""
        M = np.array([[4.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(psd_sqrt(M), np.diag([2.0, 0.0]), atol=1e-12)

    def test_negative_eigenvalue(self):
        """A clearly indefinite matrix is rejected."""
        with self.assertRaises(NotPSD):
            psd_sqrt(np.diag([1.0, -1.0]))

    def test_asymmetric(self):
        """Asymmetric input is rejected."""
        with self.assertRaises(NotPSD):
            psd_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestPose(unittest.TestCase):
    """Pose algebra and frame conversion."""

    def setUp(self):
        """Set up a random pose."""
        rng = np.random.default_rng(5)
        self.T = Pose(so3_exp(rng.normal(size=3)), rng.normal(size=3))

    def test_inverse(self):
        """A pose composed with its inverse is the identity."""
        I = self.T @ self.T.inverse()
        np.testing.assert_allclose(I.as_matrix(), np.eye(4), atol=1e-9)

    def test_compose_matches_matrices(self):
        """Composition equals the homogeneous matrix product."""
        U = Pose.from_xy_theta(1.0, -2.0, 0.4)
        np.testing.assert_allclose((self.T @ U).as_matrix(), self.T.as_matrix() @ U.as_matrix(), atol=1e-12)

    def test_group_laws(self):
        """Composition is associative, the identity is neutral and inverses cancel on both sides."""
        rng = np.random.default_rng(11)
        for _ in range(100):
            A, B, C = (Pose(so3_exp(rng.normal(size=3)), rng.normal(scale=10.0, size=3)) for _ in range(3))
            np.testing.assert_allclose(pose_compose(pose_compose(A, B), C).as_matrix(),
                                       pose_compose(A, pose_compose(B, C)).as_matrix(), atol=1e-9)
            np.testing.assert_allclose(pose_compose(A, Pose.identity()).as_matrix(), A.as_matrix(), atol=1e-15)
            np.testing.assert_allclose(pose_compose(Pose.identity(), A).as_matrix(), A.as_matrix(), atol=1e-15)
            np.testing.assert_allclose(pose_compose(pose_inverse(A), A).as_matrix(), np.eye(4), atol=1e-9)
            np.testing.assert_allclose(pose_compose(A, pose_inverse(A)).as_matrix(), np.eye(4), atol=1e-9)
            np.testing.assert_allclose(pose_inverse(pose_inverse(A)).as_matrix(), A.as_matrix(), atol=1e-12)

    def test_relative_pose_consistency(self):
        """rel(A, B) maps A onto B and inverts to rel(B, A)."""
        rng = np.random.default_rng(12)
        for _ in range(50):
            A, B = (Pose(so3_exp(rng.normal(size=3)), rng.normal(scale=10.0, size=3)) for _ in range(2))
            rel = relative_pose(A, B)
            np.testing.assert_allclose(pose_compose(A, rel).as_matrix(), B.as_matrix(), atol=1e-9)
            np.testing.assert_allclose(pose_inverse(rel).as_matrix(), relative_pose(B, A).as_matrix(), atol=1e-9)
            np.testing.assert_allclose(rel.as_matrix(), np.linalg.inv(A.as_matrix()) @ B.as_matrix(), atol=1e-9)

    def test_immutable(self):
        """Pose arrays are read-only."""
        with self.assertRaises(ValueError):
            self.T.translation[0] = 1.0

    def test_project_3dof(self):
        """Projection keeps x, y and azimuth."""
        x, y, theta = project_3dof(Pose.from_xy_theta(3.0, 4.0, 0.5, z=9.0))
        self.assertEqual((x, y), (3.0, 4.0))
        self.assertAlmostEqual(theta, 0.5, places=12)

    def test_kitti_axes(self):
        """Camera forward (z) becomes canonical forward (x), camera down becomes canonical -z."""
        _, t = kitti_to_canonical(np.eye(3), np.array([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(t, [1.0, 0.0, 0.0])
        _, t = kitti_to_canonical(np.eye(3), np.array([0.0, 1.0, 0.0]))
        np.testing.assert_allclose(t, [0.0, 0.0, -1.0])

    def test_kitti_roundtrip(self):
        """Converting to canonical and back is exact."""
        R, t = kitti_to_canonical(self.T.rotation, self.T.translation)
        R2, t2 = canonical_to_kitti(R, t)
        np.testing.assert_allclose(R2, self.T.rotation, atol=1e-15)
        np.testing.assert_allclose(t2, self.T.translation, atol=1e-15)


if __name__ == "__main__":
    unittest.main()
