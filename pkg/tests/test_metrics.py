"""
Tests for trajectory alignment and error statistics.
"""
import os
import sys
import math
import unittest

import numpy as np

# Add the project root to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.components.geometry import Pose, so3_exp
from src.components.metrics import (
    ErrorSummary,
    ablation_table,
    align_horn,
    align_origin,
    body_frame_stats,
    evaluate_trajectory,
    pose_errors,
    prediction_accuracy,
)
from src.components.trajectory import Trajectory
from src.utils.errors import DegenerateGeometry, LengthMismatch


def transform(traj: Trajectory, S: Pose) -> Trajectory:
    return Trajectory.from_poses([S @ T for T in traj])


class TestAlignment(unittest.TestCase):
    """Origin and Horn alignment."""

    def setUp(self):
        """Set up a non-collinear trajectory and a rigid transform."""
        rng = np.random.default_rng(8)
        self.est = Trajectory(so3_exp(rng.normal(scale=0.2, size=(50, 3))), rng.normal(scale=20.0, size=(50, 3)))
        self.S = Pose(so3_exp([0.3, -0.2, 1.1]), [100.0, -50.0, 3.0])
        self.gt = transform(self.est, self.S)

    def test_horn_recovers_transform(self):
        """Horn alignment returns the generating transform."""
        S = align_horn(self.est, self.gt).S
        np.testing.assert_allclose(S.rotation, self.S.rotation, atol=1e-9)
        np.testing.assert_allclose(S.translation, self.S.translation, atol=1e-9)

    def test_horn_zero_error(self):
        """After Horn alignment an exact copy has zero error."""
        theta, t2d = pose_errors(self.est, self.gt, align_horn(self.est, self.gt).S)
        np.testing.assert_allclose(t2d, 0.0, atol=1e-9)
        np.testing.assert_allclose(theta, 0.0, atol=1e-7)

    def test_origin_zeroes_first_frame(self):
        """Origin alignment leaves no error at frame 0."""
        noisy = Trajectory(self.est.rotations, self.est.translations + 0.5)
        theta, t2d = pose_errors(noisy, self.gt, align_origin(noisy, self.gt).S)
        self.assertAlmostEqual(t2d[0], 0.0, places=9)
        self.assertAlmostEqual(theta[0], 0.0, places=7)

    def test_collinear_positions(self):
        """A straight line does not determine the rotation about itself."""
        line = Trajectory.from_poses([Pose.from_xy_theta(float(k), 0.0, 0.0) for k in range(10)])
        with self.assertRaises(DegenerateGeometry):
            align_horn(line, line)

    def test_length_mismatch(self):
        """Trajectories must be index-aligned."""
        with self.assertRaises(LengthMismatch):
            align_origin(self.est, Trajectory(self.gt.rotations[:10], self.gt.translations[:10]))


class TestAlignmentProperties(unittest.TestCase):
    """Optimality and frame independence of the evaluation."""

    def setUp(self):
        """Set up a noisy copy of a transformed trajectory."""
        rng = np.random.default_rng(17)
        self.rng = rng
        self.est = Trajectory(so3_exp(rng.normal(scale=0.3, size=(60, 3))), rng.normal(scale=15.0, size=(60, 3)))
        S = Pose(so3_exp([0.1, 0.05, -0.7]), [-20.0, 8.0, 1.0])
        noisy = [Pose(so3_exp(rng.normal(scale=0.02, size=3)) @ T.rotation, T.translation + rng.normal(scale=0.5, size=3))
                 for T in transform(self.est, S)]
        self.gt = Trajectory.from_poses(noisy)

    @staticmethod
    def _sse(S: Pose, est: Trajectory, gt: Trajectory) -> float:
        moved = est.translations @ S.rotation.T + S.translation
        return float(((moved - gt.translations) ** 2).sum())

    def test_horn_is_global_minimum(self):
        """No rigid perturbation of the Horn transform lowers the position error."""
        S = align_horn(self.est, self.gt).S
        best = self._sse(S, self.est, self.gt)
        for scale in (1e-4, 1e-2, 1.0):
            for _ in range(100):
                P = Pose(so3_exp(self.rng.normal(scale=scale, size=3)), self.rng.normal(scale=10.0 * scale, size=3))
                self.assertGreaterEqual(self._sse(P @ S, self.est, self.gt), best - 1e-9 * max(best, 1.0))

    def test_errors_invariant_under_common_transform(self):
        """Moving estimate and ground truth by the same rigid transform leaves every error unchanged."""
        G = Pose(so3_exp([0.4, -0.3, 2.0]), [500.0, -120.0, 30.0])
        moved_est, moved_gt = transform(self.est, G), transform(self.gt, G)
        for method in ("origin", "horn"):
            before = evaluate_trajectory(self.est, self.gt, method)
            after = evaluate_trajectory(moved_est, moved_gt, method)
            np.testing.assert_allclose(after.theta_err, before.theta_err, atol=1e-9)
            np.testing.assert_allclose(after.t2d_err, before.t2d_err, atol=1e-9)
            np.testing.assert_allclose(after.longitudinal, before.longitudinal, atol=1e-9)
            np.testing.assert_allclose(after.lateral, before.lateral, atol=1e-9)


class TestErrors(unittest.TestCase):
    """Hand-computed error cases."""

    def setUp(self):
        """Two ground-truth poses; the second estimate is off by (3, 4, 0) in the body frame."""
        self.gt = Trajectory.from_poses([Pose(), Pose.from_xy_theta(10.0, 0.0, math.pi / 2)])
        offset = self.gt[1] @ Pose(np.eye(3), [3.0, 4.0, 0.0])
        self.est = Trajectory.from_poses([Pose(), offset])

    def test_two_pose_case(self):
        """A (3, 4, 0) body-frame offset is a 5 m 2D error."""
        report = evaluate_trajectory(self.est, self.gt, "origin")
        np.testing.assert_allclose(report.t2d_err, [0.0, 5.0], atol=1e-12)
        self.assertAlmostEqual(report.t2d.mean, 2.5)
        self.assertAlmostEqual(report.t2d.rmse, math.sqrt(12.5))
        self.assertAlmostEqual(report.theta.mean, 0.0)

    def test_longitudinal_lateral_split(self):
        """Body-frame components are reported separately."""
        stats = body_frame_stats(self.est, self.gt, Pose())
        self.assertAlmostEqual(stats.longitudinal_mean, 1.5)
        self.assertAlmostEqual(stats.lateral_mean, 2.0)
        self.assertAlmostEqual(stats.longitudinal_pct, 50.0)
        self.assertAlmostEqual(stats.azimuth_pct, 100.0)

    def test_error_summary(self):
        """Mean, median and RMSE of a small sample."""
        summary = ErrorSummary.of(np.array([1.0, 2.0, 6.0]))
        self.assertAlmostEqual(summary.mean, 3.0)
        self.assertAlmostEqual(summary.median, 2.0)
        self.assertAlmostEqual(summary.rmse, math.sqrt(41.0 / 3.0))

    def test_prediction_accuracy(self):
        """Exact claims are perfectly accurate; shifted claims are scored in the body frame."""
        exact = prediction_accuracy({1: self.gt[1]}, self.gt)
        self.assertEqual(exact.longitudinal_pct, 100.0)
        shifted = prediction_accuracy({1: self.est[1]}, self.gt)
        self.assertAlmostEqual(shifted.longitudinal_mean, 3.0)
        self.assertAlmostEqual(shifted.lateral_mean, 4.0)
        self.assertEqual(shifted.lateral_pct, 0.0)

    def test_ablation_table(self):
        """One report per named trajectory."""
        reports = ablation_table({"a": self.est, "b": self.gt}, self.gt)
        self.assertEqual(set(reports), {"a", "b"})
        self.assertAlmostEqual(reports["b"].t2d.rmse, 0.0)


if __name__ == "__main__":
    unittest.main()
