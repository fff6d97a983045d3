"""
Tests for pose files, covisibility lists and odometry edges.
"""
import os
import sys
import math
import tempfile
import unittest

import numpy as np

# Add the project root to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.components.geometry import Pose, so3_exp
from src.components.trajectory import (
    OdometryEdge,
    Trajectory,
    build_odometry_edges,
    load_covisibility,
    load_edge_poses,
    load_trajectory,
    relative_pose,
    save_covisibility,
    save_edge_poses,
    save_trajectory,
    vo_weights,
)
from src.utils.errors import (
    AllZeroCovisibility,
    DataError,
    EmptyEdgeSet,
    FrameOutOfRange,
    NonRigidPose,
    ParseError,
)


def random_trajectory(n: int, seed: int = 0) -> Trajectory:
    rng = np.random.default_rng(seed)
    return Trajectory(so3_exp(rng.normal(scale=0.5, size=(n, 3))), rng.normal(scale=10.0, size=(n, 3)))


class TestPoseFiles(unittest.TestCase):
    """Loading and saving pose files."""

    def setUp(self):
        """Create a scratch directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name
        self.traj = random_trajectory(12)

    def tearDown(self):
        """Remove the scratch directory."""
        self.tmp.cleanup()

    def _write(self, name, text):
        path = os.path.join(self.dir, name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return path

    def test_kitti_roundtrip(self):
        """KITTI files reproduce the canonical poses."""
        path = os.path.join(self.dir, "poses.txt")
        save_trajectory(self.traj, path, "kitti")
        loaded = load_trajectory(path, "kitti")
        np.testing.assert_allclose(loaded.rotations, self.traj.rotations, atol=1e-12)
        np.testing.assert_allclose(loaded.translations, self.traj.translations, atol=1e-12)

    def test_tum_roundtrip(self):
        """TUM files keep timestamps and poses."""
        traj = Trajectory(self.traj.rotations, self.traj.translations, np.arange(12) * 0.1)
        path = os.path.join(self.dir, "poses.tum")
        save_trajectory(traj, path, "tum")
        loaded = load_trajectory(path, "tum")
        np.testing.assert_allclose(loaded.timestamps, traj.timestamps)
        np.testing.assert_allclose(loaded.rotations, traj.rotations, atol=1e-12)
        np.testing.assert_allclose(loaded.translations, traj.translations, atol=1e-12)

    def test_comments_and_blank_lines(self):
        """Comment and blank lines are skipped."""
        row = "1 0 0 0 0 1 0 0 0 0 1 5"
        path = self._write("poses.txt", f"# header\n\n{row}\n{row}\n")
        self.assertEqual(len(load_trajectory(path)), 2)

    def test_parse_error_line_number(self):
        """A short line reports its 1-based line number."""
        path = self._write("poses.txt", "# header\n1 0 0 0 0 1 0 0 0 0 1\n")
        with self.assertRaises(ParseError) as ctx:
            load_trajectory(path)
        self.assertEqual(ctx.exception.line_number, 2)

    def test_non_finite_value(self):
        """NaN entries are parse errors."""
        path = self._write("poses.txt", "1 0 0 nan 0 1 0 0 0 0 1 0\n")
        with self.assertRaises(ParseError):
            load_trajectory(path)

    def test_non_rigid_rotation(self):
        """A rotation scaled by 1% is rejected."""
        path = self._write("poses.txt", "1.01 0 0 0 0 1.01 0 0 0 0 1.01 0\n")
        with self.assertRaises(NonRigidPose):
            load_trajectory(path)

    def test_slightly_non_rigid_is_renormalised(self):
        """Small deviations are projected back onto SO(3)."""
        path = self._write("poses.txt", "1.00001 0 0 0 0 1 0 0 0 0 1 0\n")
        R = load_trajectory(path).rotations[0]
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)

    def test_frame_out_of_range(self):
        """Indexing past the end raises FrameOutOfRange."""
        with self.assertRaises(FrameOutOfRange):
            self.traj[12]

    def test_covisibility_roundtrip(self):
        """Covisibility lists survive a save/load cycle."""
        counts = {(0, 1): 120, (1, 2): 80, (0, 5): 10}
        path = os.path.join(self.dir, "covis.txt")
        save_covisibility(counts, path)
        self.assertEqual(load_covisibility(path), counts)

    def test_covisibility_rejects_bad_order(self):
        """i must be smaller than j."""
        path = self._write("covis.txt", "3 2 10\n")
        with self.assertRaises(ParseError):
            load_covisibility(path)

    def test_edge_poses_roundtrip(self):
        """Loop-closure poses survive a save/load cycle in KITTI axes."""
        edges = {(0, 7): relative_pose(self.traj[0], self.traj[7])}
        path = os.path.join(self.dir, "loops.txt")
        save_edge_poses(edges, path, "kitti")
        loaded = load_edge_poses(path, "kitti")
        np.testing.assert_allclose(loaded[(0, 7)].as_matrix(), edges[(0, 7)].as_matrix(), atol=1e-12)


class TestEdges(unittest.TestCase):
    """Odometry edges and their weights."""

    def setUp(self):
        """Create a short trajectory."""
        self.traj = random_trajectory(5, seed=2)

    def test_relative_pose(self):
        """T_i * rel(T_i, T_j) = T_j."""
        rel = relative_pose(self.traj[1], self.traj[3])
        np.testing.assert_allclose((self.traj[1] @ rel).as_matrix(), self.traj[3].as_matrix(), atol=1e-9)

    def test_vo_weights(self):
        """Weights are sqrt(N) over the mean sqrt(N)."""
        edges = [OdometryEdge(0, 1, Pose(), covis_count=100), OdometryEdge(1, 2, Pose(), covis_count=400)]
        weighted = vo_weights(edges)
        self.assertAlmostEqual(weighted[0].weight, 2.0 / 3.0)
        self.assertAlmostEqual(weighted[1].weight, 4.0 / 3.0)
        self.assertAlmostEqual(np.mean([e.weight for e in weighted]), 1.0)

    def test_vo_weights_ignore_count_scale(self):
        """Multiplying every covisibility count by a positive constant leaves the weights unchanged."""
        rng = np.random.default_rng(21)
        counts = rng.integers(1, 500, size=30)
        edges = [OdometryEdge(k, k + 1, Pose(), covis_count=float(n)) for k, n in enumerate(counts)]
        reference = np.array([e.weight for e in vo_weights(edges)])
        for factor in (1e-3, 0.5, 7.0, 1e6):
            scaled = [OdometryEdge(e.i, e.j, e.relative_pose, covis_count=factor * e.covis_count) for e in edges]
            np.testing.assert_allclose([e.weight for e in vo_weights(scaled)], reference, rtol=1e-12)

    def test_vo_weights_errors(self):
        """Empty and all-zero inputs are rejected."""
        with self.assertRaises(EmptyEdgeSet):
            vo_weights([])
        with self.assertRaises(AllZeroCovisibility):
            vo_weights([OdometryEdge(0, 1, Pose(), covis_count=0)])

    def test_consecutive_edges(self):
        """One edge per consecutive pair carrying the relative pose."""
        edges = build_odometry_edges(self.traj, {(0, 1): 4, (1, 2): 4, (2, 3): 4, (3, 4): 4})
        self.assertEqual([(e.i, e.j) for e in edges], [(0, 1), (1, 2), (2, 3), (3, 4)])
        for e in edges:
            self.assertAlmostEqual(e.weight, 1.0)
            expected = relative_pose(self.traj[e.i], self.traj[e.j])
            np.testing.assert_allclose(e.relative_pose.as_matrix(), expected.as_matrix(), atol=1e-12)

    def test_missing_count_gets_median(self):
        """Consecutive pairs absent from the list use the median count."""
        edges = build_odometry_edges(self.traj, {(0, 1): 1, (1, 2): 9, (2, 3): 100})
        self.assertEqual(edges[3].covis_count, 9.0)

    def test_no_covisibility_unit_weights(self):
        """Without covisibility every weight is one."""
        edges = build_odometry_edges(self.traj)
        self.assertTrue(all(e.weight == 1.0 for e in edges))

    def test_loop_closure(self):
        """Loop edges are appended after the consecutive ones."""
        loop = {(0, 4): relative_pose(self.traj[0], self.traj[4])}
        edges = build_odometry_edges(self.traj, {(0, 1): 4, (0, 4): 4}, loop)
        self.assertEqual((edges[-1].i, edges[-1].j), (0, 4))
        self.assertTrue(edges[-1].is_loop)

    def test_loop_without_pose(self):
        """A non-consecutive covisibility entry needs a loop pose."""
        with self.assertRaises(DataError):
            build_odometry_edges(self.traj, {(0, 1): 4, (0, 3): 4})

    def test_edge_beyond_trajectory(self):
        """Edges must reference existing frames."""
        with self.assertRaises(FrameOutOfRange):
            build_odometry_edges(self.traj, {(3, 9): 4})

    def test_relative_poses_rebuild_chain(self):
        """Chaining consecutive relative poses rebuilds the trajectory."""
        T = self.traj[0]
        for rel in self.traj.relative_poses():
            T = T @ rel
        np.testing.assert_allclose(T.as_matrix(), self.traj[4].as_matrix(), atol=1e-9)
        self.assertTrue(math.isfinite(T.translation[0]))


if __name__ == "__main__":
    unittest.main()
