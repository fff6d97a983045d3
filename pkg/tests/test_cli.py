"""
End-to-end tests of the command line through dispatch().
"""
import os
import sys
import csv
import tempfile
import unittest

import numpy as np

# Add the project root to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.components.formatter import load_scales
from src.components.trajectory import load_trajectory
from src.main import EXIT_DATA, EXIT_OK, EXIT_USAGE, dispatch
from src.utils.path_utils import file_digest
from src.utils.run_manifest import load_manifest

NOISELESS_CONFIG = """\
[scenario]
odom_rot_noise = 0
odom_trans_noise = 0
scale_walk_std = 0

[oracle]
sigma_x = 0
sigma_y = 0
sigma_theta = 0
outlier_rate = 0
"""


class TestCLI(unittest.TestCase):
    """simulate -> fuse / select -> evaluate / plot."""

    def setUp(self):
        """Simulate a short scenario into a scratch directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.data = os.path.join(self.tmp.name, "data")
        code = dispatch(["simulate", "--preset", "synthetic", "--path", "arc", "--length", "60",
                         "--seed", "4", "--out", self.data])
        self.assertEqual(code, EXIT_OK)

    def tearDown(self):
        """Remove the scratch directory."""
        self.tmp.cleanup()

    def _out(self, name: str) -> str:
        return os.path.join(self.tmp.name, name)

    def _fuse(self, out: str, *extra: str) -> int:
        return dispatch(["fuse", "--preset", "synthetic", "--data", self.data, "--provider", "file",
                         "--out", out, *extra])

    def test_simulate_outputs(self):
        """The scenario files and a manifest are written."""
        for name in ("gt.txt", "slam.txt", "covis.txt", "g2s_predictions.txt", "g2s_queries.txt"):
            self.assertTrue(os.path.isfile(os.path.join(self.data, name)), name)
        manifest = load_manifest(os.path.join(self.data, "manifest.json"))
        self.assertEqual(manifest.command, "simulate")
        self.assertEqual(manifest.seed, 4)
        self.assertEqual(manifest.exit_code, 0)
        self.assertIn(os.path.abspath(os.path.join(self.data, "slam.txt")), manifest.outputs)

    def test_fuse(self):
        """Fusion writes the trajectory, scales, run log and a manifest with input digests."""
        out = self._out("fused")
        self.assertEqual(self._fuse(out), EXIT_OK)
        for name in ("fused.txt", "scales.txt", "run_log.jsonl", "manifest.json"):
            self.assertTrue(os.path.isfile(os.path.join(out, name)), name)

        slam_path = os.path.abspath(os.path.join(self.data, "slam.txt"))
        manifest = load_manifest(os.path.join(out, "manifest.json"))
        self.assertEqual(manifest.input_digests[slam_path], file_digest(slam_path))
        self.assertEqual(manifest.config["provider"], "file")
        n = len(load_trajectory(os.path.join(self.data, "slam.txt")))
        self.assertEqual(len(load_scales(os.path.join(out, "scales.txt"))), n)

    def test_fuse_no_scale(self):
        """The no_scale mode keeps every scale at one."""
        out = self._out("no_scale")
        self.assertEqual(self._fuse(out, "--mode", "no_scale"), EXIT_OK)
        np.testing.assert_array_equal(load_scales(os.path.join(out, "scales.txt")), 1.0)

    def test_fuse_deterministic(self):
        """Two runs on the same inputs write identical trajectories."""
        a, b = self._out("a"), self._out("b")
        self.assertEqual(self._fuse(a), EXIT_OK)
        self.assertEqual(self._fuse(b), EXIT_OK)
        with open(os.path.join(a, "fused.txt"), 'rb') as fa, open(os.path.join(b, "fused.txt"), 'rb') as fb:
            self.assertEqual(fa.read(), fb.read())

    def test_evaluate_and_plot(self):
        """Evaluation writes per-frame errors and a report; plotting writes the figure series."""
        fused = self._out("fused")
        self.assertEqual(self._fuse(fused), EXIT_OK)
        gt = os.path.join(self.data, "gt.txt")
        est = os.path.join(fused, "fused.txt")

        report = self._out("report")
        code = dispatch(["evaluate", "--est", est, "--gt", gt, "--predictions",
                         os.path.join(self.data, "g2s_predictions.txt"), "--out", report])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.isfile(os.path.join(report, "errors_origin.csv")))
        with open(os.path.join(report, "report.txt"), 'r', encoding='utf-8') as f:
            self.assertIn("G2S claims", f.read())

        plots = self._out("plots")
        code = dispatch(["plot", "--gt", gt, "--est", f"fused={est}",
                         "--est", f"slam={os.path.join(self.data, 'slam.txt')}", "--out", plots])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.isfile(os.path.join(plots, "trajectories.svg")))

    def test_ablate(self):
        """The ablation table lists the SLAM input and each requested mode."""
        out = self._out("ablation")
        code = dispatch(["ablate", "--preset", "synthetic", "--data", self.data, "--provider", "file",
                         "--modes", "full", "all_g2s", "--out", out])
        self.assertEqual(code, EXIT_OK)
        with open(os.path.join(out, "ablation.csv"), 'r', newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        self.assertEqual([r["mode"] for r in rows], ["slam", "full", "all_g2s"])
        self.assertTrue(all(r["aborted"] == "0" for r in rows))

    def test_usage_errors(self):
        """Bad command lines exit with status 1."""
        self.assertEqual(dispatch([]), EXIT_USAGE)
        self.assertEqual(dispatch(["fuse", "--data", self.data]), EXIT_USAGE)
        self.assertEqual(dispatch(["teleport", "--out", self._out("x")]), EXIT_USAGE)
        self.assertEqual(dispatch(["fuse", "--out", self._out("noslam")]), EXIT_USAGE)

    def test_missing_input(self):
        """An unreadable input file is a data error."""
        out = self._out("missing")
        code = dispatch(["fuse", "--slam", os.path.join(self.tmp.name, "nope.txt"),
                         "--gt", os.path.join(self.data, "gt.txt"), "--out", out])
        self.assertEqual(code, EXIT_DATA)
        self.assertEqual(load_manifest(os.path.join(out, "manifest.json")).exit_code, EXIT_DATA)


class TestNoiselessSelect(unittest.TestCase):
    """Selection on exact inputs."""

    def setUp(self):
        """Simulate a noiseless scenario with exact predictions."""
        self.tmp = tempfile.TemporaryDirectory()
        self.config = os.path.join(self.tmp.name, "noiseless.ini")
        with open(self.config, 'w', encoding='utf-8') as f:
            f.write(NOISELESS_CONFIG)
        self.data = os.path.join(self.tmp.name, "data")
        code = dispatch(["simulate", "--preset", "synthetic", "--config", self.config, "--path", "arc",
                         "--length", "50", "--out", self.data])
        self.assertEqual(code, EXIT_OK)

    def tearDown(self):
        """Remove the scratch directory."""
        self.tmp.cleanup()

    def test_everything_selected(self):
        """Every gated frame enters both constraint sets."""
        out = os.path.join(self.tmp.name, "select")
        code = dispatch(["select", "--preset", "synthetic", "--config", self.config, "--data", self.data,
                         "--provider", "file", "--out", out])
        self.assertEqual(code, EXIT_OK)
        with open(os.path.join(out, "selection.csv"), 'r', newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(len(rows), len(load_trajectory(os.path.join(self.data, "slam.txt"))))
        self.assertTrue(all(r["in_Cr"] == "1" and r["in_Ct"] == "1" for r in rows))
        self.assertTrue(os.path.isfile(os.path.join(out, "prediction_errors.csv")))


if __name__ == "__main__":
    unittest.main()
