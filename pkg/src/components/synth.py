"""
Synthetic scenarios: ground truth, a drifting SLAM estimate and its edges.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy.interpolate import CubicSpline
from scipy.spatial.transform import Rotation

from src.components.g2s import OracleNoise, PredictionRecord, oracle_query, write_predictions
from src.components.geometry import Pose, so3_exp
from src.components.trajectory import (
    OdometryEdge,
    Trajectory,
    build_odometry_edges,
    relative_pose,
    save_covisibility,
    save_edge_poses,
    save_trajectory,
)
from src.utils.config import COVIS_FILE, GT_FILE, LOOPS_FILE, PREDICTIONS_FILE, QUERIES_FILE, SLAM_FILE
from src.utils.errors import ConfigInvalid
from src.utils.path_utils import get_output_path

logger = logging.getLogger('synth')


class ScenarioConfig(BaseModel):
    """
    Synthetic drive: path shape, odometry noise, scale drift, covisibility and loop closures.
    """
    model_config = ConfigDict(extra="forbid")

    path: Literal["straight", "arc", "figure_eight", "spline"] = "spline"
    length: float = Field(default=1000.0, gt=0.0)
    spacing: float = Field(default=1.0, gt=0.0)
    arc_radius: float = Field(default=200.0, gt=0.0)
    figure_eight_radius: float = Field(default=100.0, gt=0.0)
    waypoint_spacing: float = Field(default=100.0, gt=0.0)
    max_turn_deg: float = Field(default=60.0, ge=0.0)
    # Amplitude of a sinusoidal pitch profile, radians; 0 keeps the drive planar
    pitch_amplitude: float = Field(default=0.0, ge=0.0)
    pitch_period: float = Field(default=200.0, gt=0.0)

    odom_rot_noise: float = Field(default=math.radians(0.05), ge=0.0)
    odom_trans_noise: float = Field(default=0.01, ge=0.0)
    scale_constant: float = Field(default=1.0, gt=0.0)
    scale_walk_std: float = Field(default=3e-4, ge=0.0)

    covis_base: float = Field(default=200.0, gt=0.0)
    covis_decay: float = Field(default=0.5, ge=0.0)

    loop_closure: bool = False
    loop_radius: float = Field(default=10.0, gt=0.0)
    loop_min_separation: int = Field(default=100, ge=2)
    loop_stride: int = Field(default=10, ge=1)

    seed: int = Field(default=0, ge=0)

    @classmethod
    def from_section(cls, section: Optional[Mapping[str, Any]] = None, **overrides) -> "ScenarioConfig":
        try:
            values = dict(section or {})
            values.update({k: v for k, v in overrides.items() if v is not None})
            return cls(**values)
        except ValidationError as e:
            raise ConfigInvalid(f"Invalid scenario configuration: {str(e)}") from e


@dataclass
class Scenario:
    """Generated ground truth and SLAM estimate with their edge data."""
    config: ScenarioConfig
    gt: Trajectory
    slam: Trajectory
    scale_factors: np.ndarray
    covisibility: Dict[Tuple[int, int], int] = field(default_factory=dict)
    loop_poses: Dict[Tuple[int, int], Pose] = field(default_factory=dict)

    def edges(self) -> List[OdometryEdge]:
        return build_odometry_edges(self.slam, self.covisibility, self.loop_poses)


def _dense_curve(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Densely sampled planar curve at least config.length long."""
    L = config.length
    if config.path == "straight":
        u = np.linspace(0.0, L, 2)
        return np.column_stack((u, np.zeros_like(u)))
    if config.path == "arc":
        R = config.arc_radius
        u = np.linspace(0.0, L / R, max(int(20 * L), 100))
        return np.column_stack((R * np.sin(u), R * (1.0 - np.cos(u))))
    if config.path == "figure_eight":
        a = config.figure_eight_radius
        laps = max(1, math.ceil(L / (6.0 * a)))
        u = np.linspace(0.0, 2.0 * math.pi * laps, max(int(20 * L), 100))
        return np.column_stack((a * np.sin(u), a * np.sin(u) * np.cos(u)))

    # Random-waypoint spline
    n_waypoints = int(math.ceil(L / config.waypoint_spacing)) + 4
    heading = 0.0
    points = [np.zeros(2)]
    max_turn = math.radians(config.max_turn_deg)
    for _ in range(n_waypoints):
        points.append(points[-1] + config.waypoint_spacing * np.array([math.cos(heading), math.sin(heading)]))
        heading += rng.uniform(-max_turn, max_turn)
    points = np.array(points)
    spline = CubicSpline(np.arange(len(points)), points, axis=0, bc_type="natural")
    u = np.linspace(0.0, len(points) - 1, max(int(20 * L), 100))
    return spline(u)


def _resample(curve: np.ndarray, spacing: float, length: float) -> np.ndarray:
    segment = np.linalg.norm(np.diff(curve, axis=0), axis=1)
    arclength = np.concatenate(([0.0], np.cumsum(segment)))
    s = np.arange(0.0, min(length, arclength[-1]) + 1e-9, spacing)
    return np.column_stack((np.interp(s, arclength, curve[:, 0]), np.interp(s, arclength, curve[:, 1])))


def _ground_truth(config: ScenarioConfig, rng: np.random.Generator) -> Trajectory:
    xy = _resample(_dense_curve(config, rng), config.spacing, config.length)
    tangent = np.gradient(xy, axis=0)
    yaw = np.arctan2(tangent[:, 1], tangent[:, 0])

    s = np.arange(len(xy)) * config.spacing
    pitch = config.pitch_amplitude * np.sin(2.0 * math.pi * s / config.pitch_period)
    z = np.concatenate(([0.0], np.cumsum(-np.sin(pitch[1:]) * config.spacing)))

    rotations = Rotation.from_euler("ZYX", np.column_stack((yaw, pitch, np.zeros_like(yaw)))).as_matrix()
    return Trajectory(rotations, np.column_stack((xy, z)))


def generate_scenario(config: Optional[ScenarioConfig] = None) -> Scenario:
    """
    Generate a ground-truth drive and a SLAM estimate drifting away from it.

    SLAM poses chain the ground-truth relative poses perturbed by Gaussian
    rotation and translation noise, with translations multiplied by the
    per-frame scale factor (constant times a random walk starting at 1).

    Args:
        config: Scenario parameters, defaults to ScenarioConfig()

    Returns:
        Scenario: Deterministic for a given config (including seed)
    """
    config = config or ScenarioConfig()
    path_seq, odom_seq, covis_seq, loop_seq = np.random.SeedSequence(config.seed).spawn(4)
    path_rng = np.random.default_rng(path_seq)
    odom_rng = np.random.default_rng(odom_seq)
    covis_rng = np.random.default_rng(covis_seq)
    loop_rng = np.random.default_rng(loop_seq)

    gt = _ground_truth(config, path_rng)
    n = len(gt)
    if n < 2:
        raise ConfigInvalid(f"Scenario of length {config.length} with spacing {config.spacing} has fewer than two frames")

    walk = np.ones(n)
    if config.scale_walk_std > 0.0:
        walk[1:] = 1.0 + np.cumsum(odom_rng.normal(0.0, config.scale_walk_std, n - 1))
    scale_factors = config.scale_constant * walk

    rot_noise = odom_rng.normal(0.0, 1.0, (n, 3)) * config.odom_rot_noise
    trans_noise = odom_rng.normal(0.0, 1.0, (n, 3)) * config.odom_trans_noise

    slam_R = np.empty((n, 3, 3))
    slam_t = np.empty((n, 3))
    slam_R[0], slam_t[0] = gt.rotations[0], gt.translations[0]
    covisibility = {}
    for k in range(1, n):
        rel = relative_pose(gt[k - 1], gt[k])
        R_rel = rel.rotation @ so3_exp(rot_noise[k])
        t_rel = scale_factors[k] * rel.translation + trans_noise[k]
        slam_t[k] = slam_t[k - 1] + slam_R[k - 1] @ t_rel
        slam_R[k] = slam_R[k - 1] @ R_rel

        turn_deg = math.degrees(np.linalg.norm(Rotation.from_matrix(rel.rotation).as_rotvec()))
        covisibility[(k - 1, k)] = max(1, int(covis_rng.poisson(config.covis_base * math.exp(-config.covis_decay * turn_deg))))

    slam = Trajectory(slam_R, slam_t)
    loop_poses = _loop_closures(config, gt, scale_factors, loop_rng, covisibility) if config.loop_closure else {}

    logger.info(
        f"Generated {config.path} scenario: {n} frames, {len(loop_poses)} loop closures, "
        f"terminal drift {np.linalg.norm(slam_t[-1, :2] - gt.translations[-1, :2]):.3f} m"
    )
    return Scenario(config, gt, slam, scale_factors, covisibility, loop_poses)


def _loop_closures(config: ScenarioConfig, gt: Trajectory, scale_factors: np.ndarray,
                   rng: np.random.Generator, covisibility: Dict[Tuple[int, int], int]) -> Dict[Tuple[int, int], Pose]:
    """Edges from every loop_stride-th frame back to the first revisited frame within loop_radius."""
    loops = {}
    xy = gt.translations[:, :2]
    for j in range(config.loop_min_separation, len(gt), config.loop_stride):
        candidates = np.flatnonzero(
            np.linalg.norm(xy[: j - config.loop_min_separation + 1] - xy[j], axis=1) < config.loop_radius
        )
        if len(candidates) == 0:
            continue
        i = int(candidates[0])
        rel = relative_pose(gt[i], gt[j])
        R = rel.rotation @ so3_exp(rng.normal(0.0, config.odom_rot_noise, 3))
        t = scale_factors[j] * rel.translation + rng.normal(0.0, config.odom_trans_noise, 3)
        loops[(i, j)] = Pose(R, t)
        covisibility[(i, j)] = max(1, int(rng.poisson(0.5 * config.covis_base)))
    return loops


def oracle_predictions(scenario: Scenario, noise: OracleNoise) -> List[PredictionRecord]:
    """Oracle predictions queried at every SLAM pose (frame 0 excluded)."""
    records = []
    for k in range(1, len(scenario.slam)):
        query = scenario.slam[k]
        records.append(PredictionRecord(oracle_query(scenario.gt, noise, k, query), query))
    return records


def write_scenario(scenario: Scenario, out_dir: str, fmt: str = "kitti",
                   noise: Optional[OracleNoise] = None) -> List[str]:
    """
    Write the scenario files into out_dir.

    Args:
        scenario: Generated scenario
        out_dir: Output directory (created if needed)
        fmt: Pose file format
        noise: When given, oracle predictions at the SLAM poses are written too

    Returns:
        List of written paths
    """
    written = []
    gt_path = get_output_path(out_dir, GT_FILE)
    save_trajectory(scenario.gt, gt_path, fmt)
    slam_path = get_output_path(out_dir, SLAM_FILE)
    save_trajectory(scenario.slam, slam_path, fmt)
    covis_path = get_output_path(out_dir, COVIS_FILE)
    save_covisibility(scenario.covisibility, covis_path)
    written += [gt_path, slam_path, covis_path]

    if scenario.loop_poses:
        loops_path = get_output_path(out_dir, LOOPS_FILE)
        save_edge_poses(scenario.loop_poses, loops_path, fmt)
        written.append(loops_path)

    if noise is not None:
        written += list(write_predictions(
            oracle_predictions(scenario, noise),
            get_output_path(out_dir, PREDICTIONS_FILE),
            get_output_path(out_dir, QUERIES_FILE),
            fmt,
        ))
    logger.info(f"Wrote scenario files to {out_dir}")
    return written
