"""
Absolute trajectory error after rigid alignment, in the planar quantities a
G2S-corrected trajectory is judged by: azimuth, 2D translation, and the
longitudinal / lateral split of the translation error.
"""
import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.components.geometry import Pose, azimuths
from src.components.trajectory import Trajectory
from src.utils.errors import DataError, DegenerateGeometry, LengthMismatch

logger = logging.getLogger('metrics')

AlignMethod = Literal["origin", "horn"]


@dataclass(frozen=True, eq=False)
class Alignment:
    """Rigid transform S mapping the estimate into the ground-truth frame."""
    S: Pose
    method: str


def _check_lengths(est: Trajectory, gt: Trajectory) -> None:
    if len(est) != len(gt):
        raise LengthMismatch(f"Estimate has {len(est)} poses, ground truth has {len(gt)}")
    if len(est) == 0:
        raise DataError("Cannot evaluate empty trajectories")


def align_origin(est: Trajectory, gt: Trajectory) -> Alignment:
    """S = gt[0] * est[0]^-1, so the first frame has zero error."""
    _check_lengths(est, gt)
    return Alignment(gt[0].compose(est[0].inverse()), "origin")


def align_horn(est: Trajectory, gt: Trajectory) -> Alignment:
    """
    Closed-form least-squares rigid alignment of positions (no scale).

    Args:
        est: Estimated trajectory
        gt: Ground-truth trajectory, index-matched

    Returns:
        Alignment minimising sum ||S t_k - t^gt_k||^2

    Raises:
        DegenerateGeometry: positions are collinear
    """
    _check_lengths(est, gt)
    P, Q = est.translations, gt.translations
    mu_p, mu_q = P.mean(axis=0), Q.mean(axis=0)
    P0, Q0 = P - mu_p, Q - mu_q

    spread = np.linalg.svd(P0, compute_uv=False) if len(P0) >= 2 else np.zeros(1)
    if len(spread) < 2 or spread[1] < 1e-9 * max(spread[0], 1.0):
        raise DegenerateGeometry("Positions are collinear, rotation about the line is unobservable")

    U, _, Vt = np.linalg.svd(Q0.T @ P0)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    R = U @ D @ Vt
    return Alignment(Pose(R, mu_q - R @ mu_p), "horn")


def align(est: Trajectory, gt: Trajectory, method: str = "origin") -> Alignment:
    if method == "origin":
        return align_origin(est, gt)
    if method == "horn":
        return align_horn(est, gt)
    raise DataError(f"Unknown alignment method '{method}'")


def _body_errors(est: Trajectory, gt: Trajectory, S: Pose):
    """Azimuth error (rad) and gt-body-frame translation error of delta = gt^-1 S est."""
    R_est = S.rotation @ est.rotations
    t_est = est.translations @ S.rotation.T + S.translation
    gt_Rt = np.swapaxes(gt.rotations, 1, 2)
    dR = gt_Rt @ R_est
    dt = np.einsum('kij,kj->ki', gt_Rt, t_est - gt.translations)
    return azimuths(dR), dt


def pose_errors(est: Trajectory, gt: Trajectory, S: Pose):
    """
    Per-frame absolute errors after alignment.

    Returns:
        (theta_err in degrees, t2d_err in meters), both arrays of length N
    """
    _check_lengths(est, gt)
    dtheta, dt = _body_errors(est, gt, S)
    return np.degrees(np.abs(dtheta)), np.linalg.norm(dt[:, :2], axis=1)


class ErrorSummary(BaseModel):
    mean: float
    median: float
    rmse: float

    @classmethod
    def of(cls, values: np.ndarray) -> "ErrorSummary":
        values = np.asarray(values, dtype=float)
        return cls(
            mean=float(values.mean()),
            median=float(np.median(values)),
            rmse=float(math.sqrt(np.mean(values ** 2))),
        )


class BodyFrameStats(BaseModel):
    """Means and percentages under threshold of azimuth, longitudinal and lateral errors."""
    azimuth_mean: float
    azimuth_pct: float
    longitudinal_mean: float
    longitudinal_pct: float
    lateral_mean: float
    lateral_pct: float
    rot_threshold_deg: float = 1.0
    trans_threshold_m: float = 1.0


def _body_stats(dtheta: np.ndarray, dt: np.ndarray, rot_threshold: float, trans_threshold: float) -> BodyFrameStats:
    azimuth = np.degrees(np.abs(dtheta))
    longitudinal = np.abs(dt[:, 0])
    lateral = np.abs(dt[:, 1])
    return BodyFrameStats(
        azimuth_mean=float(azimuth.mean()),
        azimuth_pct=float(100.0 * np.mean(azimuth < rot_threshold)),
        longitudinal_mean=float(longitudinal.mean()),
        longitudinal_pct=float(100.0 * np.mean(longitudinal < trans_threshold)),
        lateral_mean=float(lateral.mean()),
        lateral_pct=float(100.0 * np.mean(lateral < trans_threshold)),
        rot_threshold_deg=rot_threshold,
        trans_threshold_m=trans_threshold,
    )


def body_frame_stats(est: Trajectory, gt: Trajectory, S: Pose,
                     rot_threshold: float = 1.0, trans_threshold: float = 1.0) -> BodyFrameStats:
    """
    Longitudinal / lateral / azimuth error statistics in the ground-truth body frame.

    Args:
        est: Estimated trajectory
        gt: Ground-truth trajectory
        S: Alignment transform
        rot_threshold: Azimuth threshold in degrees
        trans_threshold: Translation threshold in meters

    Returns:
        BodyFrameStats with percentages in [0, 100]
    """
    _check_lengths(est, gt)
    dtheta, dt = _body_errors(est, gt, S)
    return _body_stats(dtheta, dt, rot_threshold, trans_threshold)


class MetricsReport(BaseModel):
    """Evaluation of one trajectory against ground truth."""
    method: str
    frames: int
    theta: ErrorSummary
    t2d: ErrorSummary
    body: BodyFrameStats
    theta_err: List[float] = Field(default_factory=list)
    t2d_err: List[float] = Field(default_factory=list)
    longitudinal: List[float] = Field(default_factory=list)
    lateral: List[float] = Field(default_factory=list)


def evaluate_trajectory(est: Trajectory, gt: Trajectory, method: str = "origin",
                        rot_threshold: float = 1.0, trans_threshold: float = 1.0) -> MetricsReport:
    """Align, then summarise per-frame errors."""
    alignment = align(est, gt, method)
    dtheta, dt = _body_errors(est, gt, alignment.S)
    theta_err = np.degrees(np.abs(dtheta))
    t2d_err = np.linalg.norm(dt[:, :2], axis=1)
    report = MetricsReport(
        method=method,
        frames=len(est),
        theta=ErrorSummary.of(theta_err),
        t2d=ErrorSummary.of(t2d_err),
        body=_body_stats(dtheta, dt, rot_threshold, trans_threshold),
        theta_err=theta_err.tolist(),
        t2d_err=t2d_err.tolist(),
        longitudinal=np.abs(dt[:, 0]).tolist(),
        lateral=np.abs(dt[:, 1]).tolist(),
    )
    logger.info(
        f"Evaluated {len(est)} frames ({method}): azimuth RMSE {report.theta.rmse:.4f} deg, "
        f"2D RMSE {report.t2d.rmse:.4f} m"
    )
    return report


def claimed_pose_errors(claims: Mapping[int, Pose], gt: Trajectory):
    """Azimuth (rad) and body-frame translation errors of claimed absolute poses, by frame."""
    frames = sorted(claims)
    if not frames:
        raise DataError("No claimed poses to evaluate")
    if frames[-1] >= len(gt):
        raise LengthMismatch(f"Claimed pose for frame {frames[-1]} beyond ground truth of length {len(gt)}")
    est = Trajectory.from_poses([claims[k] for k in frames])
    ref = Trajectory(gt.rotations[frames], gt.translations[frames])
    dtheta, dt = _body_errors(est, ref, Pose.identity())
    return frames, dtheta, dt


def prediction_accuracy(claims: Mapping[int, Pose], gt: Trajectory,
                        rot_threshold: float = 1.0, trans_threshold: float = 1.0) -> BodyFrameStats:
    """
    Accuracy of raw G2S claimed poses against ground truth, without alignment.

    Args:
        claims: frame -> claimed absolute pose
        gt: Ground-truth trajectory

    Returns:
        BodyFrameStats over the claimed frames
    """
    _, dtheta, dt = claimed_pose_errors(claims, gt)
    return _body_stats(dtheta, dt, rot_threshold, trans_threshold)


def ablation_table(results: Mapping[str, Trajectory], gt: Trajectory, method: str = "origin") -> Dict[str, MetricsReport]:
    """Evaluate several fused trajectories of the same sequence."""
    return {mode: evaluate_trajectory(traj, gt, method) for mode, traj in results.items()}
