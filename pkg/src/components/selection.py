"""
Coarse-to-fine validity gate for G2S predictions.

Coarse: the predicted shift must fall inside a 3-sigma ellipse built from the
current trajectory's marginal x-y covariance. Fine: the relative pose implied
by two consecutive corrected poses must agree with visual odometry.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Sequence, Set

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.components.g2s import G2SDelta, G2SProvider, compose_correction
from src.components.geometry import Pose, azimuth, psd_sqrt, rot2
from src.components.trajectory import Trajectory, relative_pose
from src.utils.errors import DegenerateCovariance, MissingPrediction, SingularBound, TrajectoryTooShort

logger = logging.getLogger('selection')


class SelectionParams(BaseModel):
    """Gate thresholds. th_theta is in degrees, r and th_t in meters."""
    model_config = ConfigDict(extra="forbid")

    r: float = Field(default=0.01, gt=0.0)
    th_theta: float = Field(default=0.25, gt=0.0)
    th_t: float = Field(default=0.5, gt=0.0)
    bound_sigma_multiplier: float = Field(default=3.0, gt=0.0)
    bound_frame: Literal["as_written", "body"] = "as_written"
    use_bound: bool = True
    use_voc: bool = True


@dataclass(frozen=True, eq=False)
class SpatialBound:
    """Ellipse {M (cos a, sin a)} around a frame's predicted position."""
    frame: int
    M: np.ndarray

    def boundary(self, alphas: np.ndarray) -> np.ndarray:
        """Boundary points for angles alphas, shape (len(alphas), 2)."""
        alphas = np.asarray(alphas, dtype=float)
        return (self.M @ np.vstack((np.cos(alphas), np.sin(alphas)))).T

    def contains(self, xy: Sequence[float]) -> bool:
        return bound_contains(self, xy)


def scale_factor(Phi_1: np.ndarray, r: float) -> float:
    """
    Normaliser n mapping the first frame's covariance to a bound of radius r.

    Args:
        Phi_1: 2x2 x-y covariance of the first free frame
        r: Desired first-frame bound radius in meters

    Returns:
        float: n = mean(eigenvalues of Phi_1^(1/2)) / r

    Raises:
        DegenerateCovariance: Phi_1 is numerically zero
    """
    eigvals = np.linalg.eigvalsh(psd_sqrt(Phi_1))
    if np.all(eigvals < 1e-15):
        raise DegenerateCovariance("First-frame covariance is zero, bound scale factor undefined")
    return float(eigvals.sum() / (2.0 * r))


def spatial_bound(Phi_k: np.ndarray, R_k: np.ndarray, n: float, frame: int = 0,
                  multiplier: float = 3.0, bound_frame: str = "as_written") -> SpatialBound:
    """
    Ellipse map M = (multiplier / n) Rot(azimuth(R_k)) Phi_k^(1/2).

    With bound_frame 'body' the planar rotation is transposed.
    """
    if n <= 0.0:
        raise DegenerateCovariance(f"Bound scale factor must be positive, got {n}")
    rotation = rot2(azimuth(R_k))
    if bound_frame == "body":
        rotation = rotation.T
    M = (multiplier / n) * rotation @ psd_sqrt(Phi_k)
    return SpatialBound(frame=frame, M=M)


def bound_contains(bound: SpatialBound, xy: Sequence[float]) -> bool:
    """
    Closed membership test ||M^-1 xy|| <= 1.

    Raises:
        SingularBound: M is not invertible
    """
    singular_values = np.linalg.svd(bound.M, compute_uv=False)
    if singular_values[0] <= 0.0 or singular_values[-1] < 1e-12 * singular_values[0]:
        raise SingularBound(f"Spatial bound of frame {bound.frame} is singular")
    u = np.linalg.solve(bound.M, np.asarray(xy, dtype=float)[:2])
    return bool(np.linalg.norm(u) <= 1.0)


@dataclass(frozen=True)
class VOCResult:
    rot_ok: bool
    trans_ok: bool
    rot_diff_deg: float
    dx: float
    dy: float


def voc_check(delta_prev: G2SDelta, delta_curr: G2SDelta, T_prev: Pose, T_curr: Pose,
              params: SelectionParams, reference: Optional[Pose] = None) -> VOCResult:
    """
    Visual-odometry consistency of two predictions.

    The corrected relative pose D_prev^-1 * rel(T_prev, T_curr) * D_curr is
    compared with the odometry relative pose.

    Args:
        delta_prev: Prediction for the earlier frame, expressed at T_prev
        delta_curr: Prediction for the current frame, expressed at T_curr
        T_prev: Current estimate of the earlier pose
        T_curr: Current estimate of the current pose
        params: Thresholds
        reference: Odometry relative pose to compare against, defaults to rel(T_prev, T_curr)

    Returns:
        VOCResult with pass flags and the azimuth (deg) and x/y differences
    """
    corrected = relative_pose(compose_correction(T_prev, delta_prev), compose_correction(T_curr, delta_curr))
    if reference is None:
        reference = relative_pose(T_prev, T_curr)

    rot_diff = math.degrees(azimuth(corrected.rotation @ reference.rotation.T))
    dx, dy = (float(v) for v in (corrected.translation - reference.translation)[:2])
    return VOCResult(
        rot_ok=bool(abs(rot_diff) < params.th_theta),
        trans_ok=bool(abs(dx) < params.th_t and abs(dy) < params.th_t),
        rot_diff_deg=float(rot_diff),
        dx=dx,
        dy=dy,
    )


@dataclass
class FrameDiagnostics:
    frame: int
    in_bound: bool = False
    rot_diff_deg: float = float("nan")
    dx: float = float("nan")
    dy: float = float("nan")
    in_Cr: bool = False
    in_Ct: bool = False


def _in_bound(bound: Optional[SpatialBound], delta: G2SDelta) -> bool:
    # None marks a trusted frame
    return True if bound is None else bound_contains(bound, (delta.x, delta.y))


def select_frame(frame: int, delta_prev: Optional[G2SDelta], delta_curr: Optional[G2SDelta],
                 bound_prev: Optional[SpatialBound], bound_curr: Optional[SpatialBound],
                 T_prev: Pose, T_curr: Pose, params: SelectionParams,
                 reference: Optional[Pose] = None) -> FrameDiagnostics:
    """
    Gate one frame: both bound checks first, then VOC.

    A bound of None stands for a trusted frame and always passes.

    Raises:
        MissingPrediction: either delta is absent
    """
    if delta_prev is None or delta_curr is None:
        raise MissingPrediction(f"Frame {frame} lacks a prediction for itself or its predecessor")

    diag = FrameDiagnostics(frame=frame)
    if params.use_bound:
        diag.in_bound = _in_bound(bound_prev, delta_prev) and _in_bound(bound_curr, delta_curr)
    else:
        diag.in_bound = True

    voc = voc_check(delta_prev, delta_curr, T_prev, T_curr, params, reference)
    diag.rot_diff_deg, diag.dx, diag.dy = voc.rot_diff_deg, voc.dx, voc.dy
    if diag.in_bound:
        diag.in_Cr = voc.rot_ok or not params.use_voc
        diag.in_Ct = voc.trans_ok or not params.use_voc
    logger.debug(
        f"Frame {frame}: in_bound={diag.in_bound} rot_diff={voc.rot_diff_deg:.3f}deg "
        f"dx={voc.dx:.3f} dy={voc.dy:.3f} -> Cr={diag.in_Cr} Ct={diag.in_Ct}"
    )
    return diag


@dataclass
class SelectionResult:
    C_r: Set[int] = field(default_factory=set)
    C_t: Set[int] = field(default_factory=set)
    diagnostics: Dict[int, FrameDiagnostics] = field(default_factory=dict)
    deltas: Dict[int, G2SDelta] = field(default_factory=dict)

    def add(self, diag: FrameDiagnostics) -> None:
        self.diagnostics[diag.frame] = diag
        if diag.in_Cr:
            self.C_r.add(diag.frame)
        if diag.in_Ct:
            self.C_t.add(diag.frame)


def trusted_frame_diagnostics(frame: int = 0) -> FrameDiagnostics:
    """The aligned first frame: zero delta, accepted into both sets."""
    return FrameDiagnostics(frame=frame, in_bound=True, rot_diff_deg=0.0, dx=0.0, dy=0.0, in_Cr=True, in_Ct=True)


def select_trajectory(trajectory: Trajectory, provider: G2SProvider, covariances: Sequence[np.ndarray],
                      params: SelectionParams, reference: Optional[Trajectory] = None) -> SelectionResult:
    """
    Gate every frame of a fixed trajectory without refining it.

    Args:
        trajectory: Poses the provider is queried at
        provider: G2S prediction source
        covariances: Marginal x-y covariance per frame (index 0 may be zero)
        params: Gate thresholds
        reference: Trajectory whose relative poses VOC compares against, defaults to trajectory

    Returns:
        SelectionResult over all frames
    """
    if len(trajectory) < 2:
        raise TrajectoryTooShort("Selection needs at least two frames")
    reference = reference or trajectory

    n = scale_factor(covariances[1], params.r)
    result = SelectionResult()
    result.deltas[0] = G2SDelta(frame=0, x=0.0, y=0.0, theta=0.0)
    result.add(trusted_frame_diagnostics(0))
    bounds: Dict[int, Optional[SpatialBound]] = {0: None}

    prev = 0
    for k in range(1, len(trajectory)):
        delta = provider.query(k, trajectory[k])
        if delta is None:
            logger.debug(f"No prediction for frame {k}")
            continue
        result.deltas[k] = delta
        bounds[k] = spatial_bound(covariances[k], trajectory.rotations[k], n, frame=k,
                                  multiplier=params.bound_sigma_multiplier, bound_frame=params.bound_frame)
        diag = select_frame(k, result.deltas[prev], delta, bounds[prev], bounds[k],
                            trajectory[prev], trajectory[k], params,
                            reference=relative_pose(reference[prev], reference[k]))
        result.add(diag)
        prev = k

    logger.info(
        f"Selected {len(result.C_r)} rotation and {len(result.C_t)} translation predictions "
        f"out of {len(trajectory)} frames"
    )
    return result
