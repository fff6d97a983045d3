"""
Ground-to-satellite (G2S) 3-DoF measurements: delta algebra and providers.

A G2S delta (x, y, theta) is a planar correction expressed in the body frame
of the pose the network was queried at. x is longitudinal (body forward),
y is lateral. The corrected pose keeps the query's z, roll and pitch.
"""
import math
import hashlib
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.components.geometry import Pose, azimuth, canonical_to_kitti, kitti_to_canonical, rot_z
from src.components.trajectory import Trajectory, format_kitti_row
from src.utils.errors import DataError, FrameOutOfRange, ParseError

logger = logging.getLogger('g2s')

# Salt separating the outlier-label stream from the noise stream
_LABEL_STREAM = 0x6C61626C


@dataclass(frozen=True)
class G2SDelta:
    """Planar correction for one frame, in the query body frame."""
    frame: int
    x: float
    y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


def compose_correction(T_query: Pose, delta: G2SDelta) -> Pose:
    """
    Absolute pose claimed by a G2S delta: T_query * [rot_z(theta), (x, y, 0)].

    Args:
        T_query: Pose the delta was predicted at
        delta: Planar correction

    Returns:
        Pose: Claimed absolute pose
    """
    R = T_query.rotation @ rot_z(delta.theta)
    t = T_query.translation + T_query.rotation @ np.array([delta.x, delta.y, 0.0])
    return Pose(R, t)


def extract_delta(T_query: Pose, T_claim: Pose, frame: int = 0) -> G2SDelta:
    """
    Planar correction taking T_query to T_claim, projected to 3 DoF.

    Args:
        T_query: Query pose
        T_claim: Claimed absolute pose
        frame: Frame index stored on the result

    Returns:
        G2SDelta: (x, y) from R_q^T (t_c - t_q), theta the azimuth of R_q^T R_c
    """
    Rq_T = T_query.rotation.T
    theta = azimuth(Rq_T @ T_claim.rotation)
    shift = Rq_T @ (T_claim.translation - T_query.translation)
    return G2SDelta(frame=frame, x=float(shift[0]), y=float(shift[1]), theta=theta)


def reexpress(delta: G2SDelta, T_query_old: Pose, T_query_new: Pose) -> G2SDelta:
    """Re-anchor a delta to a new query pose, holding its claimed absolute pose fixed."""
    return extract_delta(T_query_new, compose_correction(T_query_old, delta), frame=delta.frame)


class G2SProvider(ABC):
    """
    Source of G2S predictions.

    query returns None when the provider has no measurement for the frame.
    """

    @abstractmethod
    def query(self, frame: int, T_query: Pose) -> Optional[G2SDelta]:
        pass


class OracleNoise(BaseModel):
    """Noise model of the synthetic G2S oracle."""
    model_config = ConfigDict(extra="forbid")

    sigma_x: float = Field(default=0.4, ge=0.0)
    sigma_y: float = Field(default=0.2, ge=0.0)
    sigma_theta: float = Field(default=math.radians(0.2), ge=0.0)
    outlier_rate: float = Field(default=0.2, ge=0.0, le=1.0)
    rotation_range: float = Field(default=math.radians(10.0), gt=0.0)
    window_half: float = Field(default=10.0, gt=0.0)
    seed: int = Field(default=0, ge=0)


def _pose_hash(T: Pose) -> int:
    digest = hashlib.blake2b(
        np.ascontiguousarray(T.rotation).tobytes() + np.ascontiguousarray(T.translation).tobytes(),
        digest_size=8,
    ).digest()
    return int.from_bytes(digest, "little")


def is_outlier_frame(noise: OracleNoise, frame: int) -> bool:
    """Outlier label of a frame; depends only on (seed, frame)."""
    if noise.outlier_rate <= 0.0:
        return False
    rng = np.random.default_rng([noise.seed, frame, _LABEL_STREAM])
    return bool(rng.random() < noise.outlier_rate)


def oracle_query(gt: Trajectory, noise: OracleNoise, frame: int, T_query: Pose) -> G2SDelta:
    """
    Synthetic G2S prediction for one frame.

    Inliers are the exact correction towards gt[frame] plus Gaussian noise,
    outliers are uniform over the search window. Every component is clamped
    to the search ranges.

    Args:
        gt: Ground-truth trajectory
        noise: Oracle noise model
        frame: Frame index
        T_query: Pose the oracle is queried at

    Returns:
        G2SDelta: Prediction

    Raises:
        FrameOutOfRange: frame not in gt
    """
    if not 0 <= frame < len(gt):
        raise FrameOutOfRange(f"Oracle queried for frame {frame}, ground truth has {len(gt)} frames")

    rng = np.random.default_rng([noise.seed, frame, _pose_hash(T_query)])
    if is_outlier_frame(noise, frame):
        x, y = rng.uniform(-noise.window_half, noise.window_half, size=2)
        theta = rng.uniform(-noise.rotation_range, noise.rotation_range)
    else:
        exact = extract_delta(T_query, gt[frame], frame=frame)
        x = exact.x + noise.sigma_x * rng.standard_normal()
        y = exact.y + noise.sigma_y * rng.standard_normal()
        theta = exact.theta + noise.sigma_theta * rng.standard_normal()

    return G2SDelta(
        frame=frame,
        x=float(np.clip(x, -noise.window_half, noise.window_half)),
        y=float(np.clip(y, -noise.window_half, noise.window_half)),
        theta=float(np.clip(theta, -noise.rotation_range, noise.rotation_range)),
    )


class SyntheticOracle(G2SProvider):
    """Provider backed by ground truth and an OracleNoise model."""

    def __init__(self, gt: Trajectory, noise: Optional[OracleNoise] = None):
        self.gt = gt
        self.noise = noise or OracleNoise()

    def query(self, frame: int, T_query: Pose) -> Optional[G2SDelta]:
        return oracle_query(self.gt, self.noise, frame, T_query)

    def is_outlier(self, frame: int) -> bool:
        return is_outlier_frame(self.noise, frame)


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    """A stored prediction together with the pose it was made at."""
    delta: G2SDelta
    query_pose: Pose

    @property
    def claimed_pose(self) -> Pose:
        return compose_correction(self.query_pose, self.delta)


class FileProvider(G2SProvider):
    """
    Provider replaying precomputed predictions.

    Each stored delta stays anchored to its claimed absolute pose; a query
    at another pose re-expresses it about that pose.
    """

    def __init__(self, records: Iterable[PredictionRecord]):
        self.records: Dict[int, PredictionRecord] = {r.delta.frame: r for r in records}

    def query(self, frame: int, T_query: Pose) -> Optional[G2SDelta]:
        record = self.records.get(frame)
        if record is None:
            return None
        return reexpress(record.delta, record.query_pose, T_query)

    @property
    def frames(self) -> List[int]:
        return sorted(self.records)

    @classmethod
    def from_files(cls, predictions_path: str, queries_path: str, fmt: str = "kitti") -> "FileProvider":
        return cls(load_predictions(predictions_path, queries_path, fmt))


def load_predictions(predictions_path: str, queries_path: str, fmt: str = "kitti") -> List[PredictionRecord]:
    """
    Read 'k x y theta' predictions and their 'k + 12 reals' query-pose sidecar.

    Args:
        predictions_path: Prediction file (theta in radians)
        queries_path: Sidecar of original query poses
        fmt: Axis convention of the sidecar ('kitti' converts from camera axes)

    Returns:
        List of PredictionRecord ordered by frame
    """
    deltas: Dict[int, G2SDelta] = {}
    with open(predictions_path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            fields = line.split()
            if not fields or fields[0].startswith('#'):
                continue
            if len(fields) != 4:
                raise ParseError(predictions_path, line_number, f"expected 'k x y theta', got {len(fields)} fields")
            try:
                k = int(fields[0])
                x, y, theta = (float(v) for v in fields[1:])
            except ValueError as e:
                raise ParseError(predictions_path, line_number, str(e)) from e
            if k < 0 or not all(math.isfinite(v) for v in (x, y, theta)):
                raise ParseError(predictions_path, line_number, "negative frame or non-finite value")
            deltas[k] = G2SDelta(frame=k, x=x, y=y, theta=theta)

    queries: Dict[int, Pose] = {}
    with open(queries_path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            fields = line.split()
            if not fields or fields[0].startswith('#'):
                continue
            if len(fields) != 13:
                raise ParseError(queries_path, line_number, f"expected 'k' + 12 reals, got {len(fields)} fields")
            try:
                k = int(fields[0])
                M = np.array([float(v) for v in fields[1:]]).reshape(3, 4)
            except ValueError as e:
                raise ParseError(queries_path, line_number, str(e)) from e
            R, t = M[:, :3], M[:, 3]
            if fmt == "kitti":
                R, t = kitti_to_canonical(R, t)
            queries[k] = Pose(R, t)

    missing = sorted(set(deltas) - set(queries))
    if missing:
        raise DataError(f"Predictions without a stored query pose for frames {missing[:10]}")

    logger.info(f"Loaded {len(deltas)} G2S predictions from {predictions_path}")
    return [PredictionRecord(deltas[k], queries[k]) for k in sorted(deltas)]


def write_predictions(records: Iterable[PredictionRecord], predictions_path: str,
                      queries_path: str, fmt: str = "kitti") -> Tuple[str, str]:
    """Write predictions and their query-pose sidecar (inverse of load_predictions)."""
    records = sorted(records, key=lambda r: r.delta.frame)
    with open(predictions_path, 'w', encoding='utf-8') as pf, open(queries_path, 'w', encoding='utf-8') as qf:
        for record in records:
            d = record.delta
            pf.write(f"{d.frame} {d.x:.17g} {d.y:.17g} {d.theta:.17g}\n")
            R, t = record.query_pose.rotation, record.query_pose.translation
            if fmt == "kitti":
                R, t = canonical_to_kitti(R, t)
            qf.write(f"{d.frame} {format_kitti_row(R, t)}\n")
    logger.info(f"Wrote {len(records)} G2S predictions to {predictions_path}")
    return predictions_path, queries_path
