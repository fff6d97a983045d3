"""
Trajectories, odometry edges and the text formats they are stored in.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from src.components.geometry import (
    Pose,
    canonical_to_kitti,
    kitti_to_canonical,
    nearest_rotation,
    pose_compose,
    pose_inverse,
    rotation_deviation,
)
from src.utils.errors import (
    AllZeroCovisibility,
    DataError,
    EmptyEdgeSet,
    FrameOutOfRange,
    NonRigidPose,
    ParseError,
)

logger = logging.getLogger('trajectory')

POSE_FORMATS = ("kitti", "tum")

RIGID_TOLERANCE = 1e-3
RENORMALIZE_TOLERANCE = 1e-6


class Trajectory:
    """
    Index-contiguous sequence of poses in the canonical frame.

    Rotations and translations are held as (N, 3, 3) and (N, 3) arrays;
    node k has index k. Timestamps are optional.
    """

    def __init__(self, rotations: np.ndarray, translations: np.ndarray,
                 timestamps: Optional[np.ndarray] = None):
        rotations = np.array(rotations, dtype=float).reshape(-1, 3, 3)
        translations = np.array(translations, dtype=float).reshape(-1, 3)
        if len(rotations) != len(translations):
            raise DataError(
                f"Trajectory has {len(rotations)} rotations but {len(translations)} translations"
            )
        if timestamps is not None:
            timestamps = np.array(timestamps, dtype=float).reshape(-1)
            if len(timestamps) != len(rotations):
                raise DataError("Timestamp count does not match pose count")
        self.rotations = rotations
        self.translations = translations
        self.timestamps = timestamps

    @classmethod
    def from_poses(cls, poses: Sequence[Pose], timestamps: Optional[Sequence[float]] = None) -> "Trajectory":
        rotations = np.stack([p.rotation for p in poses]) if poses else np.zeros((0, 3, 3))
        translations = np.stack([p.translation for p in poses]) if poses else np.zeros((0, 3))
        return cls(rotations, translations, timestamps)

    def __len__(self) -> int:
        return len(self.rotations)

    def __getitem__(self, k: int) -> Pose:
        if not 0 <= k < len(self):
            raise FrameOutOfRange(f"Frame {k} outside trajectory of length {len(self)}")
        return Pose(self.rotations[k], self.translations[k])

    def __iter__(self) -> Iterator[Pose]:
        for k in range(len(self)):
            yield self[k]

    def poses(self) -> List[Pose]:
        return list(self)

    def copy(self) -> "Trajectory":
        return Trajectory(
            self.rotations.copy(),
            self.translations.copy(),
            None if self.timestamps is None else self.timestamps.copy(),
        )

    def relative_poses(self) -> List[Pose]:
        """Consecutive relative poses T_{k-1}^-1 T_k."""
        return [relative_pose(self[k - 1], self[k]) for k in range(1, len(self))]

    def __repr__(self) -> str:
        return f"Trajectory(n={len(self)})"


@dataclass(frozen=True, eq=False)
class OdometryEdge:
    """
    Relative-pose constraint between nodes i < j.

    Consecutive edges have j = i + 1, loop closures j > i + 1.
    """
    i: int
    j: int
    relative_pose: Pose
    covis_count: float = 0.0
    weight: float = 1.0

    @property
    def is_loop(self) -> bool:
        return self.j > self.i + 1


def relative_pose(T_i: Pose, T_j: Pose) -> Pose:
    """
    Relative pose of T_j seen from T_i.

    Args:
        T_i: Reference pose
        T_j: Target pose

    Returns:
        Pose: T_i^-1 * T_j
    """
    return pose_compose(pose_inverse(T_i), T_j)


def _parse_reals(path: str, line_number: int, line: str, expected: int) -> np.ndarray:
    fields = line.split()
    if len(fields) != expected:
        raise ParseError(path, line_number, f"expected {expected} values, got {len(fields)}")
    try:
        values = np.array([float(f) for f in fields])
    except ValueError as e:
        raise ParseError(path, line_number, str(e)) from e
    if not np.all(np.isfinite(values)):
        raise ParseError(path, line_number, "non-finite value")
    return values


def _data_lines(path: str) -> Iterator[Tuple[int, str]]:
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith('#'):
                continue
            yield line_number, stripped


def _checked_rotation(R: np.ndarray, line_number: int) -> np.ndarray:
    deviation = rotation_deviation(R)
    if deviation > RIGID_TOLERANCE:
        raise NonRigidPose(
            f"Rotation at line {line_number} deviates from orthonormal by {deviation:.2e}",
            line_number=line_number,
        )
    if deviation > RENORMALIZE_TOLERANCE or np.linalg.det(R) < 0:
        logger.debug(f"Renormalizing rotation at line {line_number} (deviation {deviation:.2e})")
        return nearest_rotation(R)
    return R


def load_trajectory(path: str, fmt: str = "kitti") -> Trajectory:
    """
    Load a pose file into the canonical frame.

    Args:
        path: Pose file
        fmt: 'kitti' (12 reals, row-major 3x4 [R|t], camera axes) or
            'tum' (timestamp tx ty tz qx qy qz qw, canonical axes)

    Returns:
        Trajectory: Loaded trajectory
    """
    if fmt not in POSE_FORMATS:
        raise DataError(f"Unknown pose format '{fmt}', expected one of {POSE_FORMATS}")

    rotations, translations, timestamps = [], [], []
    for line_number, line in _data_lines(path):
        if fmt == "kitti":
            values = _parse_reals(path, line_number, line, 12).reshape(3, 4)
            R, t = values[:, :3], values[:, 3]
        else:
            values = _parse_reals(path, line_number, line, 8)
            quat = values[4:8]
            if np.linalg.norm(quat) < 1e-12:
                raise ParseError(path, line_number, "zero quaternion")
            timestamps.append(values[0])
            R = Rotation.from_quat(quat).as_matrix()
            t = values[1:4]
        rotations.append(_checked_rotation(R, line_number))
        translations.append(t)

    if not rotations:
        return Trajectory(np.zeros((0, 3, 3)), np.zeros((0, 3)))

    R = np.stack(rotations)
    t = np.stack(translations)
    if fmt == "kitti":
        R, t = kitti_to_canonical(R, t)
    trajectory = Trajectory(R, t, timestamps if fmt == "tum" else None)
    logger.info(f"Loaded {len(trajectory)} poses from {path} ({fmt})")
    return trajectory


def format_kitti_row(R: np.ndarray, t: np.ndarray) -> str:
    """Row-major 3x4 [R|t] as 12 space-separated reals."""
    M = np.hstack((R, t.reshape(3, 1)))
    return " ".join(f"{v:.17g}" for v in M.reshape(-1))


def save_trajectory(trajectory: Trajectory, path: str, fmt: str = "kitti") -> None:
    """
    Write a trajectory in the given format (inverse of load_trajectory).

    Args:
        trajectory: Trajectory in the canonical frame
        path: Output file
        fmt: 'kitti' or 'tum'
    """
    if fmt not in POSE_FORMATS:
        raise DataError(f"Unknown pose format '{fmt}', expected one of {POSE_FORMATS}")

    with open(path, 'w', encoding='utf-8') as f:
        if fmt == "kitti":
            R, t = canonical_to_kitti(trajectory.rotations, trajectory.translations)
            for k in range(len(trajectory)):
                f.write(format_kitti_row(R[k], t[k]) + "\n")
        else:
            quats = Rotation.from_matrix(trajectory.rotations).as_quat() if len(trajectory) else []
            stamps = trajectory.timestamps
            if stamps is None:
                stamps = np.arange(len(trajectory), dtype=float)
            for k in range(len(trajectory)):
                values = [stamps[k], *trajectory.translations[k], *quats[k]]
                f.write(" ".join(f"{v:.17g}" for v in values) + "\n")
    logger.info(f"Wrote {len(trajectory)} poses to {path} ({fmt})")


def load_covisibility(path: str) -> Dict[Tuple[int, int], int]:
    """
    Read a covisibility list of 'i j N' lines.

    Returns:
        Mapping (i, j) -> N with i < j
    """
    counts = {}
    for line_number, line in _data_lines(path):
        fields = line.split()
        if len(fields) != 3:
            raise ParseError(path, line_number, f"expected 'i j N', got {len(fields)} fields")
        try:
            i, j, n = (int(v) for v in fields)
        except ValueError as e:
            raise ParseError(path, line_number, str(e)) from e
        if i < 0 or j <= i or n < 0:
            raise ParseError(path, line_number, "require 0 <= i < j and N >= 0")
        counts[(i, j)] = n
    logger.info(f"Loaded {len(counts)} covisibility entries from {path}")
    return counts


def save_covisibility(counts: Dict[Tuple[int, int], int], path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        for (i, j), n in sorted(counts.items()):
            f.write(f"{i} {j} {int(n)}\n")


def load_edge_poses(path: str, fmt: str = "kitti") -> Dict[Tuple[int, int], Pose]:
    """
    Read loop-closure relative poses, 'i j' followed by 12 reals per line.

    The 3x4 block follows the axis convention of the pose format.
    """
    edges = {}
    for line_number, line in _data_lines(path):
        fields = line.split()
        if len(fields) != 14:
            raise ParseError(path, line_number, f"expected 'i j' + 12 reals, got {len(fields)} fields")
        try:
            i, j = int(fields[0]), int(fields[1])
        except ValueError as e:
            raise ParseError(path, line_number, str(e)) from e
        if i < 0 or j <= i:
            raise ParseError(path, line_number, "require 0 <= i < j")
        values = _parse_reals(path, line_number, " ".join(fields[2:]), 12).reshape(3, 4)
        R, t = _checked_rotation(values[:, :3], line_number), values[:, 3]
        if fmt == "kitti":
            R, t = kitti_to_canonical(R, t)
        edges[(i, j)] = Pose(R, t)
    logger.info(f"Loaded {len(edges)} edge poses from {path}")
    return edges


def save_edge_poses(edges: Dict[Tuple[int, int], Pose], path: str, fmt: str = "kitti") -> None:
    with open(path, 'w', encoding='utf-8') as f:
        for (i, j), pose in sorted(edges.items()):
            R, t = pose.rotation, pose.translation
            if fmt == "kitti":
                R, t = canonical_to_kitti(R, t)
            f.write(f"{i} {j} {format_kitti_row(R, t)}\n")


def vo_weights(edges: Sequence[OdometryEdge]) -> List[OdometryEdge]:
    """
    Set each edge weight to sqrt(N_ij) normalised by the mean sqrt(N) over all edges.

    Args:
        edges: Edges with covisibility counts

    Returns:
        New edges with weights set; their mean weight is 1

    Raises:
        EmptyEdgeSet: no edges
        AllZeroCovisibility: every count is zero
    """
    if len(edges) == 0:
        raise EmptyEdgeSet("Cannot compute odometry weights without edges")
    roots = np.sqrt(np.array([e.covis_count for e in edges], dtype=float))
    normaliser = roots.mean()
    if normaliser <= 0.0:
        raise AllZeroCovisibility("All covisibility counts are zero")
    return [replace(e, weight=float(w)) for e, w in zip(edges, roots / normaliser)]


def build_odometry_edges(
    trajectory: Trajectory,
    covisibility: Optional[Dict[Tuple[int, int], int]] = None,
    loop_poses: Optional[Dict[Tuple[int, int], Pose]] = None,
) -> List[OdometryEdge]:
    """
    Consecutive edges from the SLAM trajectory plus loop closures, weighted.

    Consecutive pairs missing from the covisibility list get the list's median
    count. Without a covisibility list every weight is 1.

    Args:
        trajectory: Input SLAM trajectory
        covisibility: Optional (i, j) -> N map
        loop_poses: Optional (i, j) -> relative pose map for loop closures

    Returns:
        List of OdometryEdge, consecutive edges first
    """
    n = len(trajectory)
    covisibility = dict(covisibility or {})
    loop_poses = dict(loop_poses or {})

    for (i, j) in list(covisibility) + list(loop_poses):
        if j >= n:
            raise FrameOutOfRange(f"Edge ({i}, {j}) references a frame beyond {n - 1}")

    fill = float(np.median(list(covisibility.values()))) if covisibility else 1.0

    edges = []
    for k in range(1, n):
        edges.append(OdometryEdge(
            i=k - 1, j=k,
            relative_pose=relative_pose(trajectory[k - 1], trajectory[k]),
            covis_count=float(covisibility.get((k - 1, k), fill)),
        ))

    loop_keys = sorted({key for key in covisibility if key[1] > key[0] + 1} | set(loop_poses))
    for (i, j) in loop_keys:
        if (i, j) not in loop_poses:
            raise DataError(f"Loop-closure edge ({i}, {j}) has no relative pose")
        edges.append(OdometryEdge(
            i=i, j=j,
            relative_pose=loop_poses[(i, j)],
            covis_count=float(covisibility.get((i, j), fill)),
        ))

    if not covisibility:
        logger.info("No covisibility data supplied, using unit odometry weights")
        return [replace(e, weight=1.0) for e in edges]
    return vo_weights(edges)
