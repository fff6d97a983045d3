"""
Exception hierarchy for the G2S-SLAM fusion toolkit.

Library code raises these; the pipeline and the CLI catch them, log them and
turn them into diagnostics or exit codes.
"""
from typing import Optional


class FusionError(Exception):
    """Base class for every error raised by the toolkit."""


# Input data problems (exit code 2)

class DataError(FusionError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """A line of an input file could not be parsed."""

    def __init__(self, path: str, line_number: int, reason: str):
        self.path = path
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{path}:{line_number}: {reason}")


class NonRigidPose(DataError):
    """The rotation block of a pose is too far from orthonormal."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        super().__init__(message)


class LengthMismatch(DataError):
    """Two trajectories that must be index-aligned have different lengths."""


class FrameOutOfRange(DataError):
    """A frame index does not exist in the referenced trajectory."""


class EmptyEdgeSet(DataError):
    """An operation needs at least one odometry edge."""


class AllZeroCovisibility(DataError):
    """Every covisibility count is zero, the weight normaliser would vanish."""


class MissingPrediction(DataError):
    """A gate needs a G2S prediction that is not available."""


class DegenerateGeometry(DataError):
    """Point configuration does not determine a rigid alignment."""


class ConfigInvalid(DataError):
    """A configuration value is out of range or unknown."""


class TrajectoryTooShort(DataError):
    """Fusion needs at least two frames."""


# Numerical preconditions (exit code 2)

class GeometryError(FusionError, ValueError):
    """A geometric primitive was fed an ill-conditioned input."""


class AngleNearPi(GeometryError):
    """Rotation logarithm requested for an angle too close to pi."""


class GimbalDegenerate(GeometryError):
    """Pitch is at +-90 degrees, azimuth is undefined."""


class NotPSD(GeometryError):
    """Matrix has a clearly negative eigenvalue."""


class DegenerateCovariance(GeometryError):
    """Covariance is numerically zero, the bound scale factor is undefined."""


class SingularBound(GeometryError):
    """Spatial bound ellipse map is not invertible."""


# Optimiser failures (exit code 3)

class SolverError(FusionError):
    """The pose-graph optimiser could not produce a solution."""


class SingularSystem(SolverError):
    """Normal equations are rank deficient."""


class NonFiniteCost(SolverError):
    """Cost became NaN or infinite during the iterations."""
