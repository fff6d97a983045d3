"""
State definitions for the per-frame fusion flow.
"""
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Mapping, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.components.g2s import G2SDelta, OracleNoise
from src.components.geometry import Pose
from src.components.selection import SelectionParams, SpatialBound
from src.components.solver import CovarianceRecovery, FusionProblem, FusionState, Hyperparams
from src.components.trajectory import OdometryEdge, Trajectory
from src.utils.errors import ConfigInvalid

Mode = Literal["full", "all_g2s", "spb_only", "voc_only", "no_scale", "non_iterative"]
MODES: Tuple[str, ...] = ("full", "all_g2s", "spb_only", "voc_only", "no_scale", "non_iterative")


class PipelineConfig(BaseModel):
    """
    Everything a fusion run needs besides its inputs.
    """
    model_config = ConfigDict(extra="forbid")

    selection: SelectionParams = Field(default_factory=SelectionParams)
    solver: Hyperparams = Field(default_factory=Hyperparams)
    mode: Mode = "full"

    # Minimum number of frames between two solves; pending selections get a final solve
    refinement_interval: int = Field(default=1, ge=1)
    # Iteration cap for warm-started solves inside the loop; None uses solver.max_iterations
    refine_max_iterations: Optional[int] = Field(default=None, ge=1)

    provider: Literal["oracle", "file"] = "oracle"
    oracle: OracleNoise = Field(default_factory=OracleNoise)

    @property
    def iterative(self) -> bool:
        return self.mode not in ("all_g2s", "non_iterative")

    @property
    def use_bound(self) -> bool:
        return self.mode not in ("all_g2s", "voc_only")

    @property
    def use_voc(self) -> bool:
        return self.mode not in ("all_g2s", "spb_only")

    def gate_params(self) -> SelectionParams:
        """Selection thresholds with the gates this mode enables."""
        return self.selection.model_copy(update={"use_bound": self.use_bound, "use_voc": self.use_voc})

    def solver_params(self, capped: bool = False) -> Hyperparams:
        """Solver settings for this mode; capped applies refine_max_iterations."""
        update = {}
        if self.mode == "no_scale":
            update["estimate_scale"] = False
        if capped and self.refine_max_iterations is not None:
            update["max_iterations"] = min(self.refine_max_iterations, self.solver.max_iterations)
        return self.solver.model_copy(update=update) if update else self.solver

    def with_mode(self, mode: str) -> "PipelineConfig":
        if mode not in MODES:
            raise ConfigInvalid(f"Unknown mode '{mode}', expected one of {MODES}")
        return self.model_copy(update={"mode": mode})

    @classmethod
    def from_sections(cls, sections: Mapping[str, Mapping[str, Any]]) -> "PipelineConfig":
        """
        Build a config from resolved configuration sections.

        Args:
            sections: Section -> {key: value}, as returned by config.load_sections

        Returns:
            PipelineConfig

        Raises:
            ConfigInvalid: unknown keys or values out of range
        """
        try:
            pipeline = dict(sections.get("pipeline", {}))
            return cls(
                selection=SelectionParams(**sections.get("selection", {})),
                solver=Hyperparams(**sections.get("solver", {})),
                oracle=OracleNoise(**sections.get("oracle", {})),
                **pipeline,
            )
        except (ValidationError, TypeError) as e:
            raise ConfigInvalid(f"Invalid configuration: {str(e)}") from e


class FrameRecord(BaseModel):
    """One line of the run log."""
    model_config = ConfigDict(validate_assignment=True)

    frame: int
    x: Optional[float] = None
    y: Optional[float] = None
    theta: Optional[float] = None
    in_bound: Optional[bool] = None
    rot_diff_deg: Optional[float] = None
    dx: Optional[float] = None
    dy: Optional[float] = None
    in_Cr: bool = False
    in_Ct: bool = False
    refined: bool = False
    cost_before: Optional[float] = None
    cost_after: Optional[float] = None
    iterations: Optional[int] = None
    skipped: Optional[str] = None

    @field_validator("in_bound", "in_Cr", "in_Ct", "refined", mode="before")
    @classmethod
    def _plain_bool(cls, v):
        return v if v is None else bool(v)

    @field_validator("x", "y", "theta", "rot_diff_deg", "dx", "dy", "cost_before", "cost_after", mode="before")
    @classmethod
    def _plain_float(cls, v):
        return v if v is None else float(v)

    @field_validator("frame", "iterations", mode="before")
    @classmethod
    def _plain_int(cls, v):
        return v if v is None else int(v)


class PipelineLog(BaseModel):
    """Per-frame records of a run plus its outcome."""
    mode: str = "full"
    records: List[FrameRecord] = Field(default_factory=list)
    refinements: int = 0
    aborted: bool = False
    diagnostic: Optional[str] = None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.model_dump(mode="json"), sort_keys=True) + "\n" for r in self.records)


@dataclass
class FusionRunState:
    """
    Mutable state threaded through the per-frame steps.
    """

    slam: Trajectory
    edges: List[OdometryEdge]
    config: PipelineConfig
    estimate: FusionState

    # Bound normaliser from the SLAM-only first-frame covariance
    n: Optional[float] = None
    covariance: Optional[CovarianceRecovery] = None
    bounds: Dict[int, Optional[SpatialBound]] = field(default_factory=dict)

    # frame -> (query pose, delta expressed at that pose)
    cache: Dict[int, Tuple[Pose, G2SDelta]] = field(default_factory=dict)
    C_r: Set[int] = field(default_factory=set)
    C_t: Set[int] = field(default_factory=set)

    frame: int = 0
    record: Optional[FrameRecord] = None
    pending: bool = False
    last_refined_frame: int = 0
    converged: bool = True
    problem: Optional[FusionProblem] = None

    log: PipelineLog = field(default_factory=PipelineLog)

    def current_pose(self, k: int) -> Pose:
        return self.estimate.pose(k)

    @property
    def scales(self) -> np.ndarray:
        return self.estimate.s
