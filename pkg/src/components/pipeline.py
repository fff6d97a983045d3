"""
Iterative G2S-SLAM fusion: per-frame predict -> gate -> (refine) over a SLAM trajectory.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from src.components.g2s import G2SDelta, G2SProvider
from src.components.nodes import (
    create_gate_step,
    create_predict_step,
    create_refine_step,
    should_refine,
)
from src.components.selection import scale_factor
from src.components.solver import CovarianceRecovery, FusionState, slam_only_problem
from src.components.state import MODES, FusionRunState, PipelineConfig, PipelineLog
from src.components.trajectory import OdometryEdge, Trajectory
from src.utils.errors import EmptyEdgeSet, SolverError, TrajectoryTooShort

logger = logging.getLogger('pipeline')


@dataclass
class FusionResult:
    """Output of one fusion run."""
    trajectory: Trajectory
    scales: np.ndarray
    log: PipelineLog
    C_r: List[int] = field(default_factory=list)
    C_t: List[int] = field(default_factory=list)

    @property
    def aborted(self) -> bool:
        return self.log.aborted


def _initial_state(slam: Trajectory, edges: Sequence[OdometryEdge], config: PipelineConfig) -> FusionRunState:
    problem = slam_only_problem(slam, edges, config.solver_params())
    state = FusionRunState(
        slam=slam,
        edges=list(edges),
        config=config,
        estimate=FusionState.from_trajectory(slam),
        problem=problem,
    )
    state.log.mode = config.mode
    state.cache[0] = (slam[0], G2SDelta(frame=0, x=0.0, y=0.0, theta=0.0))
    state.C_r.add(0)
    state.C_t.add(0)
    if config.use_bound:
        state.covariance = CovarianceRecovery(problem, state.estimate)
        state.n = scale_factor(state.covariance.xy(1), config.selection.r)
        logger.info(f"Bound scale factor n = {state.n:.6g}")
    return state


def run_iterative_fusion(slam: Trajectory, edges: Sequence[OdometryEdge], provider: G2SProvider,
                         config: Optional[PipelineConfig] = None) -> FusionResult:
    """
    Fuse G2S predictions into a SLAM trajectory frame by frame.

    For every frame the provider is queried at the current pose, the
    prediction is gated and, when it enters C_r or C_t, the pose graph is
    re-solved with all selections so far, at most once every
    refinement_interval frames and with at most refine_max_iterations
    iterations. A final uncapped solve runs when selections are pending or
    the last solve stopped early. Non-iterative modes gate the whole
    sequence first and solve once at the end.

    Args:
        slam: Input SLAM trajectory (at least two frames)
        edges: Odometry edges, consecutive plus optional loop closures
        provider: Source of G2S predictions
        config: Pipeline configuration, defaults to PipelineConfig()

    Returns:
        FusionResult: Final trajectory, per-pose scales and the run log. If a
        solve fails the run stops with the last consistent trajectory and
        log.aborted set.
    """
    config = config or PipelineConfig()
    if len(slam) < 2:
        raise TrajectoryTooShort(f"Fusion needs at least two frames, got {len(slam)}")
    if not edges:
        raise EmptyEdgeSet("Fusion needs odometry edges")

    state = _initial_state(slam, edges, config)

    predict = create_predict_step(provider)
    gate = create_gate_step()
    refine = create_refine_step(capped=True)
    finish = create_refine_step()

    logger.info(f"Starting {config.mode} fusion over {len(slam)} frames")
    try:
        for k in range(1, len(slam)):
            state.frame = k
            state = gate(predict(state))
            state.log.records.append(state.record)
            if should_refine(state) == "refine":
                state = refine(state)

        if state.pending or not state.converged:
            state.record = None
            state.frame = len(slam) - 1
            state = finish(state)
    except SolverError as e:
        state.log.aborted = True
        state.log.diagnostic = f"Refinement at frame {state.frame} failed: {str(e)}"
        logger.error(f"Aborting fusion: {state.log.diagnostic}")

    logger.info(
        f"Finished {config.mode} fusion: {state.log.refinements} refinements, "
        f"{len(state.C_r)} rotation / {len(state.C_t)} translation selections"
    )
    return FusionResult(
        trajectory=state.estimate.to_trajectory(slam.timestamps),
        scales=state.estimate.s.copy(),
        log=state.log,
        C_r=sorted(state.C_r),
        C_t=sorted(state.C_t),
    )


def run_mode_variant(slam: Trajectory, edges: Sequence[OdometryEdge], provider: G2SProvider,
                     config: PipelineConfig, mode: str) -> FusionResult:
    """Run the pipeline under one of the ablation modes."""
    return run_iterative_fusion(slam, edges, provider, config.with_mode(mode))


def run_ablation(slam: Trajectory, edges: Sequence[OdometryEdge], provider: G2SProvider,
                 config: PipelineConfig, modes: Iterable[str] = MODES) -> Dict[str, FusionResult]:
    """Run every requested mode on the same inputs."""
    results = {}
    for mode in modes:
        results[mode] = run_mode_variant(slam, edges, provider, config, mode)
    return results
