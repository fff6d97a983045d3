"""
Step implementations for the per-frame fusion flow: predict, gate, refine.
"""
import logging
from typing import Callable, List, Optional, Tuple

from src.components.g2s import G2SDelta, G2SProvider, reexpress
from src.components.selection import SpatialBound, select_frame, spatial_bound
from src.components.solver import (
    CovarianceRecovery,
    FusionProblem,
    G2SConstraint,
    gauss_newton_solve,
)
from src.components.state import FrameRecord, FusionRunState
from src.components.trajectory import relative_pose

logger = logging.getLogger('nodes')

Step = Callable[[FusionRunState], FusionRunState]


def get_bound(state: FusionRunState, k: int) -> Optional[SpatialBound]:
    """
    Spatial bound of frame k under the current trajectory, computed on first use.

    Returns None for the trusted first frame.
    """
    if k == 0:
        return None
    if k not in state.bounds:
        if state.covariance is None:
            state.covariance = CovarianceRecovery(state.problem, state.estimate)
        params = state.config.selection
        state.bounds[k] = spatial_bound(
            state.covariance.xy(k), state.estimate.R[k], state.n, frame=k,
            multiplier=params.bound_sigma_multiplier, bound_frame=params.bound_frame,
        )
    return state.bounds[k]


def cached_delta(state: FusionRunState, k: int) -> G2SDelta:
    """Cached prediction of frame k, expressed at its current pose."""
    query, delta = state.cache[k]
    return reexpress(delta, query, state.current_pose(k))


def create_predict_step(provider: G2SProvider) -> Step:
    """Create a step that queries the provider at the current pose of the frame."""

    def predict(state: FusionRunState) -> FusionRunState:
        k = state.frame
        record = FrameRecord(frame=k)
        state.record = record
        query = state.current_pose(k)
        delta = provider.query(k, query)
        if delta is None:
            record.skipped = "no_measurement"
            return state
        state.cache[k] = (query, delta)
        record.x, record.y, record.theta = delta.x, delta.y, delta.theta
        return state

    return predict


def create_gate_step() -> Step:
    """
    Create a step that gates the current frame against its nearest earlier prediction.
    """

    def gate(state: FusionRunState) -> FusionRunState:
        k, record = state.frame, state.record
        if record.skipped:
            return state

        params = state.config.gate_params()
        prev = max(f for f in state.cache if f < k)
        _, delta = state.cache[k]

        bound_prev = bound_curr = None
        if params.use_bound:
            bound_prev, bound_curr = get_bound(state, prev), get_bound(state, k)

        diag = select_frame(
            k, cached_delta(state, prev), delta, bound_prev, bound_curr,
            state.current_pose(prev), state.current_pose(k), params,
            reference=relative_pose(state.slam[prev], state.slam[k]),
        )
        record.in_bound = diag.in_bound
        record.rot_diff_deg, record.dx, record.dy = diag.rot_diff_deg, diag.dx, diag.dy
        record.in_Cr, record.in_Ct = diag.in_Cr, diag.in_Ct

        if diag.in_Cr and k not in state.C_r:
            state.C_r.add(k)
            state.pending = True
        if diag.in_Ct and k not in state.C_t:
            state.C_t.add(k)
            state.pending = True
        return state

    return gate


def build_constraints(state: FusionRunState) -> Tuple[List[G2SConstraint], List[G2SConstraint]]:
    """Selected predictions anchored at their input SLAM poses; the fixed first frame is skipped."""

    def anchored(frames):
        constraints = []
        for f in sorted(frames):
            if f == 0:
                continue
            query, delta = state.cache[f]
            constraints.append(G2SConstraint.from_delta(delta, query, state.slam[f]))
        return constraints

    return anchored(state.C_r), anchored(state.C_t)


def create_refine_step(capped: bool = False) -> Step:
    """
    Create a step that re-solves the pose graph with every selected prediction.

    The solve is warm-started from the current estimate. Afterwards the
    bounds of later frames are dropped and every cached prediction is
    re-expressed at its frame's new pose.

    Args:
        capped: Limit the solve to config.refine_max_iterations
    """

    def refine(state: FusionRunState) -> FusionRunState:
        k = state.frame
        rot_constraints, trans_constraints = build_constraints(state)
        problem = FusionProblem(
            state.estimate, state.edges, rot_constraints, trans_constraints,
            params=state.config.solver_params(capped=capped),
        )
        estimate, report = gauss_newton_solve(problem, warn_unconverged=not capped)

        for f, (query, delta) in list(state.cache.items()):
            new_query = estimate.pose(f)
            state.cache[f] = (new_query, reexpress(delta, query, new_query))

        state.estimate = estimate
        state.problem = problem
        state.covariance = None
        state.bounds = {f: b for f, b in state.bounds.items() if f <= k}
        state.pending = False
        state.converged = report.converged
        state.last_refined_frame = k
        state.log.refinements += 1

        if state.record is not None:
            state.record.refined = True
            state.record.cost_before = report.initial_cost
            state.record.cost_after = report.final_cost
            state.record.iterations = report.iterations
        logger.info(
            f"Refined at frame {k} with {len(rot_constraints)} rotation and {len(trans_constraints)} "
            f"translation constraints: cost {report.initial_cost:.4e} -> {report.final_cost:.4e} "
            f"in {report.iterations} iterations"
        )
        return state

    return refine


def should_refine(state: FusionRunState) -> str:
    """Route to 'refine' when new selections are pending and the throttle allows it."""
    config = state.config
    if (config.iterative and state.pending
            and state.frame - state.last_refined_frame >= config.refinement_interval):
        return "refine"
    return "next"
