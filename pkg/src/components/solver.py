"""
Scaled pose-graph optimiser fusing SLAM odometry with selected G2S predictions.

Objective, summed over edges (i, j), rotation-selected frames l, translation-
selected frames l and consecutive frames k:

    1. w_ij sqrt(sr)  log(R~_ij R_j^T R_i)
    2. w_ij sqrt(st)  (t~_ij - s_j R_i^T (t_j - t_i))
    3. sqrt(sr_g2s)   log(R_l^T R~_l R^_l)
    4. D (t^_l - R~_l^T (t_l - t~_l)),  D = diag(sqrt(stx), sqrt(sty), 0), Huber-robustified
    5. sqrt(ss)       (s_k - s_{k-1})

The sigma values are weights, not variances. Terms 1, 2, 3, 5 enter as
0.5 ||r||^2, term 4 as rho(||r||) with the Huber function rho.
Rotations are perturbed on the left, R <- exp(d) R.
"""
import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.sparse.linalg import splu
from pydantic import BaseModel, ConfigDict, Field

from src.components.g2s import G2SDelta, compose_correction, extract_delta
from src.components.geometry import Pose, hat, rot_z, so3_exp, so3_left_jacobian_inverse, so3_log
from src.components.trajectory import OdometryEdge, Trajectory
from src.utils.errors import FrameOutOfRange, NonFiniteCost, SingularSystem

logger = logging.getLogger('solver')

BLOCK = 7  # rotation 0-2, translation 3-5, scale 6
TERMS = ("slam_rotation", "slam_translation", "g2s_rotation", "g2s_translation", "scale")


class Hyperparams(BaseModel):
    """Term weights and iteration control of the optimiser."""
    model_config = ConfigDict(extra="forbid")

    sigma_r_slam: float = Field(default=0.85 ** 2, ge=0.0)
    sigma_t_slam: float = Field(default=0.9 ** 2, ge=0.0)
    sigma_r_g2s: float = Field(default=1.0, ge=0.0)
    sigma_tx_g2s: float = Field(default=0.003 ** 2, ge=0.0)
    sigma_ty_g2s: float = Field(default=0.005 ** 2, ge=0.0)
    sigma_s: float = Field(default=10.0 ** 2, ge=0.0)
    huber_c: float = Field(default=1.0, gt=0.0)
    huber_on_squared: bool = False
    max_iterations: int = Field(default=50, ge=1)
    step_tolerance: float = Field(default=1e-10, ge=0.0)
    cost_tolerance: float = Field(default=1e-12, ge=0.0)
    lm_damping_init: float = Field(default=0.0, ge=0.0)
    estimate_scale: bool = True
    fix_first_scale: bool = True
    dense_max_nodes: int = Field(default=1000, ge=0)

    @classmethod
    def whitened(cls, rot_slam_std: float, trans_slam_std: float, rot_g2s_std: float,
                 tx_g2s_std: float, ty_g2s_std: float, scale_std: float, **kwargs) -> "Hyperparams":
        """
        Weights as inverse variances of the given noise standard deviations.

        Args:
            rot_slam_std: Odometry rotation noise per edge, radians
            trans_slam_std: Odometry translation noise per edge, meters
            rot_g2s_std: G2S azimuth noise, radians
            tx_g2s_std: G2S longitudinal noise, meters
            ty_g2s_std: G2S lateral noise, meters
            scale_std: Scale random-walk step, unitless
            **kwargs: Any other Hyperparams field

        Returns:
            Hyperparams
        """
        return cls(
            sigma_r_slam=1.0 / rot_slam_std ** 2,
            sigma_t_slam=1.0 / trans_slam_std ** 2,
            sigma_r_g2s=1.0 / rot_g2s_std ** 2,
            sigma_tx_g2s=1.0 / tx_g2s_std ** 2,
            sigma_ty_g2s=1.0 / ty_g2s_std ** 2,
            sigma_s=1.0 / scale_std ** 2,
            **kwargs,
        )


@dataclass
class FusionState:
    """Rotations (N, 3, 3), translations (N, 3) and scales (N,)."""
    R: np.ndarray
    t: np.ndarray
    s: np.ndarray

    @classmethod
    def from_trajectory(cls, trajectory: Trajectory, scales: Optional[np.ndarray] = None) -> "FusionState":
        n = len(trajectory)
        return cls(
            trajectory.rotations.copy(),
            trajectory.translations.copy(),
            np.ones(n) if scales is None else np.array(scales, dtype=float),
        )

    def copy(self) -> "FusionState":
        return FusionState(self.R.copy(), self.t.copy(), self.s.copy())

    def to_trajectory(self, timestamps: Optional[np.ndarray] = None) -> Trajectory:
        return Trajectory(self.R.copy(), self.t.copy(), timestamps)

    def pose(self, k: int) -> Pose:
        return Pose(self.R[k], self.t[k])

    def __len__(self) -> int:
        return len(self.s)


@dataclass(frozen=True, eq=False)
class G2SConstraint:
    """
    A selected G2S prediction anchored at the input pose (R~, t~) of its frame.

    The claimed pose is R = R~ rot_z(theta), t = t~ + R~ (x, y, 0).
    """
    frame: int
    R_input: np.ndarray
    t_input: np.ndarray
    x: float
    y: float
    theta: float

    @classmethod
    def from_delta(cls, delta: G2SDelta, T_query: Pose, T_input: Pose) -> "G2SConstraint":
        """Re-anchor a delta predicted at T_query to the frame's input pose."""
        anchored = extract_delta(T_input, compose_correction(T_query, delta), frame=delta.frame)
        return cls(delta.frame, T_input.rotation, T_input.translation, anchored.x, anchored.y, anchored.theta)

    @property
    def R_breve(self) -> np.ndarray:
        return rot_z(self.theta)

    @property
    def t_breve(self) -> np.ndarray:
        return np.array([self.x, self.y, 0.0])


class FusionProblem:
    """
    Scaled pose graph: initial state, odometry edges, selected G2S constraints.

    Node poses listed in fixed are held at their initial value; their scales
    are held too unless params.fix_first_scale is False.
    """

    def __init__(self, initial: FusionState, edges: Sequence[OdometryEdge],
                 rot_constraints: Sequence[G2SConstraint] = (),
                 trans_constraints: Sequence[G2SConstraint] = (),
                 params: Optional[Hyperparams] = None, fixed: Sequence[int] = (0,)):
        self.initial = initial
        self.params = params or Hyperparams()
        self.n_nodes = len(initial)
        self.edges = list(edges)
        self.rot_constraints = list(rot_constraints)
        self.trans_constraints = list(trans_constraints)
        self.fixed = np.zeros(self.n_nodes, dtype=bool)
        self.fixed[list(fixed)] = True

        n = self.n_nodes
        for e in self.edges:
            if not (0 <= e.i < e.j < n):
                raise FrameOutOfRange(f"Edge ({e.i}, {e.j}) outside {n} nodes")
        for c in self.rot_constraints + self.trans_constraints:
            if not 0 <= c.frame < n:
                raise FrameOutOfRange(f"G2S constraint for frame {c.frame} outside {n} nodes")

        self.edge_i = np.array([e.i for e in self.edges], dtype=int)
        self.edge_j = np.array([e.j for e in self.edges], dtype=int)
        self.edge_R = np.array([e.relative_pose.rotation for e in self.edges]).reshape(-1, 3, 3)
        self.edge_t = np.array([e.relative_pose.translation for e in self.edges]).reshape(-1, 3)
        self.edge_w = np.array([e.weight for e in self.edges], dtype=float)

        self.rot_frames = np.array([c.frame for c in self.rot_constraints], dtype=int)
        self.rot_target = np.array([c.R_input @ c.R_breve for c in self.rot_constraints]).reshape(-1, 3, 3)

        self.trans_frames = np.array([c.frame for c in self.trans_constraints], dtype=int)
        self.trans_R = np.array([c.R_input for c in self.trans_constraints]).reshape(-1, 3, 3)
        self.trans_t = np.array([c.t_input for c in self.trans_constraints]).reshape(-1, 3)
        self.trans_breve = np.array([c.t_breve for c in self.trans_constraints]).reshape(-1, 3)

        self.free_columns = self._free_columns()
        self.column_map = np.full(BLOCK * n, -1, dtype=int)
        self.column_map[self.free_columns] = np.arange(len(self.free_columns))

        sizes = (3 * len(self.edges), 3 * len(self.edges), 3 * len(self.rot_constraints),
                 3 * len(self.trans_constraints), n - 1 if self.params.estimate_scale else 0)
        offsets = np.concatenate(([0], np.cumsum(sizes)))
        self.slices: Dict[str, slice] = {
            name: slice(int(offsets[k]), int(offsets[k + 1])) for k, name in enumerate(TERMS)
        }
        self.n_residuals = int(offsets[-1])

    def _free_columns(self) -> np.ndarray:
        columns = []
        scale_free = ~self.fixed if self.params.fix_first_scale else np.ones(self.n_nodes, dtype=bool)
        for k in range(self.n_nodes):
            if not self.fixed[k]:
                columns.extend(range(BLOCK * k, BLOCK * k + 6))
            if self.params.estimate_scale and scale_free[k]:
                columns.append(BLOCK * k + 6)
        return np.array(sorted(columns), dtype=int)

    @property
    def n_free(self) -> int:
        return len(self.free_columns)

    @property
    def n_free_nodes(self) -> int:
        return int((~self.fixed).sum())

    def retract(self, state: FusionState, dx: np.ndarray) -> FusionState:
        """Apply an increment over the free columns: R <- exp(d) R, t += dt, s += ds."""
        full = np.zeros(BLOCK * self.n_nodes)
        full[self.free_columns] = dx
        full = full.reshape(self.n_nodes, BLOCK)
        return FusionState(
            so3_exp(full[:, 0:3]) @ state.R,
            state.t + full[:, 3:6],
            state.s + full[:, 6],
        )


def _log(Rs: np.ndarray) -> np.ndarray:
    return so3_log(Rs) if len(Rs) else np.zeros((0, 3))


@dataclass
class Residuals:
    """Stacked weighted residuals with per-term slices."""
    vector: np.ndarray
    slices: Dict[str, slice]

    def term(self, name: str) -> np.ndarray:
        return self.vector[self.slices[name]]


def evaluate_residuals(problem: FusionProblem, state: FusionState) -> Residuals:
    """
    Weighted residuals of all five terms (no robust reweighting).

    Args:
        problem: Fusion problem
        state: Current estimate

    Returns:
        Residuals: Stacked vector and per-term slices
    """
    p = problem.params
    R, t, s = state.R, state.t, state.s
    i, j = problem.edge_i, problem.edge_j

    c1 = math.sqrt(p.sigma_r_slam) * problem.edge_w
    r1 = c1[:, None] * _log(problem.edge_R @ np.swapaxes(R[j], 1, 2) @ R[i])

    c2 = math.sqrt(p.sigma_t_slam) * problem.edge_w
    u = np.einsum('eji,ej->ei', R[i], t[j] - t[i])
    r2 = c2[:, None] * (problem.edge_t - s[j, None] * u)

    l3 = problem.rot_frames
    r3 = math.sqrt(p.sigma_r_g2s) * _log(np.swapaxes(R[l3], 1, 2) @ problem.rot_target)

    l4 = problem.trans_frames
    D = np.array([math.sqrt(p.sigma_tx_g2s), math.sqrt(p.sigma_ty_g2s), 0.0])
    r4 = D * (problem.trans_breve - np.einsum('eji,ej->ei', problem.trans_R, t[l4] - problem.trans_t))

    parts = [r1.reshape(-1), r2.reshape(-1), r3.reshape(-1), r4.reshape(-1)]
    if p.estimate_scale:
        parts.append(math.sqrt(p.sigma_s) * np.diff(s))
    return Residuals(np.concatenate(parts), dict(problem.slices))


def _block_entries(row0: np.ndarray, col0: np.ndarray, blocks: np.ndarray):
    """COO triplets of dense (B, r, c) blocks placed at (row0[b], col0[b])."""
    B, r, c = blocks.shape
    rows = row0[:, None, None] + np.arange(r)[None, :, None]
    cols = col0[:, None, None] + np.arange(c)[None, None, :]
    rows, cols = np.broadcast_arrays(rows, cols)
    return rows.reshape(-1), cols.reshape(-1), blocks.reshape(-1)


def evaluate_jacobian(problem: FusionProblem, state: FusionState) -> sp.csr_matrix:
    """
    Analytic Jacobian of evaluate_residuals over the free columns.

    Returns:
        Sparse (n_residuals, n_free) matrix
    """
    p = problem.params
    R, t, s = state.R, state.t, state.s
    i, j = problem.edge_i, problem.edge_j
    E = len(i)
    entries = []

    # term 1
    row0 = problem.slices["slam_rotation"].start + 3 * np.arange(E)
    A = problem.edge_R @ np.swapaxes(R[j], 1, 2)
    phi = _log(A @ R[i])
    B = (math.sqrt(p.sigma_r_slam) * problem.edge_w)[:, None, None] * so3_left_jacobian_inverse(phi) @ A
    entries.append(_block_entries(row0, BLOCK * i, B))
    entries.append(_block_entries(row0, BLOCK * j, -B))

    # term 2
    row0 = problem.slices["slam_translation"].start + 3 * np.arange(E)
    c = math.sqrt(p.sigma_t_slam) * problem.edge_w
    Rit = np.swapaxes(R[i], 1, 2)
    d = t[j] - t[i]
    u = np.einsum('eij,ej->ei', Rit, d)
    cs = (c * s[j])[:, None, None]
    entries.append(_block_entries(row0, BLOCK * i, -cs * Rit @ hat(d)))
    entries.append(_block_entries(row0, BLOCK * i + 3, cs * Rit))
    entries.append(_block_entries(row0, BLOCK * j + 3, -cs * Rit))
    entries.append(_block_entries(row0, BLOCK * j + 6, (-c[:, None] * u)[:, :, None]))

    # term 3
    l3 = problem.rot_frames
    row0 = problem.slices["g2s_rotation"].start + 3 * np.arange(len(l3))
    Rlt = np.swapaxes(R[l3], 1, 2)
    phi = _log(Rlt @ problem.rot_target)
    entries.append(_block_entries(
        row0, BLOCK * l3, -math.sqrt(p.sigma_r_g2s) * so3_left_jacobian_inverse(phi) @ Rlt
    ))

    # term 4
    l4 = problem.trans_frames
    row0 = problem.slices["g2s_translation"].start + 3 * np.arange(len(l4))
    D = np.array([math.sqrt(p.sigma_tx_g2s), math.sqrt(p.sigma_ty_g2s), 0.0])
    entries.append(_block_entries(row0, BLOCK * l4 + 3, -D[None, :, None] * np.swapaxes(problem.trans_R, 1, 2)))

    # term 5
    if p.estimate_scale and problem.n_nodes > 1:
        k = np.arange(1, problem.n_nodes)
        row0 = problem.slices["scale"].start + (k - 1)
        cs5 = math.sqrt(p.sigma_s)
        entries.append(_block_entries(row0, BLOCK * k + 6, np.full((len(k), 1, 1), cs5)))
        entries.append(_block_entries(row0, BLOCK * (k - 1) + 6, np.full((len(k), 1, 1), -cs5)))

    rows = np.concatenate([e[0] for e in entries])
    cols = np.concatenate([e[1] for e in entries])
    vals = np.concatenate([e[2] for e in entries])
    mapped = problem.column_map[cols]
    keep = mapped >= 0
    return sp.coo_matrix(
        (vals[keep], (rows[keep], mapped[keep])),
        shape=(problem.n_residuals, problem.n_free),
    ).tocsr()


def huber_irls_weight(residual_norm, c: float):
    """
    Iteratively-reweighted least-squares weight of the Huber kernel.

    Args:
        residual_norm: Norm(s) of the weighted residual block
        c: Huber threshold

    Returns:
        1 where norm < c, c / norm elsewhere
    """
    norm = np.asarray(residual_norm, dtype=float)
    weight = np.where(norm < c, 1.0, c / np.maximum(norm, np.finfo(float).tiny))
    return float(weight) if weight.ndim == 0 else weight


def _term4_norms(problem: FusionProblem, residuals: Residuals) -> np.ndarray:
    return np.linalg.norm(residuals.term("g2s_translation").reshape(-1, 3), axis=1)


def robust_weights(problem: FusionProblem, residuals: Residuals) -> np.ndarray:
    """Per-block IRLS weights of term 4."""
    norms = _term4_norms(problem, residuals)
    c = problem.params.huber_c
    if problem.params.huber_on_squared:
        return huber_irls_weight(norms ** 2, c)
    return huber_irls_weight(norms, c)


def _huber_rho(norms: np.ndarray, c: float, on_squared: bool) -> np.ndarray:
    if on_squared:
        # Kernel whose IRLS weight is min(1, c / ||r||^2)
        sq = norms ** 2
        return np.where(sq < c, 0.5 * sq, 0.5 * c * (1.0 + np.log(np.maximum(sq, c) / c)))
    return np.where(norms < c, 0.5 * norms ** 2, c * (norms - 0.5 * c))


def term_costs(problem: FusionProblem, residuals: Residuals) -> Dict[str, float]:
    costs = {name: 0.5 * float(residuals.term(name) @ residuals.term(name)) for name in TERMS}
    p = problem.params
    costs["g2s_translation"] = float(_huber_rho(_term4_norms(problem, residuals), p.huber_c, p.huber_on_squared).sum())
    return costs


def robust_cost(problem: FusionProblem, state: FusionState) -> float:
    """Total objective: 0.5 ||r||^2 for terms 1, 2, 3, 5 plus Huber rho of term-4 block norms."""
    return float(sum(term_costs(problem, evaluate_residuals(problem, state)).values()))


def _row_weights(problem: FusionProblem, residuals: Residuals) -> np.ndarray:
    weights = np.ones(problem.n_residuals)
    weights[problem.slices["g2s_translation"]] = np.repeat(np.sqrt(robust_weights(problem, residuals)), 3)
    return weights


def normal_matrix(problem: FusionProblem, state: FusionState) -> Tuple[sp.csc_matrix, np.ndarray]:
    """
    Reweighted normal equations J^T W J and gradient J^T W r at state.
    """
    residuals = evaluate_residuals(problem, state)
    w = _row_weights(problem, residuals)
    Jw = sp.diags(w) @ evaluate_jacobian(problem, state)
    rw = w * residuals.vector
    return (Jw.T @ Jw).tocsc(), Jw.T @ rw


class _Factorization:
    """Dense Cholesky or sparse LU of a normal matrix, chosen by problem size."""

    def __init__(self, H: sp.spmatrix, dense: bool):
        self.dense = dense
        try:
            if dense:
                Hd = H.toarray()
                self._factor = cho_factor(Hd, lower=True, check_finite=True)
                pivots = np.diag(self._factor[0]) ** 2
                if pivots.min() <= 1e-13 * max(np.abs(np.diag(Hd)).max(), 1e-300):
                    raise SingularSystem("Normal matrix is numerically rank deficient")
            else:
                self._factor = splu(H.tocsc())
        except (LinAlgError, RuntimeError, ValueError) as e:
            raise SingularSystem(f"Normal matrix factorisation failed: {str(e)}") from e

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = cho_solve(self._factor, b) if self.dense else self._factor.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularSystem("Normal equations produced a non-finite solution")
        return x


def _factorize(problem: FusionProblem, H: sp.spmatrix) -> _Factorization:
    if problem.n_free == 0:
        raise SingularSystem("Problem has no free variables")
    return _Factorization(H, dense=problem.n_free_nodes <= problem.params.dense_max_nodes)


class SolverReport(BaseModel):
    """Outcome of one optimisation."""
    iterations: int = 0
    cost_history: List[float] = Field(default_factory=list)
    term_costs: Dict[str, float] = Field(default_factory=dict)
    converged: bool = False
    termination_reason: Literal[
        "step_tolerance", "cost_tolerance", "zero_cost", "max_iterations", "no_decrease"
    ] = "max_iterations"

    @property
    def initial_cost(self) -> float:
        return self.cost_history[0]

    @property
    def final_cost(self) -> float:
        return self.cost_history[-1]


def gauss_newton_solve(problem: FusionProblem, initial: Optional[FusionState] = None,
                       warn_unconverged: bool = True) -> Tuple[FusionState, SolverReport]:
    """
    Minimise the robust objective by Gauss-Newton with IRLS reweighting.

    Levenberg-Marquardt damping (lambda * diag(H)) is used when
    params.lm_damping_init > 0; a step that raises the cost is then retried
    with ten times the damping.

    Args:
        problem: Fusion problem
        initial: Starting state, defaults to problem.initial
        warn_unconverged: Log a warning when max_iterations is reached, debug otherwise

    Returns:
        (state, SolverReport)

    Raises:
        SingularSystem: rank-deficient normal equations
        NonFiniteCost: cost became NaN or infinite
    """
    p = problem.params
    state = (initial or problem.initial).copy()
    cost = robust_cost(problem, state)
    if not math.isfinite(cost):
        raise NonFiniteCost("Initial cost is not finite")

    report = SolverReport(cost_history=[cost])
    lam = p.lm_damping_init

    for iteration in range(1, p.max_iterations + 1):
        report.iterations = iteration
        if cost == 0.0:
            report.converged, report.termination_reason = True, "zero_cost"
            break

        H, g = normal_matrix(problem, state)
        accepted = False
        for _ in range(10 if lam > 0.0 else 1):
            A = H + lam * sp.diags(H.diagonal()) if lam > 0.0 else H
            dx = -_factorize(problem, A).solve(g)
            candidate = problem.retract(state, dx)
            new_cost = robust_cost(problem, candidate)
            if not math.isfinite(new_cost):
                raise NonFiniteCost(f"Cost became non-finite at iteration {iteration}")
            if lam == 0.0 or new_cost <= cost:
                accepted = True
                break
            lam *= 10.0
            logger.debug(f"Iteration {iteration}: cost rose to {new_cost:.6e}, damping raised to {lam:.3e}")

        if not accepted:
            report.termination_reason = "no_decrease"
            logger.warning(f"Solver stopped at iteration {iteration}: no damped step decreased the cost")
            break

        if lam > 0.0:
            lam = max(lam / 10.0, 1e-12)
        step = float(np.linalg.norm(dx))
        previous, cost, state = cost, new_cost, candidate
        report.cost_history.append(cost)
        logger.debug(f"Iteration {iteration}: cost {previous:.6e} -> {cost:.6e}, |dx| = {step:.3e}")

        if step < p.step_tolerance:
            report.converged, report.termination_reason = True, "step_tolerance"
            break
        if abs(previous - cost) <= p.cost_tolerance * max(previous, np.finfo(float).tiny):
            report.converged, report.termination_reason = True, "cost_tolerance"
            break

    if not report.converged and report.termination_reason == "max_iterations":
        log = logger.warning if warn_unconverged else logger.debug
        log(f"Solver reached {p.max_iterations} iterations without converging")

    report.term_costs = term_costs(problem, evaluate_residuals(problem, state))
    return state, report


class CovarianceRecovery:
    """
    Marginal world x-y covariances from the inverse of the reweighted normal matrix.

    The factorisation is computed once; node blocks are solved on demand and cached.
    """

    def __init__(self, problem: FusionProblem, state: FusionState):
        self.problem = problem
        H, _ = normal_matrix(problem, state)
        self._factor = _factorize(problem, H)
        self._cache: Dict[int, np.ndarray] = {}

    def _columns(self, k: int) -> Tuple[int, int]:
        return (int(self.problem.column_map[BLOCK * k + 3]), int(self.problem.column_map[BLOCK * k + 4]))

    def prefetch(self, nodes: Sequence[int]) -> None:
        """Solve for the x-y blocks of several nodes in one pass."""
        nodes = list(nodes)
        pending = [k for k in dict.fromkeys(nodes) if k not in self._cache and not self.problem.fixed[k]]
        for k in nodes:
            if self.problem.fixed[k]:
                self._cache[k] = np.zeros((2, 2))
        if not pending:
            return
        columns = [c for k in pending for c in self._columns(k)]
        rhs = np.zeros((self.problem.n_free, len(columns)))
        rhs[columns, np.arange(len(columns))] = 1.0
        X = self._factor.solve(rhs)
        for m, k in enumerate(pending):
            block = X[columns[2 * m:2 * m + 2], 2 * m:2 * m + 2]
            self._cache[k] = 0.5 * (block + block.T)

    def xy(self, k: int) -> np.ndarray:
        if k not in self._cache:
            self.prefetch([k])
        return self._cache[k]

    def all(self) -> np.ndarray:
        self.prefetch(range(self.problem.n_nodes))
        return np.stack([self._cache[k] for k in range(self.problem.n_nodes)])


def marginal_xy_covariances(problem: FusionProblem, state: FusionState) -> np.ndarray:
    """
    2x2 world x-y covariance of every node, (N, 2, 2); fixed nodes are zero.

    Raises:
        SingularSystem: normal matrix not invertible
    """
    return CovarianceRecovery(problem, state).all()


def slam_only_problem(trajectory: Trajectory, edges: Sequence[OdometryEdge],
                      params: Optional[Hyperparams] = None) -> FusionProblem:
    """Odometry and scale terms only, at the input trajectory with unit scales."""
    return FusionProblem(FusionState.from_trajectory(trajectory), edges, params=params)


def slam_only_covariances(trajectory: Trajectory, edges: Sequence[OdometryEdge],
                          params: Optional[Hyperparams] = None) -> np.ndarray:
    """Marginal x-y covariances of the SLAM-only problem, node 0 fixed."""
    problem = slam_only_problem(trajectory, edges, params)
    return marginal_xy_covariances(problem, problem.initial)
