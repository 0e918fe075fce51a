"""Sequential query loops: pure active learning, exploration-exploitation,
and the two reference baselines, plus the expected leader cost and the
Stackelberg equilibrium of the quadratic game.

A single run is strictly sequential (the estimate after step t feeds the
query at step t+1); independent sample paths get independent seeded
generators from the harness.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from . import _kernels
from .boxopt import minimize_on_box
from .estimation import MleSettings, SufficientStats, mle_from_stats
from .fisher import check_criterion, criterion_map, design_objective_map, maximize_design
from .game import GameConfig, follower_response, project_theta, q_matrix, require_feasible, sample_follower


# ---------------------------------------------------------------------------
# Expected leader cost and its curvature
# ---------------------------------------------------------------------------
def cost_matrix(theta, cfg: GameConfig) -> np.ndarray:
    """Hessian of the expected leader cost in uL.

    With M = Q(theta)^{-1} R1F:  QL + M'R2L M - M'R1L - R1L'M.
    """
    require_feasible(theta, cfg.kappa)
    M = np.linalg.solve(q_matrix(theta), cfg.R1F)
    B = M.T @ cfg.R1L
    C = cfg.QL + M.T @ cfg.R2L @ M - B - B.T
    return (C + C.T) / 2


def compute_C(theta, cfg: GameConfig) -> np.ndarray:
    """Scaled effective-curvature matrix C(theta) of the expected leader cost.

    Defined as half of
        QL + 2 R1F'Q^{-1}R2L Q^{-1}R1F - R1F'Q^{-1}R1L - R1L'Q^{-1}R1F;
    the R2L term carries twice the weight it has in ``cost_matrix``.  This is
    the diagnostic form reported by the CLI equilibrium command.
    """
    require_feasible(theta, cfg.kappa)
    M = np.linalg.solve(q_matrix(theta), cfg.R1F)
    B = M.T @ cfg.R1L
    C = 0.5 * (cfg.QL + 2.0 * M.T @ cfg.R2L @ M - B - B.T)
    return (C + C.T) / 2


def _cost_constant(theta, cfg: GameConfig) -> float:
    """Additive part of the expected cost: 0.5 tr(R2L Sigma(theta))."""
    sigma = np.linalg.inv(q_matrix(theta)) / cfg.lam
    return 0.5 * float(np.trace(cfg.R2L @ sigma))


def expected_leader_cost(uL, theta, cfg: GameConfig) -> float:
    """E[J^L(uL, uF)] for uF ~ p(. | uL, theta):

    0.5 uL' cost_matrix(theta) uL + 0.5 tr(R2L Sigma(theta)).
    """
    C = cost_matrix(theta, cfg)
    uL = np.asarray(uL, float)
    return float(0.5 * uL @ C @ uL + _cost_constant(theta, cfg))


def expected_cost_map(uLs, theta, cfg: GameConfig) -> np.ndarray:
    """Batched expected_leader_cost over rows of uLs."""
    C = np.ascontiguousarray(cost_matrix(theta, cfg))
    U = np.ascontiguousarray(np.asarray(uLs, dtype=float))
    return np.asarray(_kernels.cost_map(C, U)) + _cost_constant(theta, cfg)


# ---------------------------------------------------------------------------
# Exploration coefficient
# ---------------------------------------------------------------------------
@dataclass
class RhoSchedule:
    """rho_t = (mu0/t) * sigmoid(alpha * (|dtheta| - eta))."""

    mu0: float = 4e7  # numerator of the decreasing sequence mu_t = mu0 / t
    alpha: float = 1e3  # sigmoid sharpness; effectively a hard switch
    eta: float = 2.0  # estimate-stability threshold

    def __post_init__(self):
        if self.mu0 < 0 or self.alpha <= 0 or self.eta <= 0:
            raise ValueError("require mu0 >= 0, alpha > 0, eta > 0")


def rho(t, theta_t, theta_prev, sched: RhoSchedule) -> float:
    """Exploration weight from the two most recent estimates."""
    if t < 1:
        raise ValueError("t must be >= 1")
    gap = float(np.linalg.norm(np.asarray(theta_t, float) - np.asarray(theta_prev, float)))
    return (sched.mu0 / t) * float(expit(sched.alpha * (gap - sched.eta)))


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------
def _min_quad_box(C, box):
    """Exact minimizer of 0.5 u'Cu over a 2-D box (any symmetric C).

    Enumerates the interior stationary point, per-edge stationary points and
    the corners; ties go to the lexicographically smallest point.
    """
    (l1, u1), (l2, u2) = box
    cands = [(l1, l2), (l1, u2), (u1, l2), (u1, u2)]
    if C[1, 1] > 0:  # edges u1 fixed
        for x1 in (l1, u1):
            x2 = np.clip(-C[0, 1] * x1 / C[1, 1], l2, u2)
            cands.append((x1, float(x2)))
    if C[0, 0] > 0:  # edges u2 fixed
        for x2 in (l2, u2):
            x1 = np.clip(-C[0, 1] * x2 / C[0, 0], l1, u1)
            cands.append((float(x1), x2))
    if l1 <= 0 <= u1 and l2 <= 0 <= u2 and np.linalg.eigvalsh(C).min() > 0:
        cands.append((0.0, 0.0))
    pts = np.array(cands)
    vals = 0.5 * np.einsum("ki,ij,kj->k", pts, C, pts)
    vmin = vals.min()
    tied = np.flatnonzero(vals <= vmin + 1e-9 * max(1.0, abs(vmin)))
    order = np.lexsort((pts[tied, 1], pts[tied, 0]))
    best = tied[order[0]]
    return pts[best].copy(), float(vals[best])


def query_alg2(theta_hat, rho_t, c: str, cfg: GameConfig, res=25) -> np.ndarray:
    """Exploration-exploitation query: argmin over the box of

        expected_leader_cost(uL | theta_hat) - rho_t * H(uL | theta_hat).

    rho_t = 0 reduces to the pure-exploitation argmin (solved exactly as a
    box QP); rho_t > 0 uses the shared grid + local-descent search.
    """
    require_feasible(theta_hat, cfg.kappa)
    check_criterion(c)
    if rho_t < 0:
        raise ValueError("rho must be nonnegative")
    if rho_t == 0.0:
        u, _ = _min_quad_box(cost_matrix(theta_hat, cfg), cfg.leader_box)
        return u
    fun = lambda pts: expected_cost_map(pts, theta_hat, cfg) - rho_t * criterion_map(
        pts, theta_hat, cfg, c
    )
    u, _ = minimize_on_box(fun, cfg.leader_box, res=res, polish=True)
    return u


@dataclass
class EquilibriumResult:
    uL_star: np.ndarray
    cost: float  # expected leader cost at the equilibrium


def stackelberg_equilibrium(theta_true, cfg: GameConfig) -> EquilibriumResult:
    """Leader action minimizing the expected cost under the true response.

    The expected cost is a convex quadratic when its Hessian is positive
    definite, so the box-constrained minimum is found exactly; the result
    satisfies the box KKT conditions by construction.
    """
    C = cost_matrix(theta_true, cfg)
    if np.linalg.eigvalsh(C).min() <= 0:
        raise ValueError(
            "expected-cost matrix is not positive definite; "
            "the expected leader cost is not strongly convex"
        )
    u, qval = _min_quad_box(C, cfg.leader_box)
    return EquilibriumResult(uL_star=u, cost=qval + _cost_constant(theta_true, cfg))


# ---------------------------------------------------------------------------
# Trajectories and runners
# ---------------------------------------------------------------------------
@dataclass(eq=False)
class RunTrajectory:
    """Per-step log of one seeded run.

    theta_hat holds the post-update estimate of each step; criterion_value
    and expected_cost are evaluated at decision time, i.e. under the estimate
    the query was chosen with.
    """

    algorithm: str
    criterion: str
    uL: np.ndarray  # (T, n) queries
    uF: np.ndarray  # (T, h) responses
    theta_hat: np.ndarray  # (T, 3)
    rho: np.ndarray  # (T,), NaN outside algorithm 2
    criterion_value: np.ndarray  # (T,)
    expected_cost: np.ndarray  # (T,)
    seed_key: tuple | None = None  # (master_seed, path_index) when run by the harness

    def __len__(self):
        return len(self.uL)

    def __eq__(self, other):
        if not isinstance(other, RunTrajectory):
            return NotImplemented
        return (
            self.algorithm == other.algorithm
            and self.criterion == other.criterion
            and self.seed_key == other.seed_key
            and all(
                np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True)
                for f in ("uL", "uF", "theta_hat", "rho", "criterion_value", "expected_cost")
            )
        )

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "criterion": self.criterion,
            "seed_key": list(self.seed_key) if self.seed_key is not None else None,
            "uL": self.uL.tolist(),
            "uF": self.uF.tolist(),
            "theta_hat": self.theta_hat.tolist(),
            "rho": self.rho.tolist(),
            "criterion_value": self.criterion_value.tolist(),
            "expected_cost": self.expected_cost.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunTrajectory":
        return cls(
            algorithm=d["algorithm"],
            criterion=d["criterion"],
            seed_key=tuple(d["seed_key"]) if d.get("seed_key") is not None else None,
            uL=np.asarray(d["uL"], float),
            uF=np.asarray(d["uF"], float),
            theta_hat=np.asarray(d["theta_hat"], float),
            rho=np.asarray(d["rho"], float),
            criterion_value=np.asarray(d["criterion_value"], float),
            expected_cost=np.asarray(d["expected_cost"], float),
        )


def _run_loop(cfg, theta_true, settings, criterion, T, rng, query_fn, algorithm, seed_key=None):
    """Shared skeleton: query, observe, re-estimate, log."""
    if T < 1:
        raise ValueError("horizon T must be >= 1")
    require_feasible(theta_true, cfg.kappa)
    check_criterion(criterion)
    stats = SufficientStats()
    theta_prev = project_theta(np.asarray(settings.init_theta, float), cfg.kappa)
    theta_prev2 = None  # estimate before theta_prev; None marks "no estimate yet"

    uLs = np.empty((T, cfg.n))
    uFs = np.empty((T, cfg.h))
    thetas = np.empty((T, 3))
    rhos = np.full(T, np.nan)
    crits = np.empty(T)
    costs = np.empty(T)

    for t in range(1, T + 1):
        uL, rho_t = query_fn(t, theta_prev, theta_prev2, stats, rng)
        dist = follower_response(uL, theta_true, cfg)
        uF = sample_follower(dist, rng)

        crits[t - 1] = criterion_map(uL[None, :], theta_prev, cfg, criterion)[0]
        costs[t - 1] = expected_leader_cost(uL, theta_prev, cfg)
        if rho_t is not None:
            rhos[t - 1] = rho_t

        stats.update(uL, uF, cfg)
        result = mle_from_stats(stats, replace(settings, init_theta=tuple(theta_prev)), cfg)
        theta_prev2, theta_prev = theta_prev, result.theta_hat

        uLs[t - 1] = uL
        uFs[t - 1] = uF
        thetas[t - 1] = result.theta_hat

    return RunTrajectory(
        algorithm=algorithm,
        criterion=criterion,
        uL=uLs,
        uF=uFs,
        theta_hat=thetas,
        rho=rhos,
        criterion_value=crits,
        expected_cost=costs,
        seed_key=seed_key,
    )


def run_algorithm1(cfg, theta_true, settings, criterion, T, rng, seed_key=None, res=25):
    """Pure active learning: each query maximizes the chosen information
    criterion of the information accumulated so far plus the candidate's own
    contribution, evaluated under the current estimate.
    """

    def query(t, th_prev, th_prev2, stats, rng_):
        return maximize_design(stats, th_prev, criterion, cfg, res=res), None

    return _run_loop(cfg, theta_true, settings, criterion, T, rng, query, "alg1", seed_key)


def _explore_exploit_query(theta_hat, rho_t, stats, criterion, cfg, res):
    """argmin over the box of expected cost minus rho_t times the
    accumulated-information design objective (rho_t = 0 short-circuits to the
    exact exploitation QP, the same path the no-exploration baseline takes)."""
    if rho_t == 0.0:
        u, _ = _min_quad_box(cost_matrix(theta_hat, cfg), cfg.leader_box)
        return u
    fun = lambda pts: expected_cost_map(pts, theta_hat, cfg) - rho_t * design_objective_map(
        pts, stats, theta_hat, cfg, criterion
    )
    u, _ = minimize_on_box(fun, cfg.leader_box, res=res)
    return u


def run_algorithm2(cfg, theta_true, settings, criterion, sched: RhoSchedule, T, rng, seed_key=None, res=25):
    """Exploration-exploitation: expected cost minus rho_t times information.

    rho_1 treats the (undefined) first estimate difference as infinite, so the
    first step explores with full weight mu0.
    """

    def query(t, th_prev, th_prev2, stats, rng_):
        if th_prev2 is None:
            rho_t = sched.mu0 / t
        else:
            rho_t = rho(t, th_prev, th_prev2, sched)
        return _explore_exploit_query(th_prev, rho_t, stats, criterion, cfg, res), rho_t

    return _run_loop(cfg, theta_true, settings, criterion, T, rng, query, "alg2", seed_key)


def run_baseline_uniform(cfg, theta_true, settings, T, rng, criterion="E", seed_key=None, res=25):
    """Benchmark: queries drawn uniformly from the leader box."""

    def query(t, th_prev, th_prev2, stats, rng_):
        return rng_.uniform(cfg.leader_box[:, 0], cfg.leader_box[:, 1]), None

    return _run_loop(cfg, theta_true, settings, criterion, T, rng, query, "uniform", seed_key)


def run_baseline_no_exploration(cfg, theta_true, settings, T, rng, criterion="E", seed_key=None, res=25):
    """Benchmark: pure exploitation, the argmin of the estimated expected cost."""

    def query(t, th_prev, th_prev2, stats, rng_):
        return _explore_exploit_query(th_prev, 0.0, stats, criterion, cfg, res), None

    return _run_loop(cfg, theta_true, settings, criterion, T, rng, query, "no_exploration", seed_key)
