"""Observation information matrix and the A/D/E query-design criteria.

The response is Gaussian with mean -Q^{-1}R1F uL and covariance Q^{-1}/lambda,
so the information matrix of one observation has the closed form

    F(uL | theta) = lambda * W'(v) + S / 2,
    W'_ij = v' E_i Q^{-1} E_j v,   v = Q^{-1} R1F uL,
    S_ij  = tr(Q^{-1} E_i Q^{-1} E_j),

which equals both E[score score'] and -E[Hessian] (the Hessian here does not
depend on uF, so the information equality is exact, not just in expectation).
The closed form is gated by the Monte-Carlo estimator below in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .boxopt import maximize_on_box
from .game import (
    GameConfig,
    PARAM_BASIS,
    q_matrix,
    require_feasible,
    sample_follower,
    follower_response,
)

CRITERIA = ("A", "D", "E")


def check_criterion(c: str) -> str:
    if c not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {c!r}")
    return c


def _symmetrize_psd(F):
    F = (F + F.T) / 2
    if np.linalg.eigvalsh(F).min() < -1e-10:
        raise ValueError("information matrix has a significantly negative eigenvalue")
    return F


# ---------------------------------------------------------------------------
# OIM
# ---------------------------------------------------------------------------
def oim_closed_form(uL, theta, cfg: GameConfig) -> np.ndarray:
    """Exact observation information matrix F(uL | theta), shape (3, 3)."""
    require_feasible(theta, cfg.kappa)
    qinv = np.linalg.inv(q_matrix(theta))
    v = qinv @ (cfg.R1F @ np.asarray(uL, float))
    F = np.empty((3, 3))
    for i, Ei in enumerate(PARAM_BASIS):
        for j, Ej in enumerate(PARAM_BASIS):
            F[i, j] = cfg.lam * (v @ Ei @ qinv @ Ej @ v) + 0.5 * np.trace(
                qinv @ Ei @ qinv @ Ej
            )
    return _symmetrize_psd(F)


def oim_monte_carlo(uL, theta, cfg: GameConfig, n, rng) -> np.ndarray:
    """Empirical mean of score outer products over n follower draws."""
    if n < 1:
        raise ValueError("n must be >= 1")
    require_feasible(theta, cfg.kappa)
    dist = follower_response(uL, theta, cfg)
    uf = sample_follower(dist, rng, size=n)
    qinv = np.linalg.inv(q_matrix(theta))
    v = qinv @ (cfg.R1F @ np.asarray(uL, float))
    lam = cfg.lam
    const = np.array(
        [0.5 * np.trace(qinv @ E) + 0.5 * lam * v @ E @ v for E in PARAM_BASIS]
    )
    quad = np.stack(
        [np.einsum("ki,ij,kj->k", uf, E, uf) for E in PARAM_BASIS], axis=1
    )
    scores = const[None, :] - 0.5 * lam * quad
    return (scores.T @ scores) / n


def criterion_value(F, c: str) -> float:
    """A -> trace, D -> det^(1/m), E -> smallest eigenvalue."""
    check_criterion(c)
    F = np.asarray(F, dtype=float)
    m = F.shape[0]
    if c == "A":
        return float(np.trace(F))
    if c == "D":
        det = np.linalg.det(F)
        if det < -1e-9 * max(1.0, np.abs(F).max() ** m):
            raise ValueError("negative determinant: not an information matrix")
        return float(max(det, 0.0) ** (1.0 / m))
    return float(np.linalg.eigvalsh(F)[0])


def criterion_map(uLs, theta, cfg: GameConfig, c: str) -> np.ndarray:
    """Batched H(uL | theta) over rows of uLs (the hot path of both algorithms)."""
    check_criterion(c)
    qinv = np.linalg.inv(q_matrix(theta))
    qinv = np.ascontiguousarray((qinv + qinv.T) / 2)
    V = np.ascontiguousarray(np.asarray(uLs, float) @ (qinv @ cfg.R1F).T)
    return np.asarray(
        _kernels.crit_map(V, qinv, cfg.lam, _kernels.CRITERION_CODES[c])
    )


def maximize_criterion(theta_hat, c: str, cfg: GameConfig, res=25, full_output=False):
    """Most informative query: argmax of H(uL | theta_hat) over the leader box.

    Grid scan plus projected numeric-gradient ascent; ties go to the
    lexicographically smallest action.  ``full_output`` also returns the top
    grid cells, which makes near-ties between maximizers visible.
    """
    require_feasible(theta_hat, cfg.kappa)
    fun = lambda pts: criterion_map(pts, theta_hat, cfg, c)
    out = maximize_on_box(fun, cfg.leader_box, res=res, full_output=full_output,
                          polish=True)
    if full_output:
        x, _, info = out
        return x, info
    return out[0]


# ---------------------------------------------------------------------------
# Sequential design on accumulated information
# ---------------------------------------------------------------------------
def _s_matrix(qinv) -> np.ndarray:
    """S_ij = tr(Q^{-1}E_i Q^{-1}E_j), the covariance part of the OIM."""
    p, q, r = qinv[0, 0], qinv[0, 1], qinv[1, 1]
    return np.array(
        [
            [p * p, 2 * p * q, q * q],
            [2 * p * q, 2 * (p * r + q * q), 2 * q * r],
            [q * q, 2 * q * r, r * r],
        ]
    )


def _gram_form(M2, qinv) -> np.ndarray:
    """W' evaluated on a second-moment matrix M2 = sum of v v' terms.

    Each entry of W'(v) is linear in (v1^2, v1 v2, v2^2), so summing over
    observations is the same formula applied to the summed moments.
    """
    p, q, r = qinv[0, 0], qinv[0, 1], qinv[1, 1]
    m11, m12, m22 = M2[0, 0], M2[0, 1], M2[1, 1]
    return np.array(
        [
            [p * m11, p * m12 + q * m11, q * m12],
            [p * m12 + q * m11, p * m22 + 2 * q * m12 + r * m11, q * m22 + r * m12],
            [q * m12, q * m22 + r * m12, r * m22],
        ]
    )


def accumulated_oim(stats, theta, cfg: GameConfig) -> np.ndarray:
    """Sum of per-observation OIMs of the dataset, evaluated at theta.

    The mean term of each F(uL_k | theta) is a Gram form in v_k, so the sum
    depends on past queries only through their second moment — available in
    O(1) from the running sufficient statistics.
    """
    require_feasible(theta, cfg.kappa)
    if stats is None or stats.count == 0:
        return np.zeros((3, 3))
    qinv = np.linalg.inv(q_matrix(theta))
    qinv = (qinv + qinv.T) / 2
    M2 = qinv @ (stats.count * stats.b_hat) @ qinv
    return cfg.lam * _gram_form(M2, qinv) + stats.count * 0.5 * _s_matrix(qinv)


def design_objective_map(uLs, stats, theta, cfg: GameConfig, c: str) -> np.ndarray:
    """Batched sequential-design objective over candidate queries.

    Scores each candidate u by the accumulated information it would leave:
    M(u) = sum_k F(uL_k | theta) + F(u | theta).  D and E apply the usual
    criterion to M; A uses the total-variance form -tr(M^{-1}) because the
    plain trace is additive in the candidate and therefore blind to what the
    past queries already identified.
    """
    check_criterion(c)
    qinv = np.linalg.inv(q_matrix(theta))
    qinv = np.ascontiguousarray((qinv + qinv.T) / 2)
    base = accumulated_oim(stats, theta, cfg) + 0.5 * _s_matrix(qinv)
    V = np.ascontiguousarray(np.asarray(uLs, float) @ (qinv @ cfg.R1F).T)
    return np.asarray(
        _kernels.design_map(
            V, np.ascontiguousarray(base), qinv, cfg.lam, _kernels.CRITERION_CODES[c]
        )
    )


def maximize_design(stats, theta_hat, c: str, cfg: GameConfig, res=25) -> np.ndarray:
    """Query maximizing the accumulated-information design objective."""
    require_feasible(theta_hat, cfg.kappa)
    fun = lambda pts: design_objective_map(pts, stats, theta_hat, cfg, c)
    x, _ = maximize_on_box(fun, cfg.leader_box, res=res)
    return x


# ---------------------------------------------------------------------------
# Running average F_T
# ---------------------------------------------------------------------------
@dataclass
class RunningOIM:
    """Accumulates sum and count of per-step information matrices."""

    sum: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    count: int = 0

    @property
    def average(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("no information matrices accumulated")
        return self.sum / self.count


def running_oim_update(r: RunningOIM, F) -> RunningOIM:
    """Functional update: returns a new accumulator including F."""
    return RunningOIM(sum=r.sum + np.asarray(F, float), count=r.count + 1)
