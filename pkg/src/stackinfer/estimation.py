"""Maximum-likelihood estimation of the follower parameters over Theta.

The averaged log-density is concave in theta (log det is concave, the trace
terms are linear, and -tr(Q^{-1} B) is concave for B psd), so a damped
projected Newton iteration converges to the global constrained maximum.  The
likelihood Hessian is always negative definite here, which keeps the Newton
direction well defined; plain gradient ascent stalls on this problem because
the Hessian conditioning reaches ~1e3-1e6 at realistic query magnitudes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .game import (
    Dataset,
    GameConfig,
    q_matrix,
    project_theta,
    require_feasible,
    theta_feasible,
)

DEFAULT_INIT_THETA = (10.0, 0.0, 10.0)


@dataclass
class MleSettings:
    """Stopping and line-search knobs for the projected Newton solver."""

    max_iters: int = 500
    grad_tol: float = 1e-8  # on the projected-gradient stationarity norm
    init_theta: tuple = DEFAULT_INIT_THETA
    armijo_c: float = 1e-4  # sufficient-increase constant
    shrink: float = 0.5  # backtracking factor
    initial_step: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1 or self.grad_tol <= 0:
            raise ValueError("max_iters and grad_tol must be positive")
        if not (0 < self.armijo_c < 1 and 0 < self.shrink < 1 and self.initial_step > 0):
            raise ValueError("invalid line-search parameters")


@dataclass
class MleResult:
    theta_hat: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    on_boundary: bool = False  # estimate sits on the boundary of Theta


@dataclass
class SufficientStats:
    """Running data summary; the likelihood depends on D(T) only through these.

    s_hat = mean over records of uF uF', b_hat = mean of b b' with b = R1F uL,
    and cbar = mean of b . uF.
    """

    s_hat: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    b_hat: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    cbar: float = 0.0
    count: int = 0

    def update(self, uL, uF, cfg: GameConfig) -> None:
        b = cfg.R1F @ np.asarray(uL, float)
        uF = np.asarray(uF, float)
        k = self.count
        self.s_hat = (k * self.s_hat + np.outer(uF, uF)) / (k + 1)
        self.b_hat = (k * self.b_hat + np.outer(b, b)) / (k + 1)
        self.cbar = (k * self.cbar + b @ uF) / (k + 1)
        self.count = k + 1


def stats_from_dataset(data: Dataset, cfg: GameConfig) -> SufficientStats:
    uLs, uFs = data.as_arrays()
    B = uLs @ cfg.R1F.T
    return SufficientStats(
        s_hat=uFs.T @ uFs / len(uFs),
        b_hat=B.T @ B / len(B),
        cbar=float(np.einsum("ki,ki->", B, uFs)) / len(B),
        count=len(B),
    )


# ---------------------------------------------------------------------------
# Likelihood values
# ---------------------------------------------------------------------------
def log_likelihood(theta, data: Dataset, cfg: GameConfig) -> float:
    """l_t(theta): arithmetic mean of the log-density over the records."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    require_feasible(theta, cfg.kappa)
    stats = stats_from_dataset(data, cfg)
    value, _, _ = _kernels.mle_vgh(
        np.asarray(theta, float), stats.s_hat, stats.b_hat, stats.cbar, cfg.lam
    )
    return float(value)


def expected_log_density(uL, theta_query, theta_true, cfg: GameConfig) -> float:
    """Gaussian cross-entropy term E_{uF ~ p(.|uL, theta_true)}[log p(uF|uL, theta_query)].

    Closed form: -(h/2) log 2pi + 0.5 log det(lam Q_q)
                 - 0.5 [tr(lam Q_q Sigma_t) + d' (lam Q_q) d],  d = mu_t - mu_q.
    """
    require_feasible(theta_query, cfg.kappa)
    require_feasible(theta_true, cfg.kappa)
    Qq = q_matrix(theta_query)
    Qt = q_matrix(theta_true)
    b = cfg.R1F @ np.asarray(uL, float)
    mu_q = -np.linalg.solve(Qq, b)
    mu_t = -np.linalg.solve(Qt, b)
    sigma_t = np.linalg.inv(Qt) / cfg.lam
    d = mu_t - mu_q
    _, logdet = np.linalg.slogdet(cfg.lam * Qq)
    return float(
        -0.5 * cfg.h * np.log(2 * np.pi)
        + 0.5 * logdet
        - 0.5 * cfg.lam * (np.trace(Qq @ sigma_t) + d @ Qq @ d)
    )


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------
def _stationarity(theta, grad, kappa) -> float:
    """Norm of the unit-step projected-gradient displacement."""
    return float(np.linalg.norm(project_theta(theta + grad, kappa) - theta))


def mle_from_stats(stats: SufficientStats, settings: MleSettings, cfg: GameConfig) -> MleResult:
    """Projected Newton ascent of the average log-density given sufficient stats."""
    if stats.count == 0:
        raise ValueError("empty dataset")
    lam = cfg.lam
    theta = project_theta(np.asarray(settings.init_theta, float), cfg.kappa)
    f, g, H = _kernels.mle_vgh(theta, stats.s_hat, stats.b_hat, stats.cbar, lam)
    converged = False
    it = 0
    for it in range(1, settings.max_iters + 1):
        if _stationarity(theta, g, cfg.kappa) <= settings.grad_tol:
            converged = True
            break
        d = np.linalg.solve(H, -g)  # ascent direction: H is negative definite
        if g @ d <= 0:
            d = g
        t = settings.initial_step
        accepted = False
        while t > 1e-16:
            cand = project_theta(theta + t * d, cfg.kappa)
            step = cand - theta
            gain = g @ step
            if gain > 0:
                fc, gc, Hc = _kernels.mle_vgh(cand, stats.s_hat, stats.b_hat, stats.cbar, lam)
                if fc >= f + settings.armijo_c * gain:
                    theta, f, g, H = cand, fc, gc, Hc
                    accepted = True
                    break
            t *= settings.shrink
        if not accepted:
            # no ascent step available: treat as stationary (boundary pile-up)
            converged = _stationarity(theta, g, cfg.kappa) <= settings.grad_tol
            break
    boundary = not (
        theta[0] > cfg.kappa * (1 + 1e-6)
        and theta[0] * theta[2] - theta[1] ** 2 > cfg.kappa * (1 + 1e-6)
        and np.abs(theta).max() < 1e3 * (1 - 1e-9)
    )
    return MleResult(
        theta_hat=theta, loglik=float(f), iterations=it, converged=converged, on_boundary=boundary
    )


def mle(data: Dataset, settings: MleSettings, cfg: GameConfig) -> MleResult:
    """Maximum-likelihood estimate of theta on the dataset (global max: concave)."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    return mle_from_stats(stats_from_dataset(data, cfg), settings, cfg)


def likelihood_grad(theta, data: Dataset, cfg: GameConfig) -> np.ndarray:
    """Analytic gradient of log_likelihood (mean of the per-record scores)."""
    stats = stats_from_dataset(data, cfg)
    _, g, _ = _kernels.mle_vgh(np.asarray(theta, float), stats.s_hat, stats.b_hat, stats.cbar, cfg.lam)
    return g
