"""Quadratic Stackelberg game model with a quantal-response follower.

The leader plays uL inside a box; the follower, with rationality lambda,
samples its action from p(uF | uL, theta) proportional to exp(-lambda * JF).
For quadratic costs this density is an exact multivariate normal with

    mu(theta)    = -Q(theta)^{-1} R1F uL,
    Sigma(theta) = (1/lambda) Q(theta)^{-1},

where Q(theta) = [[theta1, theta2], [theta2, theta3]].  R1F maps leader
actions into the follower's cost gradient (shape h x n), so the follower's
cross term reads uF . (R1F uL).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Parameter bound used to keep the feasible set compact.
THETA_BOUND = 1e3

# d Q / d theta_i for the symmetric 2x2 parameterization.
PARAM_BASIS = np.array(
    [
        [[1.0, 0.0], [0.0, 0.0]],
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, 0.0], [0.0, 1.0]],
    ]
)


def _as_matrix(x, name, shape):
    m = np.asarray(x, dtype=float)
    if m.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {m.shape}")
    return m


def _check_symmetric(m, name, tol=1e-10):
    if np.abs(m - m.T).max() > tol:
        raise ValueError(f"{name} not symmetric")


# ---------------------------------------------------------------------------
# Configuration and data containers
# ---------------------------------------------------------------------------
@dataclass
class GameConfig:
    """Matrices and scalars defining one quadratic Stackelberg game."""

    QL: np.ndarray  # (n, n) leader quadratic term, symmetric positive definite
    R1L: np.ndarray  # (h, n) leader cross term
    R2L: np.ndarray  # (h, h) leader follower-quadratic term, symmetric
    R1F: np.ndarray  # (h, n) follower cross term (maps uL into follower space)
    lam: float  # rationality coefficient lambda >= 0
    leader_box: np.ndarray  # (n, 2) per-coordinate [low, high] bounds of U^L
    kappa: float = 1e-3  # positive-definiteness margin of Theta
    R2F: np.ndarray | None = None  # (n, n) follower leader-quadratic term; default zero

    def __post_init__(self):
        self.QL = np.asarray(self.QL, dtype=float)
        if self.QL.ndim != 2 or self.QL.shape[0] != self.QL.shape[1]:
            raise ValueError("QL must be square")
        n = self.QL.shape[0]
        self.R2L = np.asarray(self.R2L, dtype=float)
        if self.R2L.ndim != 2 or self.R2L.shape[0] != self.R2L.shape[1]:
            raise ValueError("R2L must be square")
        h = self.R2L.shape[0]
        if h != 2:
            raise ValueError("the 3-parameter Q(theta) model requires follower dimension h = 2")
        self.R1L = _as_matrix(self.R1L, "R1L", (h, n))
        self.R1F = _as_matrix(self.R1F, "R1F", (h, n))
        self.leader_box = _as_matrix(self.leader_box, "leader_box", (n, 2))
        if self.R2F is None:
            self.R2F = np.zeros((n, n))
        else:
            self.R2F = _as_matrix(self.R2F, "R2F", (n, n))
        _check_symmetric(self.QL, "QL")
        _check_symmetric(self.R2L, "R2L")
        _check_symmetric(self.R2F, "R2F")
        if np.linalg.eigvalsh(self.QL).min() <= 0:
            raise ValueError("QL not positive definite")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if np.any(self.leader_box[:, 0] >= self.leader_box[:, 1]):
            raise ValueError("leader_box lower bounds must be below upper bounds")

    # Dimensions: leader action, follower action, parameter vector.
    @property
    def n(self) -> int:
        return self.QL.shape[0]

    @property
    def h(self) -> int:
        return self.R2L.shape[0]

    @property
    def m(self) -> int:
        return 3


@dataclass
class FollowerDistribution:
    """Gaussian response N(mu, sigma) of the follower to one leader action."""

    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class InteractionRecord:
    """One observed leader/follower action pair."""

    t: int
    uL: np.ndarray
    uF: np.ndarray


@dataclass
class Dataset:
    """Ordered interaction history D(T); step indices strictly increasing from 1."""

    records: list[InteractionRecord] = field(default_factory=list)

    def append(self, uL, uF):
        t = len(self.records) + 1
        self.records.append(InteractionRecord(t, np.asarray(uL, float), np.asarray(uF, float)))

    def __len__(self):
        return len(self.records)

    def as_arrays(self):
        """Stack records into (T, n) and (T, h) arrays."""
        if not self.records:
            raise ValueError("empty dataset")
        uLs = np.array([r.uL for r in self.records])
        uFs = np.array([r.uF for r in self.records])
        return uLs, uFs

    def validate(self):
        for i, r in enumerate(self.records):
            if r.t != i + 1:
                raise ValueError("record step indices must increase strictly from 1")


# ---------------------------------------------------------------------------
# Parameter set Theta
# ---------------------------------------------------------------------------
def q_matrix(theta) -> np.ndarray:
    """Q(theta) = [[t1, t2], [t2, t3]]."""
    t = np.asarray(theta, dtype=float)
    return np.array([[t[0], t[1]], [t[1], t[2]]])


def theta_feasible(theta, kappa) -> bool:
    """Membership in Theta: theta1 >= kappa, theta1*theta3 - theta2^2 >= kappa,
    plus the compactness box |theta_i| <= THETA_BOUND."""
    t = np.asarray(theta, dtype=float)
    if np.abs(t).max() > THETA_BOUND:
        return False
    return bool(t[0] >= kappa and t[0] * t[2] - t[1] ** 2 >= kappa)


def theta_interior(theta, kappa, slack=10.0) -> bool:
    """Strict interior of Theta (both inequalities hold with slack*kappa margin)."""
    t = np.asarray(theta, dtype=float)
    if np.abs(t).max() >= THETA_BOUND:
        return False
    return bool(t[0] >= slack * kappa and t[0] * t[2] - t[1] ** 2 >= slack * kappa)


def require_feasible(theta, kappa):
    if not theta_feasible(theta, kappa):
        raise ValueError(f"theta {np.asarray(theta)} outside the feasible set Theta")


def project_theta(theta, kappa) -> np.ndarray:
    """Approximate projection onto Theta intersected with the compactness box.

    Clamps theta1 (and theta3) to the box and the kappa margin, then shrinks
    theta2 toward zero just enough that theta1*theta3 - theta2^2 >= kappa.
    Cheap and feasible rather than the exact Euclidean projection; the MLE
    objective is concave, so any feasible-set retraction suffices.
    """
    t = np.clip(np.asarray(theta, dtype=float), -THETA_BOUND, THETA_BOUND)
    t[0] = max(t[0], kappa)
    # tiny safety factors keep the result feasible under float rounding
    t[2] = max(t[2], (kappa / t[0]) * (1 + 1e-12))
    slack = t[0] * t[2] - kappa
    if t[1] ** 2 > slack:
        t[1] = np.sign(t[1]) * np.sqrt(max(slack, 0.0)) * (1 - 1e-12)
    return t


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------
def follower_cost(uF, uL, theta, cfg: GameConfig) -> float:
    """J^F = 0.5 uF'Q(theta)uF + uF.(R1F uL) + 0.5 uL'R2F uL."""
    require_feasible(theta, cfg.kappa)
    uF = np.asarray(uF, float)
    uL = np.asarray(uL, float)
    Q = q_matrix(theta)
    return float(0.5 * uF @ Q @ uF + uF @ (cfg.R1F @ uL) + 0.5 * uL @ cfg.R2F @ uL)


def leader_cost(uL, uF, cfg: GameConfig) -> float:
    """J^L = 0.5 uL'QL uL + uF'R1L uL + 0.5 uF'R2L uF."""
    uL = np.asarray(uL, float)
    uF = np.asarray(uF, float)
    if uL.shape != (cfg.n,) or uF.shape != (cfg.h,):
        raise ValueError("action dimension mismatch")
    return float(0.5 * uL @ cfg.QL @ uL + uF @ cfg.R1L @ uL + 0.5 * uF @ cfg.R2L @ uF)


# ---------------------------------------------------------------------------
# Quantal response distribution
# ---------------------------------------------------------------------------
def follower_response(uL, theta, cfg: GameConfig) -> FollowerDistribution:
    """Exact Gaussian parameters of the quantal response to the action uL.

    Returns
    -------
    FollowerDistribution with
        mu    = -Q(theta)^{-1} R1F uL
        sigma = (1/lambda) Q(theta)^{-1}
    """
    require_feasible(theta, cfg.kappa)
    if cfg.lam <= 0:
        raise ValueError("lambda must be positive for a proper response density")
    Q = q_matrix(theta)
    b = cfg.R1F @ np.asarray(uL, float)
    mu = -np.linalg.solve(Q, b)
    sigma = np.linalg.inv(Q) / cfg.lam
    return FollowerDistribution(mu=mu, sigma=(sigma + sigma.T) / 2)


def sample_follower(dist: FollowerDistribution, rng: np.random.Generator, size=None):
    """Draw from N(mu, sigma) via the lower Cholesky factor.

    The factorization is fixed (lower-triangular Cholesky) so that seeded
    runs reproduce bit-identically across builds.
    """
    L = np.linalg.cholesky(dist.sigma)
    if size is None:
        return dist.mu + L @ rng.standard_normal(dist.mu.shape[0])
    z = rng.standard_normal((size, dist.mu.shape[0]))
    return dist.mu + z @ L.T


def log_normalizer(uL, theta, cfg: GameConfig) -> float:
    """log Z with Z = (2 pi / lambda)^{h/2} det(Q)^{-1/2} exp(lambda/2 b'Q^{-1}b)."""
    Q = q_matrix(theta)
    b = cfg.R1F @ np.asarray(uL, float)
    h = cfg.h
    _, logdet = np.linalg.slogdet(Q)
    return float(
        0.5 * h * np.log(2 * np.pi / cfg.lam)
        - 0.5 * logdet
        + 0.5 * cfg.lam * b @ np.linalg.solve(Q, b)
    )


def log_density(uF, uL, theta, cfg: GameConfig) -> float:
    """Gaussian log-density of the quantal response.

    log p = -(h/2) log 2pi + 0.5 log det(lambda Q) - (lambda/2)(uF-mu)'Q(uF-mu)
    """
    require_feasible(theta, cfg.kappa)
    Q = q_matrix(theta)
    uF = np.asarray(uF, float)
    b = cfg.R1F @ np.asarray(uL, float)
    mu = -np.linalg.solve(Q, b)
    resid = uF - mu
    _, logdet = np.linalg.slogdet(cfg.lam * Q)
    return float(
        -0.5 * cfg.h * np.log(2 * np.pi) + 0.5 * logdet - 0.5 * cfg.lam * resid @ Q @ resid
    )


def log_density_grad_theta(uF, uL, theta, cfg: GameConfig) -> np.ndarray:
    """Exact score of log_density in theta.

    With E_i = dQ/dtheta_i and v = Q^{-1} R1F uL,

        grad_i = 0.5 tr(Q^{-1} E_i) - (lambda/2) uF'E_i uF + (lambda/2) v'E_i v.
    """
    if not theta_interior(theta, cfg.kappa):
        raise ValueError("theta must lie strictly inside Theta for derivatives")
    Q = q_matrix(theta)
    qinv = np.linalg.inv(Q)
    uF = np.asarray(uF, float)
    v = qinv @ (cfg.R1F @ np.asarray(uL, float))
    lam = cfg.lam
    return np.array(
        [
            0.5 * np.trace(qinv @ E) - 0.5 * lam * uF @ E @ uF + 0.5 * lam * v @ E @ v
            for E in PARAM_BASIS
        ]
    )


def log_density_hessian_theta(uF, uL, theta, cfg: GameConfig) -> np.ndarray:
    """Exact Hessian of log_density in theta; independent of uF.

        H_ij = -0.5 tr(Q^{-1}E_i Q^{-1}E_j) - lambda v'E_i Q^{-1} E_j v
    """
    if not theta_interior(theta, cfg.kappa):
        raise ValueError("theta must lie strictly inside Theta for derivatives")
    Q = q_matrix(theta)
    qinv = np.linalg.inv(Q)
    v = qinv @ (cfg.R1F @ np.asarray(uL, float))
    H = np.empty((3, 3))
    for i, Ei in enumerate(PARAM_BASIS):
        for j, Ej in enumerate(PARAM_BASIS):
            H[i, j] = -0.5 * np.trace(qinv @ Ei @ qinv @ Ej) - cfg.lam * v @ Ei @ qinv @ Ej @ v
    return (H + H.T) / 2
