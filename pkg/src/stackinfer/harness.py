"""Batch experiment orchestration, summary statistics, and persistence.

Configs are JSON trees (matrices as row-major lists of lists).  Every run of
``run_experiment`` is fully determined by (config, master_seed): path i draws
from a generator seeded with ``np.random.SeedSequence([master_seed, i])``,
and results are collected in path-index order regardless of the worker pool.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import gaussian_kde, kurtosis, probplot, skew

from .estimation import MleSettings
from .fisher import check_criterion
from .game import GameConfig, require_feasible
from .loop import (
    RhoSchedule,
    RunTrajectory,
    run_algorithm1,
    run_algorithm2,
    run_baseline_no_exploration,
    run_baseline_uniform,
)

ALGORITHMS = ("alg1", "alg2", "uniform", "no_exploration")
ARTIFACT_VERSION = "1"

TRAJECTORY_COLUMNS = [
    "path_id", "t", "uL_1", "uL_2", "uF_1", "uF_2",
    "theta1", "theta2", "theta3", "rho", "criterion", "expected_cost",
]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
@dataclass
class ExperimentConfig:
    game: GameConfig
    theta_true: tuple  # follower parameters used to simulate responses
    algorithm: str = "alg2"
    criterion: str = "E"
    horizon: int = 100
    num_paths: int = 300
    master_seed: int = 0
    rho_schedule: RhoSchedule = field(default_factory=RhoSchedule)
    mle_settings: MleSettings = field(default_factory=MleSettings)
    grid_resolution: int = 25
    out_dir: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        check_criterion(self.criterion)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.num_paths < 1:
            raise ValueError("num_paths must be >= 1")
        if not (isinstance(self.master_seed, int) and self.master_seed >= 0):
            raise ValueError("master_seed must be a nonnegative integer")
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        self.theta_true = tuple(float(v) for v in self.theta_true)
        require_feasible(self.theta_true, self.game.kappa)

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return config_to_dict(self) == config_to_dict(other)


_GAME_KEYS = {"QL", "R1L", "R2L", "R1F", "R2F", "lam", "kappa", "leader_box"}
_RHO_KEYS = {"mu0", "alpha", "eta"}
_MLE_KEYS = {"max_iters", "grad_tol", "init_theta", "armijo_c", "shrink", "initial_step"}
_TOP_KEYS = {
    "game", "theta_true", "algorithm", "criterion", "horizon", "num_paths",
    "master_seed", "rho_schedule", "mle_settings", "grid_resolution", "out_dir",
}


def _check_keys(d: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ValueError(f"unknown {where} key(s): {', '.join(unknown)}")


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ValueError("config root must be a mapping")
    _check_keys(d, _TOP_KEYS, "config")
    for key in ("game", "theta_true"):
        if key not in d:
            raise ValueError(f"missing required config key: {key}")
    game_d = dict(d["game"])
    _check_keys(game_d, _GAME_KEYS, "game")
    rho_d = dict(d.get("rho_schedule", {}))
    _check_keys(rho_d, _RHO_KEYS, "rho_schedule")
    mle_d = dict(d.get("mle_settings", {}))
    _check_keys(mle_d, _MLE_KEYS, "mle_settings")
    if "init_theta" in mle_d:
        mle_d["init_theta"] = tuple(mle_d["init_theta"])
    kwargs = {
        k: d[k]
        for k in ("algorithm", "criterion", "horizon", "num_paths", "master_seed",
                  "grid_resolution", "out_dir")
        if k in d
    }
    return ExperimentConfig(
        game=GameConfig(**game_d),
        theta_true=tuple(d["theta_true"]),
        rho_schedule=RhoSchedule(**rho_d),
        mle_settings=MleSettings(**mle_d),
        **kwargs,
    )


def config_to_dict(ec: ExperimentConfig) -> dict:
    g, r, m = ec.game, ec.rho_schedule, ec.mle_settings
    return {
        "game": {
            "QL": g.QL.tolist(), "R1L": g.R1L.tolist(), "R2L": g.R2L.tolist(),
            "R1F": g.R1F.tolist(), "R2F": g.R2F.tolist(), "lam": float(g.lam),
            "kappa": float(g.kappa), "leader_box": g.leader_box.tolist(),
        },
        "theta_true": [float(v) for v in ec.theta_true],
        "algorithm": ec.algorithm,
        "criterion": ec.criterion,
        "horizon": int(ec.horizon),
        "num_paths": int(ec.num_paths),
        "master_seed": int(ec.master_seed),
        "rho_schedule": {"mu0": float(r.mu0), "alpha": float(r.alpha), "eta": float(r.eta)},
        "mle_settings": {
            "max_iters": int(m.max_iters), "grad_tol": float(m.grad_tol),
            "init_theta": [float(v) for v in m.init_theta],
            "armijo_c": float(m.armijo_c), "shrink": float(m.shrink),
            "initial_step": float(m.initial_step),
        },
        "grid_resolution": int(ec.grid_resolution),
        "out_dir": ec.out_dir,
    }


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"config parse error in {path}: {e}") from e
    return config_from_dict(d)


def save_config(ec: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(ec), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Batch execution
# ---------------------------------------------------------------------------
def _run_path(ec: ExperimentConfig, i: int) -> RunTrajectory:
    rng = np.random.default_rng(np.random.SeedSequence([ec.master_seed, i]))
    key = (ec.master_seed, i)
    try:
        if ec.algorithm == "alg1":
            return run_algorithm1(ec.game, ec.theta_true, ec.mle_settings, ec.criterion,
                                  ec.horizon, rng, seed_key=key, res=ec.grid_resolution)
        if ec.algorithm == "alg2":
            return run_algorithm2(ec.game, ec.theta_true, ec.mle_settings, ec.criterion,
                                  ec.rho_schedule, ec.horizon, rng, seed_key=key,
                                  res=ec.grid_resolution)
        if ec.algorithm == "uniform":
            return run_baseline_uniform(ec.game, ec.theta_true, ec.mle_settings, ec.horizon,
                                        rng, criterion=ec.criterion, seed_key=key,
                                        res=ec.grid_resolution)
        return run_baseline_no_exploration(ec.game, ec.theta_true, ec.mle_settings, ec.horizon,
                                           rng, criterion=ec.criterion, seed_key=key,
                                           res=ec.grid_resolution)
    except Exception as e:
        raise RuntimeError(f"path {i} failed: {e}") from e


def run_experiment(ec: ExperimentConfig, workers: int | None = None) -> list[RunTrajectory]:
    """Run num_paths independent seeded paths; output is worker-count invariant."""
    indices = range(ec.num_paths)
    if workers is None or workers <= 1 or ec.num_paths == 1:
        return [_run_path(ec, i) for i in indices]
    chunk = max(1, ec.num_paths // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_path, [ec] * ec.num_paths, indices, chunksize=chunk))


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------
@dataclass
class BiasSummary:
    """Scaled final-estimate bias sqrt(T)(theta_hat(T) - theta_true), per component."""

    samples: np.ndarray  # (3, num_paths)
    mean: np.ndarray  # (3,)
    variance: np.ndarray  # (3,) sample variance (ddof=1)
    kde_grid: list  # per component: density evaluation grid
    kde_density: list  # per component: density values


@dataclass
class ErrorSeries:
    """Across-path order statistics of |uL(t) - uL*| / |uL*| per step."""

    t: np.ndarray
    minimum: np.ndarray
    p25: np.ndarray
    median: np.ndarray
    p75: np.ndarray
    maximum: np.ndarray


@dataclass
class NormalityReport:
    component: str
    qq_correlation: float  # correlation of the sample QQ plot against normal quantiles
    skewness: float
    excess_kurtosis: float


def _common_horizon(runs) -> int:
    if not runs:
        raise ValueError("empty run collection")
    horizons = {len(r) for r in runs}
    if len(horizons) != 1:
        raise ValueError("all runs must share the same horizon")
    return horizons.pop()


def _kde_curve(x: np.ndarray):
    """Gaussian KDE, Silverman bandwidth, 256 points over range +-3 bandwidths.

    A zero-variance sample has no meaningful bandwidth; it is reported as a
    single-point density (a point mass at the shared value).
    """
    if np.ptp(x) == 0.0:
        return np.array([x[0]]), np.array([1.0])
    kde = gaussian_kde(x, bw_method="silverman")
    bw = float(np.sqrt(kde.covariance[0, 0]))
    grid = np.linspace(x.min() - 3 * bw, x.max() + 3 * bw, 256)
    return grid, kde(grid)


def summarize_bias(runs, theta_true) -> BiasSummary:
    T = _common_horizon(runs)
    theta_true = np.asarray(theta_true, float)
    finals = np.array([r.theta_hat[-1] for r in runs])  # (P, 3)
    samples = (np.sqrt(T) * (finals - theta_true)).T  # (3, P)
    grids, densities = [], []
    for comp in samples:
        g, d = _kde_curve(comp)
        grids.append(g)
        densities.append(d)
    ddof = 1 if samples.shape[1] > 1 else 0
    return BiasSummary(
        samples=samples,
        mean=samples.mean(axis=1),
        variance=samples.var(axis=1, ddof=ddof),
        kde_grid=grids,
        kde_density=densities,
    )


def relative_error_series(runs, uL_star) -> ErrorSeries:
    uL_star = np.asarray(uL_star, float)
    denom = float(np.linalg.norm(uL_star))
    if denom == 0.0:
        raise ValueError("uL_star must be nonzero")
    T = _common_horizon(runs)
    errs = np.array([np.linalg.norm(r.uL - uL_star, axis=1) / denom for r in runs])  # (P, T)
    q = np.percentile(errs, [25, 50, 75], axis=0)
    return ErrorSeries(
        t=np.arange(1, T + 1),
        minimum=errs.min(axis=0),
        p25=q[0],
        median=q[1],
        p75=q[2],
        maximum=errs.max(axis=0),
    )


def normality_diagnostics(bias: BiasSummary) -> list[NormalityReport]:
    n = bias.samples.shape[1]
    if n < 20:
        raise ValueError(f"need at least 20 samples for normality diagnostics, got {n}")
    reports = []
    for k, comp in enumerate(bias.samples):
        (_, _), (_, _, r) = probplot(comp, dist="norm")
        reports.append(
            NormalityReport(
                component=f"theta{k + 1}",
                qq_correlation=float(r),
                skewness=float(skew(comp)),
                excess_kurtosis=float(kurtosis(comp)),
            )
        )
    return reports


# ---------------------------------------------------------------------------
# Persistence (fixed schemas; 17 significant digits keeps float64 exact)
# ---------------------------------------------------------------------------
def _fmt(x: float) -> str:
    return "" if math.isnan(x) else format(float(x), ".17g")


def _open_csv(path):
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def export_trajectories(runs, path, fmt: str = "csv", config: ExperimentConfig | None = None) -> None:
    if fmt == "csv":
        if any(r.uL.shape[1] != 2 or r.uF.shape[1] != 2 for r in runs):
            raise ValueError("trajectory CSV schema requires 2-D leader and follower actions")
        fh, w = _open_csv(path)
        with fh:
            w.writerow(TRAJECTORY_COLUMNS)
            for pid, r in enumerate(runs):
                for t in range(len(r)):
                    w.writerow(
                        [pid, t + 1]
                        + [_fmt(v) for v in (*r.uL[t], *r.uF[t], *r.theta_hat[t])]
                        + [_fmt(r.rho[t]), _fmt(r.criterion_value[t]), _fmt(r.expected_cost[t])]
                    )
    elif fmt == "json":
        bundle = {
            "artifact_version": ARTIFACT_VERSION,
            "config": config_to_dict(config) if config is not None else None,
            "master_seed": config.master_seed if config is not None else None,
            "trajectories": [r.to_dict() for r in runs],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(bundle, fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")


def import_trajectories(path, fmt: str | None = None) -> list[RunTrajectory]:
    """Read back exported trajectories.

    JSON bundles restore every field; the CSV schema carries the numeric
    payload only (algorithm/criterion labels and seed keys are not part of it).
    """
    if fmt is None:
        fmt = "json" if str(path).endswith(".json") else "csv"
    if fmt == "json":
        with open(path, "r", encoding="utf-8") as fh:
            bundle = json.load(fh)
        return [RunTrajectory.from_dict(d) for d in bundle["trajectories"]]
    runs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected trajectory CSV header: {header}")
        by_path: dict[int, list] = {}
        for row in reader:
            by_path.setdefault(int(row[0]), []).append(
                [float(v) if v != "" else math.nan for v in row[2:]]
            )
    for pid in sorted(by_path):
        rows = np.array(by_path[pid])
        runs.append(
            RunTrajectory(
                algorithm="", criterion="",
                uL=rows[:, 0:2].copy(), uF=rows[:, 2:4].copy(),
                theta_hat=rows[:, 4:7].copy(), rho=rows[:, 7].copy(),
                criterion_value=rows[:, 8].copy(), expected_cost=rows[:, 9].copy(),
            )
        )
    return runs


def export_bias(bias: BiasSummary, path, fmt: str = "csv") -> None:
    if fmt == "csv":
        fh, w = _open_csv(path)
        with fh:
            w.writerow(["component", "sample"])
            for k, comp in enumerate(bias.samples):
                for v in comp:
                    w.writerow([f"theta{k + 1}", _fmt(v)])
    elif fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "samples": bias.samples.tolist(),
                    "mean": bias.mean.tolist(),
                    "variance": bias.variance.tolist(),
                    "kde": [
                        {"grid": g.tolist(), "density": d.tolist()}
                        for g, d in zip(bias.kde_grid, bias.kde_density)
                    ],
                },
                fh,
                indent=2,
            )
            fh.write("\n")
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")


def export_error_series(es: ErrorSeries, path, fmt: str = "csv") -> None:
    if fmt == "csv":
        fh, w = _open_csv(path)
        with fh:
            w.writerow(["t", "min", "p25", "median", "p75"])
            for i, t in enumerate(es.t):
                w.writerow(
                    [int(t)] + [_fmt(a[i]) for a in (es.minimum, es.p25, es.median, es.p75)]
                )
    elif fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "t": es.t.tolist(),
                    "min": es.minimum.tolist(),
                    "p25": es.p25.tolist(),
                    "median": es.median.tolist(),
                    "p75": es.p75.tolist(),
                },
                fh,
                indent=2,
            )
            fh.write("\n")
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")


def export_fisher_map(uLs, values, path) -> None:
    """Criterion surface dump: columns uL_1, uL_2, H."""
    fh, w = _open_csv(path)
    with fh:
        w.writerow(["uL_1", "uL_2", "H"])
        for (x1, x2), h in zip(uLs, values):
            w.writerow([_fmt(x1), _fmt(x2), _fmt(h)])


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
