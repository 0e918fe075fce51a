import numpy as np
import pytest

from stackinfer import GameConfig
from stackinfer.harness import ExperimentConfig, run_experiment

# The benchmark game used throughout the suite: 2-D leader, 2-D follower,
# three unknown follower parameters theta = (20, 10, 30).
QL = [[41.0, 2.0], [2.0, 8.0]]
R1L = [[12.0, 42.0], [13.0, 1.0]]
R2L = [[400.0, 34.0], [34.0, 4.0]]
R1F = [[16.0, 8.0], [9.0, 31.0]]
BOX = [[10.0, 100.0], [10.0, 100.0]]
THETA0 = (20.0, 10.0, 30.0)


def make_cfg(**overrides):
    kw = dict(QL=QL, R1L=R1L, R2L=R2L, R1F=R1F, lam=1.0, leader_box=BOX, kappa=1e-3)
    kw.update(overrides)
    return GameConfig(**kw)


@pytest.fixture
def cfg():
    return make_cfg()


@pytest.fixture
def theta0():
    return THETA0


def _batch(algorithm, criterion, horizon, num_paths):
    ec = ExperimentConfig(
        game=make_cfg(), theta_true=THETA0, algorithm=algorithm,
        criterion=criterion, horizon=horizon, num_paths=num_paths, master_seed=0,
    )
    return run_experiment(ec)


# The statistical batches below are expensive; they are session-scoped and
# shared between the module-level trend tests and the acceptance gates.
@pytest.fixture(scope="session")
def alg1_batches():
    """50 paths, T=20: one designed batch per criterion plus the uniform baseline."""
    out = {c: _batch("alg1", c, 20, 50) for c in ("D", "A", "E")}
    out["uniform"] = _batch("uniform", "E", 20, 50)
    return out


@pytest.fixture(scope="session")
def alg2_runs():
    """300 paths, T=100, E-optimality."""
    return _batch("alg2", "E", 100, 300)


@pytest.fixture(scope="session")
def noex_runs():
    """300 paths, T=100, pure exploitation."""
    return _batch("no_exploration", "E", 100, 300)


@pytest.fixture(scope="session")
def alg1_long_runs():
    """200 paths, T=200, D-optimality (normality diagnostics scale)."""
    return _batch("alg1", "D", 200, 200)


def interior_thetas(rng, n):
    """Random parameter vectors well inside Theta."""
    out = []
    while len(out) < n:
        t1 = rng.uniform(5.0, 50.0)
        t3 = rng.uniform(5.0, 50.0)
        t2 = rng.uniform(-0.8, 0.8) * np.sqrt(t1 * t3)
        out.append((t1, t2, t3))
    return out
