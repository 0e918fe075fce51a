"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--res 101] [--repeat 20]

Each kernel is timed best-of-`repeat` on the workload the library actually
runs (criterion/design surfaces over a res x res leader grid, the batched
cost map, and the MLE value/gradient/Hessian), and the two backends'
outputs are diffed as a sanity check.
"""
import argparse
import time

import numpy as np

from stackinfer import GameConfig, grid_points, q_matrix
from stackinfer._kernels import KIND_A, KIND_D, KIND_E, _py

try:
    from stackinfer._kernels import _fast
except ImportError:
    _fast = None


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--res", type=int, default=101, help="grid resolution per axis")
    ap.add_argument("--repeat", type=int, default=20, help="timing repetitions")
    args = ap.parse_args()

    cfg = GameConfig(
        QL=[[41.0, 2.0], [2.0, 8.0]], R1L=[[12.0, 42.0], [13.0, 1.0]],
        R2L=[[400.0, 34.0], [34.0, 4.0]], R1F=[[16.0, 8.0], [9.0, 31.0]],
        lam=1.0, leader_box=[[10.0, 100.0], [10.0, 100.0]], kappa=1e-3,
    )
    theta = np.array([20.0, 10.0, 30.0])
    qinv = np.linalg.inv(q_matrix(theta))
    qinv = np.ascontiguousarray((qinv + qinv.T) / 2)
    V = grid_points(np.asarray(cfg.leader_box, float), args.res)
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 3))
    base = np.ascontiguousarray(M @ M.T)
    C = np.ascontiguousarray(np.asarray(cfg.QL, float))
    uf = rng.normal(scale=3.0, size=(50, 2))
    b = np.array([240.0, 400.0])
    s_hat = np.ascontiguousarray(uf.T @ uf / len(uf))
    b_hat = np.ascontiguousarray(np.outer(b, b))
    cbar = float((uf @ b).mean())

    cases = [
        ("crit_map/A", lambda m: m.crit_map(V, qinv, cfg.lam, KIND_A)),
        ("crit_map/D", lambda m: m.crit_map(V, qinv, cfg.lam, KIND_D)),
        ("crit_map/E", lambda m: m.crit_map(V, qinv, cfg.lam, KIND_E)),
        ("design_map/D", lambda m: m.design_map(V, base, qinv, cfg.lam, KIND_D)),
        ("cost_map", lambda m: m.cost_map(C, V)),
        ("mle_vgh", lambda m: m.mle_vgh(theta, s_hat, b_hat, cbar, cfg.lam)),
    ]

    if _fast is None:
        print("compiled extension not built; timing pure Python only")
    print(f"{args.res}x{args.res} grid ({len(V)} points), best of {args.repeat}\n")
    header = f"{'kernel':<14}{'python':>12}{'cython':>12}{'speedup':>9}{'max|diff|':>12}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_py = best_of(lambda: call(_py), args.repeat)
        if _fast is None:
            print(f"{name:<14}{t_py * 1e3:>10.3f}ms{'':>12}{'':>9}{'':>12}")
            continue
        t_cy = best_of(lambda: call(_fast), args.repeat)
        a, bb = call(_py), call(_fast)
        if name == "mle_vgh":
            diff = max(
                abs(a[0] - bb[0]),
                np.abs(np.subtract(a[1], bb[1])).max(),
                np.abs(np.subtract(a[2], bb[2])).max(),
            )
        else:
            diff = np.abs(np.subtract(a, bb)).max()
        print(
            f"{name:<14}{t_py * 1e3:>10.3f}ms{t_cy * 1e3:>10.3f}ms"
            f"{t_py / t_cy:>8.1f}x{diff:>12.2e}"
        )


if __name__ == "__main__":
    main()
