"""Time temporally constrained clustering of 1000 samples with D precomputed.

Usage: python benchmarks/bench_clustering.py [p] [repeats]
"""
from __future__ import annotations

import sys
import time

import numpy as np

from rmtrack import clustering


def main(p: int = 1000, repeats: int = 20) -> int:
    rng = np.random.default_rng(0)
    streams = {
        "identical": np.ones((p, 64)) / 8.0,
        "noise": rng.standard_normal((p, 64)),
        "regimes": np.repeat(rng.standard_normal((5, 64)), p // 5 + 1, axis=0)[:p]
        + 0.05 * rng.standard_normal((p, 64)),
    }
    print("stream,p,median_ms,max_ms,sweeps,intervals")
    worst = 0.0
    for name, X in streams.items():
        D = clustering.distance_matrix(list(X))
        eps = 1.2 * clustering.baseline_scale(D, min(40, p))
        J = clustering.integral_image(D)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            seg = clustering.cluster(J, p, 1.0, eps)
            times.append(time.perf_counter() - t0)
        med = 1e3 * float(np.median(times))
        worst = max(worst, med)
        print(f"{name},{p},{med:.3f},{1e3 * max(times):.3f},{seg.sweeps},{len(seg)}")
    budget = 100.0
    print(f"worst median {worst:.3f} ms ({'within' if worst <= budget else 'over'} {budget:.0f} ms budget)")
    return 0 if worst <= budget else 1


if __name__ == "__main__":
    args = [int(a) for a in sys.argv[1:3]]
    sys.exit(main(*args))
