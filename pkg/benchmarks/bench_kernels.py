"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from dsst import kernels
from dsst.graph import cycle_graph
from dsst.sim import reference_scenario, run_scenario


def cases(rng):
    g = cycle_graph(12)
    n, v = 3, 12
    Ahat = np.eye(n, k=1)
    Ahat[-1] = [0.1, -0.2, 0.9]
    W, b, eta, phi = (rng.standard_normal((12, v * n)) for _ in range(4))
    R = rng.standard_normal((79, 24, 24))
    Y = rng.standard_normal((12, 24))
    return {
        "tracker_round p=12 v*n=36": lambda k: k.tracker_round(
            W, b, eta, phi, Ahat, g.indptr, g.indices, g.weights, 0.2, 1.0
        ),
        "support_residuals 79 supports": lambda k: k.support_residuals(R, Y),
        "run_scenario reference T=500": lambda k: run_scenario(reference_scenario(attacked=2, horizon=500)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if "compiled" not in kernels.BACKENDS:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'case':34s} {'backend':9s} {'best (ms)':>10s}")
    for name, fn in cases(rng).items():
        for backend in sorted(kernels.BACKENDS):
            with kernels.use_backend(backend) as k:
                number = 1 if name.startswith("run_") else 200
                best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
            print(f"{name:34s} {backend:9s} {best * 1e3:10.4f}")


if __name__ == "__main__":
    main()
