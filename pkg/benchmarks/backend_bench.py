#!/usr/bin/env python3
"""Timing comparison of the compiled kernels against the NumPy fallback.

Measures the three routed kernels in isolation and one end-to-end
optimization workload, then prints a speedup table. Run from a checkout:

    python3 benchmarks/backend_bench.py [--repeats 5]
"""
import argparse
import statistics
import time

import numpy as np

from msnevo import backend
from msnevo.msn import MsnConfig, run
from msnevo.network import NetworkSpec, build, conv2d, dense, maxpool2d, prelu
from msnevo.objectives import Objective, TerminationRule
from msnevo.vecmath import as_generator


def timed(fn, repeats):
    """Best-of-N wall time for fn()."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def conv_large_case():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((8, 16, 28, 28))
    w = rng.standard_normal((32, 16, 7, 7))
    b = rng.standard_normal(32)
    return lambda: backend.conv2d_forward(x, w, b, 1, 3)


def conv_small_case():
    # the shape the synthetic-digits benchmark actually evaluates per member
    rng = np.random.default_rng(4)
    x = rng.standard_normal((500, 1, 10, 10))
    w = rng.standard_normal((4, 1, 3, 3))
    b = rng.standard_normal(4)
    return lambda: backend.conv2d_forward(x, w, b, 1, 1)


def maxpool_case():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 32, 28, 28))
    return lambda: backend.maxpool2d_forward(x, 2, 2)


def canberra_case():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(200_000)
    y = rng.standard_normal(200_000)
    return lambda: backend.canberra(x, y)


def end_to_end_case():
    """A short optimization run on a small conv classifier: exercises
    conv/pool kernels through the pool evaluation loop and canberra through
    anchor selection."""
    spec = NetworkSpec((1, 10, 10), [
        conv2d(1, 4, 3, stride=1, padding=1), prelu(1),
        maxpool2d(2, 2),
        dense(4 * 5 * 5, 10),
    ])
    net = build(spec)
    rng = np.random.default_rng(3)
    images = rng.standard_normal((16, 1, 10, 10))
    target = rng.standard_normal((16, 10))

    def evaluate(params):
        out = net.forward(params, images)
        return -float(np.mean((out - target) ** 2))

    obj = Objective(name="bench", evaluate=evaluate,
                    parameter_count=net.parameter_count,
                    init_params=lambda r: net.init_params(as_generator(r)))
    cfg = MsnConfig(pool_size=10, num_anchors=2, probes_per_anchor=3)
    rule = TerminationRule(max_steps=15, target_tolerance=None)
    return lambda: run(obj, cfg, rule, seed=0)


CASES = [
    ("conv2d small  500x1x10x10 * 4x1x3x3", conv_small_case),
    ("conv2d large  8x16x28x28 * 32x16x7x7", conv_large_case),
    ("maxpool2d 8x32x28x28 w2 s2", maxpool_case),
    ("canberra n=200000", canberra_case),
    ("msn 15 gens on conv classifier", end_to_end_case),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="take the best of this many timings (default 5)")
    args = parser.parse_args()

    if "compiled" not in backend.available_backends():
        raise SystemExit("compiled extension not built; nothing to compare")

    rows = []
    for label, make in CASES:
        times = {}
        for name in ("python", "compiled"):
            backend.set_backend(name)
            fn = make()
            fn()  # warm up
            times[name] = timed(fn, args.repeats)
        rows.append((label, times["python"], times["compiled"]))

    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'python':>10}  {'compiled':>10}  speedup")
    for label, t_py, t_c in rows:
        print(f"{label:<{width}}  {t_py * 1e3:>8.2f}ms  {t_c * 1e3:>8.2f}ms  "
              f"{t_py / t_c:>6.2f}x")
    geo = statistics.geometric_mean([t_py / t_c for _, t_py, t_c in rows])
    print(f"\ngeometric-mean speedup: {geo:.2f}x")


if __name__ == "__main__":
    main()
