"""Time each kernel on every importable backend.

    python3 benchmarks/bench_kernels.py [--train 24000] [--queries 6000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from botamp import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--train", type=int, default=24_000)
    ap.add_argument("--queries", type=int, default=6_000)
    ap.add_argument("--features", type=int, default=6)
    ap.add_argument("--k", type=int, default=34)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    X = rng.random((args.train, args.features))
    y = rng.random(args.train) < 0.5
    Q = rng.random((args.queries, args.features))
    w = rng.normal(size=args.features)
    yf, ys = y.astype(float), np.where(y, 1.0, -1.0)

    cases = {
        "logistic_loss_grad": lambda impl: kernels.logistic_loss_grad(X, yf, w, 0.1, 0.0, impl=impl),
        "hinge_loss_subgrad": lambda impl: kernels.hinge_loss_subgrad(X, ys, w, 0.1, 1e-4, impl=impl),
        "knn_vote": lambda impl: kernels.knn_vote(X, y, Q, args.k, impl=impl),
    }
    backends = kernels.available()
    print(f"train={args.train} queries={args.queries} features={args.features} k={args.k} "
          f"(best of {args.repeat})")
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        secs = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        speed = secs["numpy"] / secs["compiled"] if "compiled" in secs else float("nan")
        print(f"{name:<20}" + "".join(f"{secs[b]:>11.4f}s" for b in backends) + f"{speed:>9.1f}x")
    if len(backends) > 1:
        same = np.array_equal(cases["knn_vote"]("compiled"), cases["knn_vote"]("numpy"))
        print(f"knn votes identical across backends: {same}")


if __name__ == "__main__":
    main()
