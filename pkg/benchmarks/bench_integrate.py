"""Compare the compiled and pure-Python integrators on scenario trajectories.

Usage: python benchmarks/bench_integrate.py [--T 50] [--repeat 3] [names ...]
"""
import argparse
import time

import numpy as np

from setstab import scenarios
from setstab.integrate import BACKEND, IntegratorConfig, integrate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", default=["example1", "example-polar", "five-state",
                                                 "oscillator"])
    ap.add_argument("--T", type=float, default=50.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if BACKEND != "compiled":
        print("compiled kernel not available; only the Python backend runs")
    cfg = IntegratorConfig(T=args.T)
    print(f"{'scenario':15s} {'steps':>8s} {'python s':>10s} {'compiled s':>11s} "
          f"{'speedup':>8s} {'max diff':>9s}")
    for name in args.names:
        sc = scenarios.load(name)
        fld = sc.closed_loop()
        x0 = np.asarray(sc.x0 if sc.x0 is not None else sc.box_array.mean(axis=1))
        tp, py = best_of(lambda: integrate(fld, x0, cfg, backend="python"), args.repeat)
        if BACKEND == "compiled":
            tc, cc = best_of(lambda: integrate(fld, x0, cfg, backend="compiled"), args.repeat)
            diff = float(np.max(np.abs(py.final - cc.final)))
            print(f"{name:15s} {py.steps:8d} {tp:10.4f} {tc:11.5f} {tp / tc:8.1f} {diff:9.1e}")
        else:
            print(f"{name:15s} {py.steps:8d} {tp:10.4f} {'-':>11s} {'-':>8s} {'-':>9s}")


if __name__ == "__main__":
    main()
