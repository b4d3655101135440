"""Time the compiled kernels against their numpy twins.

    python benchmarks/bench_kernels.py --rows 2000 --m 1000
"""
import argparse
import timeit

import numpy as np

from fdrlab import kernels


def cases(rows, m, seed):
    rng = np.random.default_rng(seed)
    values = rng.random((rows, m)) ** 3
    ordered = np.sort(values, axis=1)
    q = np.full(rows, 0.2)
    t = rng.random(rows) * 0.2
    return {
        "step_up_counts": lambda k: k.step_up_counts(values, q, 0, m, False),
        "gamma_hat_sorted": lambda k: k.gamma_hat_sorted(ordered, 0.5),
        "count_leq": lambda k: k.count_leq(values, t),
        "ks_uniform_sorted": lambda k: k.ks_uniform_sorted(ordered),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=2000, help="replicates per call")
    parser.add_argument("--m", type=int, default=1000, help="values per replicate")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    if kernels.compiled_kernels is None:
        print("compiled kernels not built; only the numpy path is timed")
    backends = [("python", kernels.python_kernels)]
    if kernels.compiled_kernels is not None:
        backends.append(("cython", kernels.compiled_kernels))

    print(f"rows={args.rows} m={args.m} (best of {args.repeat}, milliseconds)")
    print(f"{'kernel':<20}" + "".join(f"{name:>10}" for name, _ in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.rows, args.m, args.seed).items():
        times = []
        results = []
        for _, impl in backends:
            results.append(fn(impl))
            times.append(min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)) * 1e3)
        if len(results) == 2:
            assert np.array_equal(results[0], results[1]), f"{name}: backends disagree"
        speedup = f"{times[0] / times[-1]:.1f}x" if len(times) == 2 else "-"
        print(f"{name:<20}" + "".join(f"{ms:>10.2f}" for ms in times) + f"{speedup:>10}")


if __name__ == "__main__":
    main()
