"""Compare the compiled and pure-numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--rounds N] [--repeat R]

Each kernel is timed on identical arguments for every importable backend,
and the outputs are checked for exact agreement.
"""

import argparse
import timeit

import numpy as np

from bell_lab import kernels
from bell_lab.correlations import Scenario
from bell_lab.harness import sampling_tables
from bell_lab.lhv import BellFunctional
from bell_lab.quantum import born_behavior, tsirelson_setup


def cases(rounds: int):
    b = born_behavior(tsirelson_setup())
    icdf, ocdf = sampling_tables(b, [np.full(2, 0.5), np.full(2, 0.5)])
    big = Scenario((2, 2), (4, 4), (2, 2))
    coeffs = BellFunctional(big, np.random.default_rng(0).normal(size=big.shape)).matrix()
    return {
        "uniforms": lambda m: m.uniforms(7, 0, rounds, 2),
        "tally_table": lambda m: m.tally_table(icdf, ocdf, 7, 0, rounds),
        "strategy_values": lambda m: m.strategy_values(coeffs, big.inputs, big.outputs, 0, 1 << 8),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.backends()
    print(f"backends: {', '.join(backends)}  (active: {kernels.BACKEND})")
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for kname, fn in cases(args.rounds).items():
        times, outs = {}, {}
        for name, mod in backends.items():
            outs[name] = fn(mod)
            times[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        ref = outs["python"]
        for name, out in outs.items():
            if not np.array_equal(out, ref):
                raise SystemExit(f"{kname}: backend {name} disagrees with python")
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        row = "".join(f"{times[n] * 1e3:>10.2f}ms" for n in backends)
        print(f"{kname:<18}{row}{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
