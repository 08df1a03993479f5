"""Benchmark the compiled backup kernels against the numpy fallback.

Builds a garden product, seeds the terminal states, and times repeated
Bellman-max sweeps, greedy extraction and policy-weighted sweeps with
both backends on identical inputs.  Reports throughput per backend and
the worst cross-backend deviation, which should sit at a few ulps.

Usage:
    python benchmarks/bench_kernels.py --preset 4x4 --sweeps 200
"""

import argparse
import sys
import time

import numpy as np

from prefmdp._kernels import _numpy
from prefmdp.product import build_product
from prefmdp.scenarios import build_garden, build_garden_mini, large_garden_config

try:
    from prefmdp._kernels import _speedups
except ImportError:
    _speedups = None


def build_instance(preset: str):
    if preset == "large":
        mdp, pdfa = build_garden(large_garden_config())
    else:
        mdp, pdfa = build_garden_mini(preset)
    return build_product(mdp, pdfa)


def run_backend(kernels, product, sweeps: int, repeats: int, seed: int):
    """Time the three kernels; returns (timings dict, final values, rows)."""
    sp = product.sparse
    rng = np.random.default_rng(seed)
    terminal = np.flatnonzero(product.terminal_class >= 0)
    upd = np.flatnonzero(product.terminal_class < 0).astype(np.int64)
    seed_values = rng.random(len(terminal))
    weights = np.ones(sp.n_sa)
    counts = np.diff(sp.act_ptr)
    weights /= np.repeat(np.maximum(counts, 1), counts)

    timings = {}
    final = None
    rows = None
    for name in ("vi_sweep", "greedy_sa", "policy_sweep"):
        best = float("inf")
        for _ in range(repeats):
            values = np.zeros(sp.n_states)
            values[terminal] = seed_values
            buffer = values.copy()
            start = time.perf_counter()
            if name == "vi_sweep":
                for _ in range(sweeps):
                    kernels.vi_sweep(
                        values, buffer, sp.act_ptr, upd,
                        sp.sa_tptr, sp.t_cols, sp.t_probs,
                    )
                    values, buffer = buffer, values
                final = values
            elif name == "greedy_sa":
                for _ in range(sweeps):
                    rows = kernels.greedy_sa(
                        values, sp.act_ptr, upd,
                        sp.sa_tptr, sp.t_cols, sp.t_probs,
                    )
            else:
                for _ in range(sweeps):
                    kernels.policy_sweep(
                        values, buffer, sp.act_ptr, upd, weights,
                        sp.sa_tptr, sp.t_cols, sp.t_probs,
                    )
                    values, buffer = buffer, values
            best = min(best, time.perf_counter() - start)
        timings[name] = best
    return timings, final, rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--preset", default="4x4", choices=("3x3", "4x4", "large"),
        help="garden instance to benchmark on (default 4x4)",
    )
    parser.add_argument(
        "--sweeps", type=int, default=200, help="sweeps per measurement"
    )
    parser.add_argument(
        "--repeats", type=int, default=5,
        help="measurements per kernel; the fastest is reported",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed values RNG")
    args = parser.parse_args(argv)

    product = build_instance(args.preset)
    sp = product.sparse
    print(
        f"instance {args.preset}: {sp.n_states} states, {sp.n_sa} "
        f"state-action rows, {sp.n_transitions} transitions"
    )
    print(f"protocol: {args.sweeps} sweeps, best of {args.repeats}")

    results = {}
    backends = [("numpy", _numpy)]
    if _speedups is not None:
        backends.append(("cython", _speedups))
    else:
        print("cython extension not built; benchmarking the fallback only")
    for name, kernels in backends:
        timings, final, rows = run_backend(
            kernels, product, args.sweeps, args.repeats, args.seed
        )
        results[name] = (timings, final, rows)
        for kernel, seconds in timings.items():
            rate = args.sweeps / seconds
            print(f"{name:>6} {kernel:<12} {seconds * 1e3:8.1f} ms "
                  f"({rate:10.0f} sweeps/s)")

    if len(results) == 2:
        for kernel in ("vi_sweep", "greedy_sa", "policy_sweep"):
            ratio = (
                results["numpy"][0][kernel] / results["cython"][0][kernel]
            )
            print(f"speedup {kernel:<12} {ratio:5.2f}x")
        dev = float(np.abs(results["numpy"][1] - results["cython"][1]).max())
        same_rows = bool(np.array_equal(results["numpy"][2], results["cython"][2]))
        print(f"max value deviation after {args.sweeps} sweeps: {dev:.3e}")
        print(f"greedy rows identical: {same_rows}")
        if dev > 1e-12:
            print("warning: backends disagree beyond accumulated rounding")
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
