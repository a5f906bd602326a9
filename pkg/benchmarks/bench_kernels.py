"""Compare the compiled kernel backend against the NumPy fallback.

Times each hot kernel on a mid-sized workload plus one end-to-end
attribution pass, prints a table with the speedup, and checks that the
two backends agree numerically.  Run from the repository root:

    python benchmarks/bench_kernels.py --repeats 20
"""

import argparse
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from relprop import forward, load_model, lrp_backward
from relprop.kernels import available_backends, use_backend
from relprop.kernels import _convnp

ROOT = Path(__file__).resolve().parents[1]


def _median_ms(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1000.0)
    return statistics.median(times)


def _kernel_cases(rng):
    x = rng.standard_normal((8, 64, 64)).astype(np.float32)
    w = rng.standard_normal((16, 8, 3, 3)).astype(np.float32)
    b = rng.standard_normal(16).astype(np.float32)
    pos = rng.random((16, 64, 64))
    neg = -rng.random((16, 64, 64))
    pool_in = rng.standard_normal((16, 64, 64)).astype(np.float32)
    flat = rng.standard_normal(1_000_000).astype(np.float32)

    def run(mod):
        return {
            "conv2d_forward 8x64x64 -> 16": lambda: mod.conv2d_forward(
                x, w, b, 1, 1),
            "conv2d_split_sums": lambda: mod.conv2d_split_sums(x, w, 1, 1),
            "conv2d_redistribute": lambda: mod.conv2d_redistribute(
                x, w, 1, 1, pos, neg),
            "maxpool2d_forward 16x64x64": lambda: mod.maxpool2d_forward(
                pool_in, 2, 2),
            "sum_sequential 1e6": lambda: mod.sum_sequential(flat),
        }

    return run


def _flatten(result):
    if isinstance(result, tuple):
        return np.concatenate([np.asarray(r, dtype=np.float64).reshape(-1)
                               for r in result])
    return np.asarray(result, dtype=np.float64).reshape(-1)


def _end_to_end(model, x):
    _, trace = forward(model, x)
    return lrp_backward(model, trace, 1).input_relevance


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="benchmark compiled vs NumPy kernel backends")
    parser.add_argument("--repeats", type=int, default=10,
                        help="timed repetitions per case (median reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = available_backends()
    rng = np.random.default_rng(args.seed)
    cases = _kernel_cases(rng)

    model = load_model(ROOT / "fixtures" / "planted_patch_model")
    img = rng.standard_normal(model.input_shape).astype(np.float32)

    rows = []
    numpy_cases = cases(_convnp)
    for name, fn in numpy_cases.items():
        ref = _flatten(fn())
        t_np = _median_ms(fn, args.repeats)
        if "cython" in backends:
            from relprop.kernels import _convext
            alt_fn = cases(_convext)[name]
            diff = float(np.max(np.abs(_flatten(alt_fn()) - ref)))
            t_cy = _median_ms(alt_fn, args.repeats)
            rows.append((name, t_np, t_cy, diff))
        else:
            rows.append((name, t_np, None, 0.0))

    use_backend("numpy")
    t_np = _median_ms(lambda: _end_to_end(model, img), args.repeats)
    ref = _flatten(_end_to_end(model, img))
    if "cython" in backends:
        use_backend("cython")
        diff = float(np.max(np.abs(_flatten(_end_to_end(model, img)) - ref)))
        t_cy = _median_ms(lambda: _end_to_end(model, img), args.repeats)
        rows.append(("lrp end-to-end (fixture model)", t_np, t_cy, diff))
        use_backend("numpy")
    else:
        rows.append(("lrp end-to-end (fixture model)", t_np, None, 0.0))

    width = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{width}}  {'numpy ms':>9}  {'cython ms':>9}  " \
             f"{'speedup':>7}  {'max |diff|':>10}"
    print(header)
    print("-" * len(header))
    for name, t_np, t_cy, diff in rows:
        if t_cy is None:
            print(f"{name:<{width}}  {t_np:>9.3f}  {'n/a':>9}  {'n/a':>7}  "
                  f"{'n/a':>10}")
        else:
            print(f"{name:<{width}}  {t_np:>9.3f}  {t_cy:>9.3f}  "
                  f"{t_np / t_cy:>6.2f}x  {diff:>10.2e}")
    if "cython" not in backends:
        print("\ncompiled backend not built; only the NumPy fallback was "
              "timed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
