"""Time the compiled stepping kernels against their pure-numpy twins.

Run from the repository root::

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --dims 8 32 --steps 200000 --repeats 7

Both backends execute the identical loop body (numba compiles the numpy
implementation unchanged), so the interesting number is the speedup column.
Set ``QCHAIN_NUMBA=off`` to check what the package falls back to without the
compiler; this script always times both when numba is importable.
"""

import argparse
import statistics
import time

import numpy as np

from qchain import _kernels


def _time(fn, *args, repeats):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best.append(time.perf_counter() - t0)
    return statistics.median(best)


def bench(dim, n_steps, repeats, rng):
    A = 0.1 * rng.standard_normal((dim, dim))
    M = np.eye(dim) + 0.01 * rng.standard_normal((dim, dim))
    x0 = rng.standard_normal(dim)
    dt = 1e-3

    rows = []
    for label, numpy_fn, numba_fn, args in (
        ("rk4", _kernels.rk4_steps_numpy, _kernels.rk4_steps_numba, (A, x0, dt, n_steps)),
        ("stepmat", _kernels.step_matrix_steps_numpy, _kernels.step_matrix_steps_numba, (M, x0, n_steps)),
    ):
        t_numpy = _time(numpy_fn, *args, repeats=repeats)
        if _kernels.HAVE_NUMBA:
            numba_fn(*args)  # compile outside the timed region
            t_numba = _time(numba_fn, *args, repeats=repeats)
            agree = np.array_equal(numpy_fn(*args), numba_fn(*args))
            rows.append((label, dim, t_numpy, t_numba, t_numpy / t_numba, agree))
        else:
            rows.append((label, dim, t_numpy, None, None, True))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", type=int, nargs="+", default=[4, 8, 16, 64])
    parser.add_argument("--steps", type=int, default=100_000)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"backend selected by the package: {_kernels.BACKEND}")
    if not _kernels.HAVE_NUMBA:
        print("numba is not importable; timing the numpy path only")
    print(f"{args.steps} steps, median of {args.repeats} runs\n")
    print(f"{'kernel':<8} {'dim':>4} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}  identical")

    rng = np.random.default_rng(args.seed)
    for dim in args.dims:
        for label, d, t_np, t_nb, speedup, agree in bench(dim, args.steps, args.repeats, rng):
            nb = f"{t_nb * 1e3:11.2f}" if t_nb is not None else f"{'-':>11}"
            sp = f"{speedup:8.2f}" if speedup is not None else f"{'-':>8}"
            print(f"{label:<8} {d:>4} {t_np * 1e3:11.2f} {nb} {sp}  {agree}")


if __name__ == "__main__":
    main()
